import math
from dataclasses import dataclass, field
from typing import Dict

import numpy as np
import pandas as pd

from bdsim.common.errors import NuPositivityError, DegenerateNuError, NuRangeError, IncompatibleNuError, \
    CrossingInconsistencyError, DomainError, OutOfDomainError
from bdsim.similarity.methods.model import ProcessSpec, StateWindow, TableRates, validate_spec

INCREASING = 'increasing'
DECREASING = 'decreasing'

# Residual tolerance of the three-term recurrence, in units of machine epsilon * nu_n * (lambda_n + mu_n)
RESIDUAL_EPS_FACTOR = 8

# Increments spanning more decades than this are propagated through their logarithms
LOG_SPACE_DECADES = 300

_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class NuSequence:
    """Positive strictly monotone solution of the three-term recurrence on a window.

    Positivity and monotonicity are only known on the window, the caller is responsible
    for the sequence being extendable to all of Z.
    """
    window: StateWindow
    # nu_n for every window state
    values: np.ndarray
    # d_n = nu_{n+1} - nu_n for n in [n_min, n_max - 1], kept separately so that monotonicity
    # survives values that coincide in floating point (e.g. 1 + beta * c^n for very negative n)
    increments: np.ndarray
    direction: str
    origin_params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        increments = np.array(self.increments, dtype=float)
        if len(values) != self.window.width or len(increments) != self.window.width - 1:
            raise ValueError(f'Expected {self.window.width} values and {self.window.width - 1} increments '
                             f'for window {self.window}')
        nonpositive = np.flatnonzero(~(values > 0))
        if len(nonpositive):
            state = _nearest_to_zero(self.window.states[nonpositive])
            raise NuPositivityError(f'Sequence nu needs to be positive, got nu_{state} = '
                                    f'{values[self.window.index(state)]}', state=state)
        if self.direction not in (INCREASING, DECREASING):
            raise ValueError(f'Unknown direction: {self.direction}')
        sign = 1 if self.direction == INCREASING else -1
        wrong = np.flatnonzero(~(sign * increments > 0))
        if len(wrong):
            state = int(self.window.states[wrong[0]])
            raise DegenerateNuError(f'Sequence nu is not strictly {self.direction} at state {state}: '
                                    f'nu_{state + 1} - nu_{state} = {increments[wrong[0]]}')
        values.setflags(write=False)
        increments.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'increments', increments)

    @classmethod
    def from_values(cls, window: StateWindow, values) -> 'NuSequence':
        """Wrap a plain table of nu values, direction is read off the first increment"""
        values = np.array(values, dtype=float)
        increments = np.diff(values)
        direction = INCREASING if len(increments) and increments[0] > 0 else DECREASING
        return cls(window=window, values=values, increments=increments, direction=direction,
                   origin_params={'table': True})

    @property
    def is_increasing(self) -> bool:
        return self.direction == INCREASING

    def __getitem__(self, n: int) -> float:
        return float(self.values[self.window.index(n)])

    def ratio(self, k: int, n: int) -> float:
        """nu_n / nu_k"""
        return self[n] / self[k]

    def residuals(self, spec: ProcessSpec) -> np.ndarray:
        """nu_{n+1} lambda_n - nu_n (lambda_n + mu_n) + nu_{n-1} mu_n at interior states.

        Evaluated on the values, which are what the transformed rates are built from.
        """
        births, deaths = spec.rates(self.window.interior().states)
        values = self.values
        return births * values[2:] - (births + deaths) * values[1:-1] + deaths * values[:-2]

    def residual_tolerances(self, spec: ProcessSpec) -> np.ndarray:
        births, deaths = spec.rates(self.window.interior().states)
        return RESIDUAL_EPS_FACTOR * _EPS * self.values[1:-1] * (births + deaths)

    def to_dataframe(self, spec: ProcessSpec = None) -> pd.DataFrame:
        df = pd.DataFrame({
            'n': self.window.states,
            'nu': self.values,
            'd': np.append(self.increments, np.nan),
        })
        if spec is not None:
            df['residual'] = np.concatenate([[np.nan], self.residuals(spec), [np.nan]])
        return df


@dataclass(frozen=True, eq=False)
class TransformedProcess:
    # Transformed rates, defined on the interior of the nu window
    spec: TableRates
    source: ProcessSpec
    nu: NuSequence

    @property
    def window(self) -> StateWindow:
        return self.spec.window

    def exit_rate_defect(self) -> np.ndarray:
        """Relative deviation of the transformed total exit rate from the original one"""
        states = self.window.states
        births, deaths = self.source.rates(states)
        return np.abs(self.spec.births + self.spec.deaths - (births + deaths)) / (births + deaths)


def build_nu_recurrence(spec: ProcessSpec, window: StateWindow, nu_0: float, d_0: float) -> NuSequence:
    """Solve the three-term recurrence from nu_0 and the increment d_0 = nu_1 - nu_0.

    Increments follow d_n = (mu_n / lambda_n) d_{n-1} upwards and the inverse relation downwards,
    so they all share the sign of d_0.
    """
    validate_spec(spec, window)
    if 0 not in window or 1 not in window:
        raise OutOfDomainError(f'Window {window} needs to contain states 0 and 1 to start the recurrence')
    if d_0 == 0:
        raise DegenerateNuError('Increment d_0 = 0 gives a constant sequence, '
                                'the transformation requires a strictly monotone sequence')
    if not nu_0 > 0:
        raise NuPositivityError(f'Sequence nu needs to be positive, got nu_0 = {nu_0}', state=0)

    # increments d_n for n in [n_min, n_max - 1]; position of d_0 is -n_min
    ratios = spec.ratios(window.states)
    origin = -window.n_min
    increments = _propagate_increments(ratios, origin, d_0, window)

    values = np.empty(window.width)
    values[origin] = nu_0
    values[origin + 1:] = nu_0 + np.cumsum(increments[origin:])
    values[:origin] = nu_0 - np.cumsum(increments[:origin][::-1])[::-1]

    return NuSequence(
        window=window,
        values=values,
        increments=increments,
        direction=INCREASING if d_0 > 0 else DECREASING,
        origin_params={'nu_0': float(nu_0), 'd_0': float(d_0)}
    )


def _propagate_increments(ratios: np.ndarray, origin: int, d_0: float, window: StateWindow) -> np.ndarray:
    num = window.width - 1
    # log|d_n| - log|d_0|: upwards add log(mu_n / lambda_n) for n >= 1, downwards subtract it for n <= 0
    log_ratios = np.log(ratios)
    log_steps = np.zeros(num)
    log_steps[origin + 1:] = np.cumsum(log_ratios[origin + 1:num])
    log_steps[:origin] = -np.cumsum(log_ratios[1:origin + 1][::-1])[::-1]
    log_magnitude = math.log(abs(d_0)) + log_steps

    if np.ptp(log_magnitude) / math.log(10) > LOG_SPACE_DECADES:
        with np.errstate(over='ignore', under='ignore'):
            increments = math.copysign(1.0, d_0) * np.exp(log_magnitude)
    else:
        increments = np.empty(num)
        increments[origin] = d_0
        for i in range(origin + 1, num):
            increments[i] = ratios[i] * increments[i - 1]
        for i in range(origin - 1, -1, -1):
            increments[i] = increments[i + 1] / ratios[i + 1]

    bad = np.flatnonzero(~np.isfinite(increments) | (increments == 0))
    if len(bad):
        state = _nearest_to_zero(window.states[bad])
        raise NuRangeError(f'Increment nu_{state + 1} - nu_{state} leaves double precision range '
                           f'(log10 magnitude {log_magnitude[state - window.n_min] / math.log(10):.0f}), '
                           f'use a narrower window')
    return increments


def build_nu_constant_ratio(c: float, beta: float, window: StateWindow) -> NuSequence:
    """Closed-form sequence nu_n = 1 + beta c^n, valid when mu_n = c lambda_n for all n"""
    if not c > 0 or not beta > 0:
        raise ValueError(f'Closed-form sequence needs c > 0 and beta > 0, got c={c}, beta={beta}')
    if c == 1:
        raise DegenerateNuError('With equal birth and death rates (c = 1) the recurrence '
                                'does not admit a positive non-constant solution')
    powers = closed_form_powers(c, window.states)
    increments = beta * powers[:-1] * (c - 1)
    values = 1 + beta * powers
    if not np.all(np.isfinite(values)) or np.any(increments == 0):
        raise NuRangeError(f'Sequence 1 + {beta} * {c}^n leaves double precision range on window {window}')
    return NuSequence(
        window=window,
        values=values,
        increments=increments,
        direction=INCREASING if c > 1 else DECREASING,
        origin_params={'beta': float(beta), 'c': float(c)}
    )


def closed_form_powers(c: float, states) -> np.ndarray:
    with np.errstate(over='ignore', under='ignore'):
        return np.power(float(c), np.asarray(states, dtype=float))


def closed_form_nu(c: float, beta: float, n) -> np.ndarray:
    return 1 + beta * closed_form_powers(c, n)


def transform_process(spec: ProcessSpec, nu: NuSequence) -> TransformedProcess:
    """Rates lambda~_n = lambda_n nu_{n+1} / nu_n and mu~_n = mu_n nu_{n-1} / nu_n.

    Defined on the interior of the nu window, where both neighbours of nu are known.
    """
    validate_spec(spec, nu.window)
    residuals = nu.residuals(spec)
    tolerances = nu.residual_tolerances(spec)
    failed = np.flatnonzero(np.abs(residuals) > tolerances)
    if len(failed):
        states = nu.window.interior().states[failed].tolist()
        worst = failed[np.argmax(np.abs(residuals[failed]) / tolerances[failed])]
        raise IncompatibleNuError(
            f'Sequence nu does not solve the recurrence for the given rates at {len(states)} states, '
            f'worst at state {nu.window.interior().states[worst]} with residual {residuals[worst]:.3g} '
            f'(tolerance {tolerances[worst]:.3g})',
            states=states
        )
    interior = nu.window.interior()
    births, deaths = spec.rates(interior.states)
    values = nu.values
    return TransformedProcess(
        spec=TableRates(
            window=interior,
            births=births * values[2:] / values[1:-1],
            deaths=deaths * values[:-2] / values[1:-1]
        ),
        source=spec,
        nu=nu
    )


def predict_transition(nu: NuSequence, k: int, n: int, p_kn):
    """Transition probability of the transformed process: (nu_n / nu_k) p_kn"""
    p_kn = np.asarray(p_kn, dtype=float) if np.ndim(p_kn) else float(p_kn)
    if np.any(p_kn < 0) or np.any(p_kn > 1):
        raise ValueError(f'Transition probability needs to be in [0, 1], got {p_kn}')
    return nu.ratio(k, n) * p_kn


def predict_fpt(nu: NuSequence, k: int, s: int, g_ks):
    """First-passage-time density of the transformed process: (nu_s / nu_k) g_ks"""
    if k == s:
        raise DomainError(f'First-passage-time density is undefined for k = s = {k}')
    g_ks = np.asarray(g_ks, dtype=float) if np.ndim(g_ks) else float(g_ks)
    if np.any(g_ks < 0):
        raise ValueError('First-passage-time density needs to be nonnegative')
    return nu.ratio(k, s) * g_ks


def predict_crossing(nu: NuSequence, k: int, s: int, p_ks: float) -> float:
    """Ultimate crossing probability of the transformed process: (nu_s / nu_k) P_ks"""
    if k == s:
        raise DomainError(f'Crossing probability is undefined for k = s = {k}')
    if not 0 <= p_ks <= 1:
        raise ValueError(f'Crossing probability needs to be in [0, 1], got {p_ks}')
    predicted = nu.ratio(k, s) * p_ks
    if predicted > 1:
        raise CrossingInconsistencyError(
            f'Predicted crossing probability {predicted} from {k} to {s} exceeds 1: '
            f'the sequence nu does not fit the process or P_ks = {p_ks} is wrong')
    return predicted


def _nearest_to_zero(states) -> int:
    states = np.asarray(states)
    return int(states[np.argmin(np.abs(states))])
