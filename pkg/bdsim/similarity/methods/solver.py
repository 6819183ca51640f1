"""Truncated Kolmogorov forward equations

dp_n/dt = lambda_{n-1} p_{n-1} - (lambda_n + mu_n) p_n + mu_{n+1} p_{n+1}

integrated on a finite window with killing edges: probability flowing out of the window is
removed from the system and accumulated in two sink components, the deficit.
"""
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp, cumulative_trapezoid, trapezoid
from scipy.sparse import diags, csr_matrix

from bdsim.common import config
from bdsim.common.errors import StiffnessError, WindowTooSmallError, GridMismatchError, RenewalOrderingError, \
    DomainError, OutOfDomainError
from bdsim.similarity.methods.crossing import CrossingEstimate, NUMERIC
from bdsim.similarity.methods.model import ProcessSpec, StateWindow, validate_spec

MIN_REL_TOL = 1e-13
MAX_REL_TOL = 1e-6

# Negative probabilities above this are integration noise and clamped silently
UNDERSHOOT_WARN = -1e-13

# Far edge deficit of a first-passage solve, in units of rel_tol
FAR_DEFICIT_FACTOR = 10

AUTO_WINDOW_MAX_DOUBLINGS = 10


@dataclass(frozen=True, eq=False)
class ForwardGenerator:
    window: StateWindow
    # dp/dt = matrix @ p on the window
    matrix: csr_matrix
    # mu_{n_min}, rate of loss through the lower edge
    lower_outflow: float
    # lambda_{n_max}, rate of loss through the upper edge
    upper_outflow: float

    def rhs(self, t, y):
        """Right-hand side of the system augmented with the two sink components"""
        p = y[:-2]
        return np.concatenate([self.matrix @ p, [self.lower_outflow * p[0], self.upper_outflow * p[-1]]])

    def column_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=0)).ravel()


def build_generator(spec: ProcessSpec, window: StateWindow) -> ForwardGenerator:
    validate_spec(spec, window)
    births, deaths = spec.rates(window.states)
    matrix = diags(
        diagonals=[births[:-1], -(births + deaths), deaths[1:]],
        offsets=[-1, 0, 1],
        shape=(window.width, window.width),
        format='csr'
    )
    return ForwardGenerator(
        window=window,
        matrix=matrix,
        lower_outflow=float(deaths[0]),
        upper_outflow=float(births[-1])
    )


@dataclass(frozen=True, eq=False)
class TransitionSlice:
    """p_{k,n}(t) for every window state n and grid time t"""
    window: StateWindow
    k: int
    times: np.ndarray
    # shape (len(times), window.width)
    values: np.ndarray
    lower_deficit: np.ndarray
    upper_deficit: np.ndarray
    # most negative value clamped to zero, 0 if none
    undershoot: float = 0.0

    @property
    def deficit(self) -> np.ndarray:
        return self.lower_deficit + self.upper_deficit

    def column(self, n: int) -> np.ndarray:
        """p_{k,n}(t) over the time grid"""
        return self.values[:, self.window.index(n)]

    def mass(self) -> np.ndarray:
        return self.values.sum(axis=1) + self.deficit

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame({
            't': np.repeat(self.times, self.window.width),
            'n': np.tile(self.window.states, len(self.times)),
            'p': self.values.ravel()
        })


@dataclass(frozen=True, eq=False)
class FPTDensity:
    """First-passage-time density g_{k,s}(t) on a time grid.

    The density is defective when absorbed_mass stays below 1.
    """
    k: int
    s: int
    times: np.ndarray
    density: np.ndarray
    absorbed_mass: np.ndarray
    censored_mass: float
    # mass lost through the truncation edge on the far side of k from s
    far_deficit: float = 0.0

    def cumulative(self) -> np.ndarray:
        return cumulative_trapezoid(self.density, self.times, initial=0)

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame({
            't': self.times,
            'g': self.density,
            'absorbed_mass': self.absorbed_mass
        })


def time_grid(t_max: float, points: int = None) -> np.ndarray:
    points = points or config.GRID_POINTS
    if not t_max > 0:
        raise DomainError(f'Final time needs to be positive, got {t_max}')
    if points < 2:
        raise ValueError(f'Time grid needs at least 2 points, got {points}')
    return np.linspace(0, t_max, points)


def solve_forward(spec: ProcessSpec, window: StateWindow, k: int, times, rel_tol: float = None) -> TransitionSlice:
    """Integrate the truncated forward system from p_n(0) = delta_{kn} with an adaptive RK45 pair.

    Whether the untruncated system has a unique solution is not checked, the deficit
    bounds the error the truncation introduces.
    """
    rel_tol = config.REL_TOL if rel_tol is None else rel_tol
    times = _check_times(times)
    _check_rel_tol(rel_tol)
    if not window.is_interior(k):
        raise OutOfDomainError(f'Initial state {k} needs to be strictly inside window {window}')
    generator = build_generator(spec, window)
    values, lower, upper = _integrate(generator, window.index(k), times, rel_tol)
    values, undershoot = _clamp_undershoot(values)
    return TransitionSlice(
        window=window,
        k=int(k),
        times=times,
        values=values,
        lower_deficit=lower,
        upper_deficit=upper,
        undershoot=undershoot
    )


def _integrate(generator: ForwardGenerator, k_index: int, times: np.ndarray, rel_tol: float):
    width = generator.window.width
    y0 = np.zeros(width + 2)
    y0[k_index] = 1.0
    if len(times) == 1:
        return y0[None, :width].copy(), np.zeros(1), np.zeros(1)

    result = solve_ivp(
        generator.rhs,
        (times[0], times[-1]),
        y0,
        method='RK45',
        t_eval=times,
        rtol=rel_tol,
        atol=rel_tol * config.ABS_TOL_FACTOR
    )
    if result.status != 0:
        raise StiffnessError(f'Forward equations on window {generator.window} could not be integrated up to '
                             f't = {times[-1]}: {result.message}. Use a wider window or a smaller final time.')
    y = result.y.T
    y[0] = y0
    values = y[:, :width]
    lower = np.maximum.accumulate(y[:, width])
    upper = np.maximum.accumulate(y[:, width + 1])
    return values, lower, upper


def _clamp_undershoot(values: np.ndarray):
    undershoot = float(min(values.min(), 0.0))
    if undershoot < 0:
        if undershoot < UNDERSHOOT_WARN:
            warnings.warn(f'Clamped negative probabilities down to {undershoot:.3g} to zero, '
                          f'consider a smaller rel_tol')
        values = np.maximum(values, 0.0)
    return values, undershoot


def _check_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or not len(times):
        raise ValueError('Time grid needs to be a non-empty 1-D sequence')
    if times[0] != 0:
        raise ValueError(f'Time grid needs to start at 0, got {times[0]}')
    if np.any(np.diff(times) <= 0):
        raise ValueError('Time grid needs to be strictly increasing')
    return times


def _check_rel_tol(rel_tol: float):
    if not MIN_REL_TOL <= rel_tol <= MAX_REL_TOL:
        raise ValueError(f'Relative tolerance needs to be in [{MIN_REL_TOL}, {MAX_REL_TOL}], got {rel_tol}')


def auto_window(spec: ProcessSpec, k: int, t_max: float, s: Optional[int] = None,
                rel_tol: float = None) -> StateWindow:
    """Window [min(k, s) - m, max(k, s) + m] with m = ceil(8 + 3 t_max max(lambda_n + mu_n)).

    Doubles m until the deficit at t_max drops below rel_tol. Windows are clipped to the
    domain of table rates, in which case a too large deficit raises WindowTooSmallError.
    """
    rel_tol = config.REL_TOL if rel_tol is None else rel_tol
    low = min(k, s) if s is not None else k
    high = max(k, s) if s is not None else k
    domain = spec.domain

    rate_window = domain or StateWindow(low - 1, high + 1)
    m = math.ceil(8 + 3 * t_max * spec.max_exit_rate(rate_window))
    for _ in range(AUTO_WINDOW_MAX_DOUBLINGS):
        window = StateWindow(low - m, high + m)
        clipped = domain is not None and not domain.contains_window(window)
        if clipped:
            window = StateWindow(max(window.n_min, domain.n_min), min(window.n_max, domain.n_max))
        if not window.is_interior(low) or not window.is_interior(high):
            raise WindowTooSmallError(f'Rate window {domain} leaves no room around states {low}..{high}')
        deficit = solve_forward(spec, window, k, [0, t_max], rel_tol=rel_tol).deficit[-1]
        if deficit < rel_tol:
            return window
        if clipped:
            raise WindowTooSmallError(f'Truncation deficit {deficit:.3g} at t = {t_max} exceeds {rel_tol:g} '
                                      f'on the full rate window {window}, provide rates on a wider window')
        m *= 2
    raise WindowTooSmallError(f'Truncation deficit still {deficit:.3g} at t = {t_max} on window {window}')


def fpt_numeric(spec: ProcessSpec, window: StateWindow, k: int, s: int, times, rel_tol: float = None) -> FPTDensity:
    """First-passage-time density from k to s with s made absorbing.

    Only the states on k's side of s are integrated, the window edge next to s is the absorbing
    state and its outflow lambda_{s-1} p_{s-1} (or mu_{s+1} p_{s+1}) is the density.
    """
    rel_tol = config.REL_TOL if rel_tol is None else rel_tol
    if k == s:
        raise DomainError(f'First-passage-time density is undefined for k = s = {k}')
    if not window.is_interior(k) or not window.is_interior(s):
        raise OutOfDomainError(f'States k = {k} and s = {s} need to be strictly inside window {window}')
    times = _check_times(times)
    _check_rel_tol(rel_tol)

    upwards = s > k
    n_min, n_max = (window.n_min, s - 1) if upwards else (s + 1, window.n_max)
    if n_max - n_min < 2:
        raise WindowTooSmallError(f'Window {window} leaves too few states beyond k = {k} '
                                  f'on the side away from s = {s}')
    sub = StateWindow(n_min, n_max)
    generator = build_generator(spec, sub)
    values, lower, upper = _integrate(generator, sub.index(k), times, rel_tol)
    values, _ = _clamp_undershoot(values)

    if upwards:
        density = generator.upper_outflow * values[:, -1]
        absorbed, far = upper, lower
    else:
        density = generator.lower_outflow * values[:, 0]
        absorbed, far = lower, upper

    if far[-1] > FAR_DEFICIT_FACTOR * rel_tol:
        raise WindowTooSmallError(f'Mass {far[-1]:.3g} escaped through the far edge of window {window} '
                                  f'by t = {times[-1]}, widen it on the side away from s = {s}')
    return FPTDensity(
        k=int(k),
        s=int(s),
        times=times,
        density=density,
        absorbed_mass=np.minimum(absorbed, 1.0),
        censored_mass=float(1 - min(absorbed[-1], 1.0)),
        far_deficit=float(far[-1])
    )


def crossing_from_fpt(fpt: FPTDensity) -> CrossingEstimate:
    """Crossing probability as the mass absorbed by the final time of the grid"""
    return CrossingEstimate(
        k=fpt.k,
        s=fpt.s,
        point=float(fpt.absorbed_mass[-1]),
        provenance=NUMERIC,
        horizon=float(fpt.times[-1]),
        censored_note=True
    )


def convolve_renewal(g: FPTDensity, p: TransitionSlice, n: int, t: float) -> float:
    """Trapezoid approximation of int_0^t g_{k,s}(theta) p_{s,n}(t - theta) dtheta.

    Equals p_{k,n}(t) when k < s <= n or n <= s < k.
    """
    k, s = g.k, g.s
    if not (k < s <= n or n <= s < k):
        raise RenewalOrderingError(f'Renewal identity requires k < s <= n or n <= s < k, got k={k}, s={s}, n={n}')
    if p.k != s:
        raise GridMismatchError(f'Transition probabilities need to start at s = {s}, got {p.k}')
    if len(g.times) != len(p.times) or not np.array_equal(g.times, p.times):
        raise GridMismatchError('First-passage-time density and transition probabilities use different time grids')
    steps = np.diff(g.times)
    if len(steps) and not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise GridMismatchError('Renewal convolution needs a uniform time grid')
    matches = np.flatnonzero(np.isclose(g.times, t, rtol=1e-12, atol=1e-12))
    if not len(matches):
        raise GridMismatchError(f'Time {t} is not a point of the grid')
    i = int(matches[0])
    if i == 0:
        return 0.0
    # on a uniform grid t_i - t_j = t_{i-j}
    integrand = g.density[:i + 1] * p.column(n)[i::-1]
    return float(trapezoid(integrand, g.times[:i + 1]))
