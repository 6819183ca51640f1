from dataclasses import dataclass
from typing import Optional, Tuple, List, Sequence

import numpy as np

from bdsim.common.errors import OutOfDomainError, RateValidationError


@dataclass(frozen=True)
class StateWindow:
    """Inclusive range of integer states [n_min, n_max] used as a computational truncation of Z"""
    n_min: int
    n_max: int

    def __post_init__(self):
        object.__setattr__(self, 'n_min', int(self.n_min))
        object.__setattr__(self, 'n_max', int(self.n_max))
        if self.n_max - self.n_min < 2:
            raise ValueError(f'State window needs at least 3 states, got {self}')

    @classmethod
    def around(cls, center: int, half_width: int) -> 'StateWindow':
        return cls(center - half_width, center + half_width)

    @property
    def width(self) -> int:
        return self.n_max - self.n_min + 1

    @property
    def states(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    def __contains__(self, n) -> bool:
        return self.n_min <= n <= self.n_max

    def is_interior(self, n) -> bool:
        return self.n_min < n < self.n_max

    def contains_window(self, other: 'StateWindow') -> bool:
        return self.n_min <= other.n_min and other.n_max <= self.n_max

    def index(self, n) -> int:
        if n not in self:
            raise OutOfDomainError(f'State {n} is outside of window {self}')
        return int(n) - self.n_min

    def interior(self) -> 'StateWindow':
        return StateWindow(self.n_min + 1, self.n_max - 1)

    def widened(self, by: int = 1) -> 'StateWindow':
        return StateWindow(self.n_min - by, self.n_max + by)

    def __str__(self):
        return f'[{self.n_min}, {self.n_max}]'


@dataclass(frozen=True, eq=False)
class ProcessSpec:
    """Birth and death rates of a bilateral birth-and-death process.

    Subclasses are immutable and validated at construction.
    """
    kind = None

    @property
    def domain(self) -> Optional[StateWindow]:
        """Window where the rates are defined, None when defined on all of Z"""
        return None

    def rates(self, states) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError()

    def rates_at(self, n: int) -> Tuple[float, float]:
        births, deaths = self.rates(np.array([n]))
        return float(births[0]), float(deaths[0])

    def ratios(self, states) -> np.ndarray:
        """Death to birth rate ratio mu_n / lambda_n"""
        births, deaths = self.rates(states)
        return deaths / births

    def max_exit_rate(self, window: StateWindow) -> float:
        births, deaths = self.rates(window.states)
        return float(np.max(births + deaths))

    def restrict(self, window: StateWindow) -> 'TableRates':
        births, deaths = self.rates(window.states)
        return TableRates(window=window, births=births, deaths=deaths)

    def _check_states(self, states: np.ndarray):
        window = self.domain
        if window is None:
            return
        outside = (states < window.n_min) | (states > window.n_max)
        if np.any(outside):
            raise OutOfDomainError(f'State {int(states[outside][0])} is outside of the {self.kind} '
                                   f'rate window {window}')


@dataclass(frozen=True, eq=False)
class ConstantRates(ProcessSpec):
    kind = 'constant'
    birth: float
    death: float

    def __post_init__(self):
        if not self.birth > 0 or not self.death > 0:
            raise RateValidationError(f'Constant rates need to be positive, '
                                      f'got lambda={self.birth}, mu={self.death}')

    def rates(self, states) -> Tuple[np.ndarray, np.ndarray]:
        states = np.asarray(states)
        return np.full(states.shape, float(self.birth)), np.full(states.shape, float(self.death))

    def ratios(self, states) -> np.ndarray:
        return np.full(np.shape(states), self.death / self.birth)

    def max_exit_rate(self, window: StateWindow = None) -> float:
        return float(self.birth + self.death)


@dataclass(frozen=True, eq=False)
class TableRates(ProcessSpec):
    """Per-state rates stored densely over a window"""
    kind = 'table'
    window: StateWindow
    births: np.ndarray
    deaths: np.ndarray

    def __post_init__(self):
        births = _frozen_array(self.births)
        deaths = _frozen_array(self.deaths)
        if len(births) != self.window.width or len(deaths) != self.window.width:
            raise ValueError(f'Expected {self.window.width} rates for window {self.window}, '
                             f'got {len(births)} births and {len(deaths)} deaths')
        object.__setattr__(self, 'births', births)
        object.__setattr__(self, 'deaths', deaths)
        _raise_for_nonpositive(self.window.states, births, deaths)

    @classmethod
    def from_rows(cls, rows: Sequence[Tuple[int, float, float]]) -> 'TableRates':
        states, births, deaths = _split_rows(rows, 3)
        return cls(window=StateWindow(states[0], states[-1]), births=births, deaths=deaths)

    @property
    def domain(self) -> StateWindow:
        return self.window

    def rates(self, states) -> Tuple[np.ndarray, np.ndarray]:
        states = np.asarray(states)
        self._check_states(states)
        idx = states - self.window.n_min
        return self.births[idx], self.deaths[idx]

    def rows(self) -> List[Tuple[int, float, float]]:
        return list(zip(self.window.states.tolist(), self.births.tolist(), self.deaths.tolist()))


@dataclass(frozen=True, eq=False)
class GeometricRatioRates(ProcessSpec):
    """Birth rates stored over a window, death rates mu_n = ratio * lambda_n"""
    kind = 'geometric_ratio'
    window: StateWindow
    births: np.ndarray
    ratio: float

    def __post_init__(self):
        births = _frozen_array(self.births)
        if len(births) != self.window.width:
            raise ValueError(f'Expected {self.window.width} birth rates for window {self.window}, got {len(births)}')
        if not self.ratio > 0:
            raise RateValidationError(f'Death to birth ratio needs to be positive, got {self.ratio}')
        object.__setattr__(self, 'births', births)
        _raise_for_nonpositive(self.window.states, births, births * self.ratio)

    @classmethod
    def from_rows(cls, rows: Sequence[Tuple[int, float]], ratio: float) -> 'GeometricRatioRates':
        states, births = _split_rows(rows, 2)
        return cls(window=StateWindow(states[0], states[-1]), births=births, ratio=ratio)

    @property
    def domain(self) -> StateWindow:
        return self.window

    def rates(self, states) -> Tuple[np.ndarray, np.ndarray]:
        states = np.asarray(states)
        self._check_states(states)
        births = self.births[states - self.window.n_min]
        return births, births * self.ratio

    def ratios(self, states) -> np.ndarray:
        states = np.asarray(states)
        self._check_states(states)
        # exact ratio, not the quotient of rounded rates
        return np.full(states.shape, float(self.ratio))


def rates_at(spec: ProcessSpec, n: int) -> Tuple[float, float]:
    return spec.rates_at(n)


def validate_spec(spec: ProcessSpec, window: StateWindow) -> ProcessSpec:
    """Check that every birth and death rate on the window is strictly positive.

    Uniqueness of the forward equation solution (the process being simple) is assumed, not checked.
    """
    if spec.domain is not None and not spec.domain.contains_window(window):
        raise OutOfDomainError(f'Window {window} is not covered by the {spec.kind} rate window {spec.domain}')
    births, deaths = spec.rates(window.states)
    _raise_for_nonpositive(window.states, births, deaths)
    return spec


def _raise_for_nonpositive(states: np.ndarray, births: np.ndarray, deaths: np.ndarray):
    bad = ~(births > 0) | ~(deaths > 0)
    if np.any(bad):
        bad_states = states[bad].tolist()
        details = ', '.join(f'{n} (lambda={b}, mu={d})' for n, b, d in zip(bad_states, births[bad], deaths[bad]))
        raise RateValidationError(f'Rates need to be positive, found {len(bad_states)} invalid states: {details}',
                                  states=bad_states)


def _frozen_array(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


def _split_rows(rows, num_fields):
    if not rows:
        raise ValueError('Rate table is empty')
    rows = sorted(rows, key=lambda row: row[0])
    states = [int(row[0]) for row in rows]
    if states != list(range(states[0], states[0] + len(states))):
        raise ValueError(f'Rate table states need to be contiguous, got {states[0]}..{states[-1]} '
                         f'with {len(states)} rows')
    columns = [np.array([row[i] for row in rows], dtype=float) for i in range(1, num_fields)]
    return (states, *columns)
