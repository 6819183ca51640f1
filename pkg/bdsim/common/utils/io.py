"""Experiment config files and CSV output.

Config files are plain text, one `key = value` per line, `#` starts a comment. Rate tables
follow a `table:` line, one `n lambda mu` row per state (`n lambda` for geometric_ratio rates),
and a table of nu values follows a `nu_table:` line, one `n nu` row per state. A table ends at
the next `key = value` line or marker.
"""
import sys
from dataclasses import dataclass, field, replace
from typing import Optional, List, Tuple, Dict, Union, TextIO

import numpy as np
import pandas as pd

from bdsim.common import config
from bdsim.common.errors import ConfigError, RateValidationError
from bdsim.common.utils.formatting import format_float
from bdsim.similarity.methods.model import ProcessSpec, ConstantRates, TableRates, GeometricRatioRates, StateWindow

KINDS = ('constant', 'table', 'geometric_ratio')
NU_MODES = ('recurrence', 'constant_ratio', 'table')

MARKERS = ('table', 'nu_table')

# config key -> (ExperimentConfig field, type)
KEYS = {
    'kind': ('kind', str),
    'lambda': ('lam', float),
    'mu': ('mu', float),
    'ratio': ('ratio', float),
    'window_min': ('window_min', int),
    'window_max': ('window_max', int),
    'nu_mode': ('nu_mode', str),
    'nu0': ('nu0', float),
    'd0': ('d0', float),
    'beta': ('beta', float),
    'c': ('c', float),
    'k': ('k', int),
    's': ('s', int),
    'n': ('n', int),
    't_max': ('t_max', float),
    'grid_points': ('grid_points', int),
    'rel_tol': ('rel_tol', float),
    'trials': ('trials', int),
    'seed': ('seed', int),
    'bins': ('bins', int),
    'horizon': ('horizon', float),
    'threads': ('threads', int),
    'output': ('output', str),
}


@dataclass
class ExperimentConfig:
    kind: str = 'constant'
    lam: Optional[float] = None
    mu: Optional[float] = None
    ratio: Optional[float] = None
    # rows (n, lambda, mu) or (n, lambda) depending on kind
    table: List[Tuple] = field(default_factory=list)
    window_min: Optional[int] = None
    window_max: Optional[int] = None
    # defaults to constant_ratio for constant ratio kinds, recurrence for tables
    nu_mode: Optional[str] = None
    nu0: float = 1.0
    d0: float = 1.0
    beta: float = 1.0
    # defaults to mu / lambda
    c: Optional[float] = None
    nu_table: List[Tuple[int, float]] = field(default_factory=list)
    k: int = 0
    s: int = 1
    n: int = 1
    t_max: float = 2.0
    grid_points: int = config.GRID_POINTS
    rel_tol: float = config.REL_TOL
    trials: int = config.TRIALS
    seed: int = config.SEED
    bins: int = config.BINS
    horizon: Optional[float] = None
    threads: int = config.THREADS
    output: Optional[str] = None
    path: Optional[str] = None
    # config key -> line it was read from
    lines: Dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            self._fail('kind', f'Unknown kind "{self.kind}", expected one of {", ".join(KINDS)}')
        if self.kind == 'constant':
            for key, value in (('lambda', self.lam), ('mu', self.mu)):
                if value is None:
                    self._fail(key, f'Constant rates need "{key}"')
                if not value > 0:
                    self._fail(key, f'"{key}" needs to be positive, got {value}')
        else:
            if not self.table:
                self._fail('table', f'Rates of kind {self.kind} need a "table:" section')
            num_fields = 3 if self.kind == 'table' else 2
            for row in self.table:
                if len(row) != num_fields:
                    self._fail('table', f'Rows of a {self.kind} table need {num_fields} fields, got {len(row)}')
        if self.kind == 'geometric_ratio' and (self.ratio is None or not self.ratio > 0):
            self._fail('ratio', f'Rates of kind geometric_ratio need a positive "ratio", got {self.ratio}')

        if self.nu_mode is None:
            self.nu_mode = 'recurrence' if self.kind == 'table' else 'constant_ratio'
        if self.nu_mode not in NU_MODES:
            self._fail('nu_mode', f'Unknown nu_mode "{self.nu_mode}", expected one of {", ".join(NU_MODES)}')
        if self.nu_mode == 'constant_ratio' and self.kind == 'table' and self.c is None:
            self._fail('nu_mode', 'nu_mode constant_ratio with table rates needs "c"')
        if self.nu_mode == 'table' and not self.nu_table:
            self._fail('nu_mode', 'nu_mode table needs a "nu_table:" section')
        if not self.beta > 0:
            self._fail('beta', f'"beta" needs to be positive, got {self.beta}')
        if self.c is not None and not self.c > 0:
            self._fail('c', f'"c" needs to be positive, got {self.c}')

        if (self.window_min is None) != (self.window_max is None):
            self._fail('window_min', '"window_min" and "window_max" need to be given together')
        if self.window_min is not None and self.window_max - self.window_min < 2:
            self._fail('window_max', f'Window [{self.window_min}, {self.window_max}] needs at least 3 states')
        if not self.t_max > 0:
            self._fail('t_max', f'"t_max" needs to be positive, got {self.t_max}')
        if self.grid_points < 2:
            self._fail('grid_points', f'"grid_points" needs to be at least 2, got {self.grid_points}')
        if not 1e-13 <= self.rel_tol <= 1e-6:
            self._fail('rel_tol', f'"rel_tol" needs to be in [1e-13, 1e-6], got {self.rel_tol}')
        for key in ('trials', 'bins', 'threads'):
            if getattr(self, key) < 1:
                self._fail(key, f'"{key}" needs to be at least 1, got {getattr(self, key)}')
        if self.horizon is not None and not self.horizon > 0:
            self._fail('horizon', f'"horizon" needs to be positive, got {self.horizon}')

    def _fail(self, key, message):
        raise ConfigError(message, line=self.lines.get(key), path=self.path, key=key)

    def location(self, key: str) -> str:
        """path:line of a key, for error context"""
        parts = [self.path or '<config>']
        if key in self.lines:
            parts.append(str(self.lines[key]))
        return ':'.join(parts)

    def with_overrides(self, **overrides) -> 'ExperimentConfig':
        """Copy with command line overrides applied, None values are ignored"""
        overrides = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **overrides) if overrides else self

    @property
    def window(self) -> Optional[StateWindow]:
        if self.window_min is None:
            return None
        return StateWindow(self.window_min, self.window_max)

    @property
    def resolved_c(self) -> Optional[float]:
        if self.c is not None:
            return self.c
        if self.kind == 'constant':
            return self.mu / self.lam
        if self.kind == 'geometric_ratio':
            return self.ratio
        return None

    def times(self) -> np.ndarray:
        return np.linspace(0, self.t_max, self.grid_points)

    def build_spec(self) -> ProcessSpec:
        if self.kind == 'constant':
            return ConstantRates(birth=self.lam, death=self.mu)
        try:
            if self.kind == 'table':
                return TableRates.from_rows(self.table)
            return GeometricRatioRates.from_rows(self.table, ratio=self.ratio)
        except RateValidationError:
            raise
        except ValueError as e:
            raise ConfigError(str(e), line=self.lines.get('table'), path=self.path, key='table') from e


def parse_config(path: str) -> ExperimentConfig:
    with open(path) as f:
        return parse_config_text(f.read(), path=path)


def parse_config_text(text: str, path: str = None) -> ExperimentConfig:
    values = {}
    lines = {}
    tables = {marker: [] for marker in MARKERS}
    section = None

    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if line.endswith(':') and '=' not in line:
            marker = line[:-1].strip()
            if marker not in MARKERS:
                raise ConfigError(f'Unknown section "{marker}", expected one of {", ".join(MARKERS)}',
                                  line=line_number, path=path, key=marker)
            if marker in lines:
                raise ConfigError(f'Duplicate section "{marker}", first defined on line {lines[marker]}',
                                  line=line_number, path=path, key=marker)
            section = marker
            lines[marker] = line_number
            continue
        if '=' in line:
            section = None
            key, value = (part.strip() for part in line.split('=', 1))
            if key not in KEYS:
                raise ConfigError(f'Unknown key "{key}"', line=line_number, path=path, key=key)
            if key in lines:
                raise ConfigError(f'Duplicate key "{key}", first defined on line {lines[key]}',
                                  line=line_number, path=path, key=key)
            name, type_ = KEYS[key]
            values[name] = _convert(key, value, type_, line_number, path)
            lines[key] = line_number
            continue
        if section is None:
            raise ConfigError(f'Expected "key = value" or a section marker, got "{line}"', line=line_number, path=path)
        tables[section].append(_parse_row(line, section, line_number, path))

    if tables['table']:
        values['table'] = tables['table']
    if tables['nu_table']:
        if any(len(row) != 2 for row in tables['nu_table']):
            raise ConfigError('Rows of "nu_table" need 2 fields: n nu', line=lines['nu_table'], path=path,
                              key='nu_table')
        values['nu_table'] = tables['nu_table']
    return ExperimentConfig(path=path, lines=lines, **values)


def _convert(key, value, type_, line_number, path):
    if not value:
        raise ConfigError(f'Missing value for key "{key}"', line=line_number, path=path, key=key)
    if type_ is str:
        return value
    try:
        if type_ is int:
            return int(value)
        return float(value)
    except ValueError:
        type_name = 'an integer' if type_ is int else 'a number'
        raise ConfigError(f'Value of "{key}" needs to be {type_name}, got "{value}"',
                          line=line_number, path=path, key=key) from None


def _parse_row(line, section, line_number, path) -> Tuple:
    parts = line.split()
    try:
        return (int(parts[0]), *(float(part) for part in parts[1:]))
    except ValueError:
        raise ConfigError(f'Invalid row in "{section}": "{line}"', line=line_number, path=path,
                          key=section) from None


def read_process_spec(path: str) -> ProcessSpec:
    return parse_config(path).build_spec()


def format_process_spec(spec: ProcessSpec) -> str:
    """Config text defining the rates of spec, readable by read_process_spec"""
    if isinstance(spec, ConstantRates):
        return f'kind = constant\nlambda = {format_float(spec.birth)}\nmu = {format_float(spec.death)}\n'
    if isinstance(spec, GeometricRatioRates):
        rows = [f'{n} {format_float(b)}' for n, b in zip(spec.window.states.tolist(), spec.births)]
        return f'kind = geometric_ratio\nratio = {format_float(spec.ratio)}\ntable:\n' + '\n'.join(rows) + '\n'
    if isinstance(spec, TableRates):
        rows = [f'{n} {format_float(b)} {format_float(d)}' for n, b, d in spec.rows()]
        return 'kind = table\ntable:\n' + '\n'.join(rows) + '\n'
    raise NotImplementedError(f'Cannot format rates of kind {spec.kind}')


def write_csv(df: pd.DataFrame, output: Union[str, TextIO, None] = None):
    df.to_csv(output if output is not None else sys.stdout, index=False, float_format='%.17g')
