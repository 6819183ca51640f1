import math
from dataclasses import dataclass
from typing import Optional

import pandas as pd

ANALYTIC = 'analytic'
NUMERIC = 'numeric'
MONTE_CARLO = 'monte_carlo'
PROVENANCES = (ANALYTIC, NUMERIC, MONTE_CARLO)

# two-sided 95% normal quantile
CI_Z = 1.96


@dataclass(frozen=True)
class CrossingEstimate:
    """Estimate of the ultimate crossing probability P_{k,s}, the probability of ever reaching s from k"""
    k: int
    s: int
    point: float
    provenance: str
    ci_half_width: float = 0.0
    hits: Optional[int] = None
    trials: Optional[int] = None
    horizon: Optional[float] = None
    # the estimate only counts crossings up to the horizon and lower-bounds the true probability
    censored_note: bool = False

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f'Unknown provenance "{self.provenance}", expected one of {PROVENANCES}')

    @classmethod
    def from_hits(cls, k: int, s: int, hits: int, trials: int, horizon: float) -> 'CrossingEstimate':
        if trials < 1:
            raise ValueError(f'Number of trials needs to be at least 1, got {trials}')
        point = hits / trials
        return cls(
            k=k,
            s=s,
            point=point,
            provenance=MONTE_CARLO,
            ci_half_width=CI_Z * math.sqrt(point * (1 - point) / trials),
            hits=int(hits),
            trials=int(trials),
            horizon=horizon,
            censored_note=True
        )

    @property
    def censored_fraction(self) -> float:
        """Fraction of mass that did not reach s (within the horizon for censored estimates)"""
        return 1 - self.point

    @property
    def ci(self):
        return self.point - self.ci_half_width, self.point + self.ci_half_width

    def to_series(self) -> pd.Series:
        return pd.Series({
            'k': self.k,
            's': self.s,
            'point': self.point,
            'ci_half_width': self.ci_half_width,
            'censored_fraction': self.censored_fraction,
            'hits': self.hits,
            'trials': self.trials,
            'horizon': self.horizon,
            'censored': self.censored_note,
            'provenance': self.provenance
        })

    def to_dataframe(self) -> pd.DataFrame:
        return self.to_series().to_frame().T

    def __str__(self):
        text = f'P({self.k} -> {self.s}) = {self.point:.6g}'
        if self.ci_half_width:
            text += f' ± {self.ci_half_width:.2g}'
        if self.hits is not None:
            text += f' ({self.hits}/{self.trials} hits'
            text += f' by t = {self.horizon:g})' if self.horizon is not None else ')'
        if self.censored_note:
            text += ', censored lower bound'
        return f'{text} [{self.provenance}]'
