"""Closed forms for the constant-rate bilateral process and its transformed counterpart.

p_{k,n}(t) = exp(-(lambda + mu) t) (lambda / mu)^((n - k) / 2) I_{n-k}(2 t sqrt(lambda mu))
g_{k,s}(t) = |s - k| / t * p_{k,s}(t)

All evaluations go through log(exp(-x) I_k(x)) so that nothing overflows for large t.
"""
import math
from dataclasses import dataclass
from typing import Tuple, Optional

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln

from bdsim.common.errors import BesselAccuracyError, DomainError, UnsupportedRatesError
from bdsim.similarity.methods.crossing import CrossingEstimate, ANALYTIC, NUMERIC
from bdsim.similarity.methods.transform import closed_form_nu

# Series terms are summed until the next one drops below this fraction of the partial sum
BESSEL_REL_EPS = 1e-16
BESSEL_MAX_TERMS = 100_000

# Above this argument only the exponentially scaled product is available
BESSEL_UNSCALED_MAX_ARGUMENT = 600

# exp() underflows to zero below this
_LOG_TINY = -745.0

QUAD_ABS_TOL = 1e-10
QUAD_MAX_HORIZON = 1e4
QUAD_TAIL_DECAY = 50


@dataclass(frozen=True)
class BesselEval:
    order: int
    argument: float
    value: float
    # log of exp(-x) I_k(x), -inf when it underflows
    log_scaled: float
    terms_used: int
    # bound on the relative size of the neglected series tail
    truncation_bound: float
    scaled: bool


def evaluate_bessel(k: int, two_z: float, scaled: bool = False) -> BesselEval:
    """Modified Bessel function of the first kind of integer order from its power series

    I_k(2z) = sum_j z^(k + 2j) / (j! (k + j)!)

    Terms are summed outward from the largest one, relative to it, so only the logarithm of
    the largest term needs the gamma function.
    """
    if not two_z >= 0:
        raise DomainError(f'Bessel argument needs to be nonnegative, got {two_z}')
    m = abs(int(k))
    x = float(two_z)
    if not scaled and x >= BESSEL_UNSCALED_MAX_ARGUMENT:
        raise DomainError(f'Unscaled I_k({x}) is only available below {BESSEL_UNSCALED_MAX_ARGUMENT}, '
                          f'use the exponentially scaled product')
    # x / 2 underflows for the smallest subnormals
    if x / 2 == 0:
        value = 1.0 if m == 0 else 0.0
        return BesselEval(order=int(k), argument=x, value=value, log_scaled=0.0 if m == 0 else -math.inf,
                          terms_used=1, truncation_bound=0.0, scaled=scaled)

    log_scaled, terms, bound = _log_scaled_series(m, x / 2)
    log_value = log_scaled if scaled else log_scaled + x
    value = math.exp(log_value) if log_value > _LOG_TINY else 0.0
    return BesselEval(order=int(k), argument=x, value=value, log_scaled=log_scaled,
                      terms_used=terms, truncation_bound=bound, scaled=scaled)


def _log_scaled_series(m: int, z: float) -> Tuple[float, int, float]:
    z2 = z * z
    # largest term: first j with ratio z^2 / ((j + 1) (m + j + 1)) below one
    peak = max(0, math.ceil((-(m + 2) + math.sqrt(m * m + 4 * z2)) / 2))
    while peak > 0 and z2 / (peak * (m + peak)) < 1:
        peak -= 1
    while z2 / ((peak + 1) * (m + peak + 1)) >= 1:
        peak += 1
    log_peak = (m + 2 * peak) * math.log(z) - float(gammaln(peak + 1) + gammaln(m + peak + 1))

    total = 1.0
    terms = 1
    # upwards from the peak, ratios are below one and decreasing
    term = 1.0
    j = peak
    bound = 0.0
    while True:
        ratio = z2 / ((j + 1) * (m + j + 1))
        term *= ratio
        j += 1
        terms += 1
        total += term
        if term < BESSEL_REL_EPS * total:
            bound = term * ratio / (1 - ratio) / total
            break
        if terms > BESSEL_MAX_TERMS:
            raise BesselAccuracyError(f'Series for I_{m}({2 * z}) did not converge in {BESSEL_MAX_TERMS} terms')
    # downwards to j = 0
    term = 1.0
    j = peak
    while j > 0:
        term *= (j * (m + j)) / z2
        j -= 1
        terms += 1
        total += term
        if term < BESSEL_REL_EPS * total:
            break
        if terms > BESSEL_MAX_TERMS:
            raise BesselAccuracyError(f'Series for I_{m}({2 * z}) did not converge in {BESSEL_MAX_TERMS} terms')
    return log_peak + math.log(total) - 2 * z, terms, bound


def bessel_i(k: int, two_z: float) -> float:
    """I_k(two_z), for arguments below BESSEL_UNSCALED_MAX_ARGUMENT"""
    return evaluate_bessel(k, two_z, scaled=False).value


def bessel_ive(k: int, two_z: float) -> float:
    """exp(-two_z) I_k(two_z)"""
    return evaluate_bessel(k, two_z, scaled=True).value


def transition_prob_const(lam: float, mu: float, k: int, n: int, t: float) -> float:
    if t < 0:
        raise DomainError(f'Time needs to be nonnegative, got {t}')
    if t == 0:
        return 1.0 if k == n else 0.0
    return math.exp(_log_transition_const(lam, mu, k, n, t))


def _log_transition_const(lam, mu, k, n, t) -> float:
    x = 2 * t * math.sqrt(lam * mu)
    log_ive = evaluate_bessel(n - k, x, scaled=True).log_scaled
    # -(lambda + mu) t + x
    decay = -t * (math.sqrt(lam) - math.sqrt(mu)) ** 2
    return decay + 0.5 * (n - k) * (math.log(lam) - math.log(mu)) + log_ive


def fpt_density_const(lam: float, mu: float, k: int, s: int, t: float) -> float:
    if k == s:
        raise DomainError(f'First-passage-time density is undefined for k = s = {k}')
    if not t > 0:
        raise DomainError(f'First-passage-time density needs t > 0, got {t}')
    return abs(s - k) / t * transition_prob_const(lam, mu, k, s, t)


def fpt_density_const_limit(lam: float, mu: float, k: int, s: int) -> float:
    """Continuous extension of the first-passage-time density at t = 0"""
    if s - k == 1:
        return float(lam)
    if s - k == -1:
        return float(mu)
    return 0.0


def fpt_density_const_grid(lam: float, mu: float, k: int, s: int, times) -> np.ndarray:
    return np.array([fpt_density_const(lam, mu, k, s, t) if t > 0 else fpt_density_const_limit(lam, mu, k, s)
                     for t in times])


def transition_prob_const_grid(lam: float, mu: float, k: int, n: int, times) -> np.ndarray:
    return np.array([transition_prob_const(lam, mu, k, n, t) for t in times])


def _check_transformable(lam: float, mu: float, beta: float):
    if lam == mu:
        raise UnsupportedRatesError('With equal birth and death rates the recurrence does not admit '
                                    'a positive non-constant solution, there is no transformed process')
    if not beta > 0:
        raise ValueError(f'beta needs to be positive, got {beta}')


def transformed_rates_const(lam: float, mu: float, beta: float, n: int) -> Tuple[float, float]:
    """Rates of the transformed constant-rate process with nu_n = 1 + beta c^n, c = mu / lambda"""
    _check_transformable(lam, mu, beta)
    c = mu / lam
    nu_prev, nu_n, nu_next = closed_form_nu(c, beta, [n - 1, n, n + 1])
    return float(lam * nu_next / nu_n), float(mu * nu_prev / nu_n)


def transformed_transition_const(lam: float, mu: float, beta: float, k: int, n: int, t: float) -> float:
    _check_transformable(lam, mu, beta)
    if t < 0:
        raise DomainError(f'Time needs to be nonnegative, got {t}')
    if t == 0:
        return 1.0 if k == n else 0.0
    c = mu / lam
    nu_k, nu_n = closed_form_nu(c, beta, [k, n])
    x = 2 * t * math.sqrt(lam * mu)
    log_ive = evaluate_bessel(n - k, x, scaled=True).log_scaled
    decay = -t * (math.sqrt(lam) - math.sqrt(mu)) ** 2
    # c^((k - n) / 2)
    drift = 0.5 * (k - n) * (math.log(mu) - math.log(lam))
    return float(nu_n / nu_k) * math.exp(decay + drift + log_ive)


def transformed_fpt_const(lam: float, mu: float, beta: float, k: int, s: int, t: float) -> float:
    if k == s:
        raise DomainError(f'First-passage-time density is undefined for k = s = {k}')
    if not t > 0:
        raise DomainError(f'First-passage-time density needs t > 0, got {t}')
    return abs(s - k) / t * transformed_transition_const(lam, mu, beta, k, s, t)


def crossing_prob_const(lam: float, mu: float, k: int, s: int) -> float:
    """Probability that the constant-rate walk started at k ever reaches s (gambler's ruin)"""
    if k == s:
        raise DomainError(f'Crossing probability is undefined for k = s = {k}')
    if s > k:
        return min(1.0, (lam / mu) ** (s - k))
    return min(1.0, (mu / lam) ** (k - s))


def crossing_estimate_const(lam: float, mu: float, k: int, s: int) -> CrossingEstimate:
    return CrossingEstimate(k=k, s=s, point=crossing_prob_const(lam, mu, k, s), provenance=ANALYTIC)


def quad_horizon(lam: float, mu: float) -> float:
    gap = (math.sqrt(lam) - math.sqrt(mu)) ** 2
    if gap == 0:
        return QUAD_MAX_HORIZON
    return min(QUAD_TAIL_DECAY / gap, QUAD_MAX_HORIZON)


def crossing_prob_quad(lam: float, mu: float, k: int, s: int, beta: Optional[float] = None) -> CrossingEstimate:
    """Ultimate crossing probability as the integral of the first-passage-time density.

    Integrates the original density, or the transformed one when beta is given, over (0, T]
    with T chosen so that the exp(-(sqrt(lambda) - sqrt(mu))^2 t) tail is negligible.
    With lambda = mu the tail is only algebraic and the result is censored at T.
    """
    if k == s:
        raise DomainError(f'Crossing probability is undefined for k = s = {k}')
    if beta is None:
        density = lambda t: fpt_density_const(lam, mu, k, s, t)
    else:
        density = lambda t: transformed_fpt_const(lam, mu, beta, k, s, t)
    horizon = quad_horizon(lam, mu)
    breaks = [0.0] + [b for b in (1.0, 10.0, 100.0, 1000.0) if b < horizon] + [horizon]
    total = 0.0
    error = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        value, abserr = quad(density, a, b, epsabs=QUAD_ABS_TOL, epsrel=0, limit=500)
        total += value
        error += abserr
    return CrossingEstimate(k=k, s=s, point=total, ci_half_width=error, horizon=horizon,
                            censored_note=lam == mu, provenance=NUMERIC)
