"""Exact stochastic simulation of bilateral birth-and-death trajectories.

Every trial draws from its own Philox stream keyed by SeedSequence(seed, spawn_key=(trial,)).
Trials are grouped into blocks that run inline or on worker processes and advance in lockstep,
so aggregated results depend only on the seed, not on block size or number of workers.
"""
import math
import sys
from dataclasses import dataclass
from functools import partial
from multiprocessing import Pool
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from bdsim.common import config
from bdsim.common.errors import DomainError, UnsupportedRatesError
from bdsim.similarity.methods.crossing import CrossingEstimate
from bdsim.similarity.methods.model import ProcessSpec, ConstantRates, GeometricRatioRates
from bdsim.similarity.methods.solver import FPTDensity

# Horizon of crossing estimates for constant ratio rates, in units of 1 / |ln(mu / lambda)|
HORIZON_DECADES = 50

# Draws taken from a trial stream at a time
DRAW_CHUNK = 256


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Jump skeleton of one path: states[i] is occupied from jump_times[i - 1] (or 0) on"""
    seed: int
    jump_times: np.ndarray
    states: np.ndarray
    t_end: float

    @property
    def num_jumps(self) -> int:
        return len(self.jump_times)

    def state_at(self, t: float) -> int:
        return int(self.states[np.searchsorted(self.jump_times, t, side='right')])

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame({
            't': np.concatenate([[0.0], self.jump_times]),
            'n': self.states
        })


@dataclass(frozen=True, eq=False)
class TransitionEstimate:
    """Empirical distribution of X_t started at k"""
    k: int
    t: float
    trials: int
    states: np.ndarray
    counts: np.ndarray
    mean_jumps: float

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.trials

    @property
    def standard_errors(self) -> np.ndarray:
        f = self.frequencies
        return np.sqrt(f * (1 - f) / self.trials)

    def frequency(self, n: int) -> float:
        matches = np.flatnonzero(self.states == n)
        return float(self.frequencies[matches[0]]) if len(matches) else 0.0

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame({
            'n': self.states,
            'count': self.counts,
            'frequency': self.frequencies,
            'standard_error': self.standard_errors
        })


def default_horizon(lam: float, mu: float) -> float:
    """50 / |ln(lambda / mu)|, long enough for crossings of a drifting walk to have happened"""
    if lam == mu:
        raise UnsupportedRatesError('Symmetric walk has no finite default horizon, set one explicitly')
    return HORIZON_DECADES / abs(math.log(lam / mu))


def default_horizon_for(spec: ProcessSpec) -> Optional[float]:
    if isinstance(spec, ConstantRates):
        return default_horizon(spec.birth, spec.death)
    if isinstance(spec, GeometricRatioRates):
        return default_horizon(1.0, spec.ratio)
    return None


def simulate_path(spec: ProcessSpec, k: int, t_end: float, seed: int = None) -> Trajectory:
    """Exact simulation: exponential holding times with rate lambda_n + mu_n,
    up with probability lambda_n / (lambda_n + mu_n)"""
    seed = config.SEED if seed is None else seed
    if not t_end > 0:
        raise DomainError(f'Simulation horizon needs to be positive, got {t_end}')
    rng = np.random.default_rng(seed)
    t = 0.0
    n = int(k)
    jump_times = []
    states = [n]
    while True:
        birth, death = spec.rates_at(n)
        total = birth + death
        t += rng.exponential(1 / total)
        if t > t_end:
            break
        n += 1 if rng.random() * total < birth else -1
        jump_times.append(t)
        states.append(n)
    return Trajectory(seed=seed, jump_times=np.array(jump_times), states=np.array(states, dtype=int), t_end=t_end)


def _block_bounds(trials: int, block_size: int):
    return [(start, min(block_size, trials - start)) for start in range(0, trials, block_size)]


def _trial_stream(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(trial,))))


def _run_block(bounds: Tuple[int, int], spec: ProcessSpec, k: int, t_end: float, target: Optional[int],
               seed: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Advance every trial of one block until t_end, or until it hits target.

    Returns the final states, the first hitting times (nan when not hit) and the jump counts.
    """
    start, size = bounds
    streams = [_trial_stream(seed, trial) for trial in range(start, start + size)]
    # pre-drawn unit exponentials and uniforms, refilled per trial DRAW_CHUNK at a time
    waits = np.empty((size, DRAW_CHUNK))
    uniforms = np.empty((size, DRAW_CHUNK))
    used = np.full(size, DRAW_CHUNK)

    states = np.full(size, int(k), dtype=np.int64)
    times = np.zeros(size)
    hit_times = np.full(size, np.nan)
    jumps = np.zeros(size, dtype=np.int64)
    alive = np.arange(size) if t_end > 0 else np.arange(0)
    while len(alive):
        for i in alive[used[alive] == DRAW_CHUNK]:
            waits[i] = streams[i].exponential(size=DRAW_CHUNK)
            uniforms[i] = streams[i].random(DRAW_CHUNK)
            used[i] = 0
        columns = used[alive]
        used[alive] += 1
        births, deaths = spec.rates(states[alive])
        total = births + deaths
        new_times = times[alive] + waits[alive, columns] / total
        ups = uniforms[alive, columns] * total < births
        jumping = new_times <= t_end
        alive = alive[jumping]
        states[alive] += np.where(ups[jumping], 1, -1)
        times[alive] = new_times[jumping]
        jumps[alive] += 1
        if target is not None:
            hit = states[alive] == target
            hit_times[alive[hit]] = times[alive[hit]]
            alive = alive[~hit]
    return states, hit_times, jumps


def _run_blocks(spec: ProcessSpec, k: int, t_end: float, target: Optional[int], trials: int, seed: int,
                threads: int, block_size: int, verbose: bool, desc: str):
    blocks = _block_bounds(trials, block_size)
    worker = partial(_run_block, spec=spec, k=k, t_end=t_end, target=target, seed=seed)
    if threads == 1:
        results = list(tqdm(map(worker, blocks), total=len(blocks), desc=desc,
                            disable=not verbose, file=sys.stderr))
    else:
        with Pool(threads) as pool:
            results = list(tqdm(pool.imap(worker, blocks), total=len(blocks), desc=desc,
                                disable=not verbose, file=sys.stderr))
    states, hit_times, jumps = zip(*results)
    return np.concatenate(states), np.concatenate(hit_times), np.concatenate(jumps)


def _check_trials(trials: int):
    if trials is None or trials < 1:
        raise ValueError(f'Number of trials needs to be at least 1, got {trials}')


def estimate_transition(spec: ProcessSpec, k: int, t: float, trials: int = None, seed: int = None,
                        threads: int = None, block_size: int = None, verbose: bool = False) -> TransitionEstimate:
    trials = config.TRIALS if trials is None else trials
    seed = config.SEED if seed is None else seed
    _check_trials(trials)
    if t < 0:
        raise DomainError(f'Time needs to be nonnegative, got {t}')
    final_states, _, jumps = _run_blocks(
        spec, k, t, target=None, trials=trials, seed=seed,
        threads=threads or config.THREADS, block_size=block_size or config.BLOCK_SIZE,
        verbose=verbose, desc='Simulating'
    )
    states, counts = np.unique(final_states, return_counts=True)
    return TransitionEstimate(k=int(k), t=float(t), trials=trials, states=states, counts=counts,
                              mean_jumps=float(jumps.mean()))


def estimate_fpt(spec: ProcessSpec, k: int, s: int, t_end: float, trials: int = None, bins: int = None,
                 seed: int = None, threads: int = None, block_size: int = None,
                 verbose: bool = False) -> Tuple[FPTDensity, CrossingEstimate]:
    """Histogram of first hitting times of s, censored at t_end.

    The histogram is normalized by the number of trials so that it integrates to the
    fraction of trials that hit s, not to 1.
    """
    trials = config.TRIALS if trials is None else trials
    bins = config.BINS if bins is None else bins
    seed = config.SEED if seed is None else seed
    if k == s:
        raise DomainError(f'First-passage time is undefined for k = s = {k}')
    _check_trials(trials)
    if bins < 1:
        raise ValueError(f'Number of bins needs to be at least 1, got {bins}')
    if not t_end > 0:
        raise DomainError(f'Simulation horizon needs to be positive, got {t_end}')

    _, hit_times, _ = _run_blocks(
        spec, k, t_end, target=s, trials=trials, seed=seed,
        threads=threads or config.THREADS, block_size=block_size or config.BLOCK_SIZE,
        verbose=verbose, desc='Simulating'
    )
    hit_times = hit_times[~np.isnan(hit_times)]
    counts, edges = np.histogram(hit_times, bins=bins, range=(0, t_end))
    width = edges[1] - edges[0]
    hits = len(hit_times)
    fpt = FPTDensity(
        k=int(k),
        s=int(s),
        times=(edges[:-1] + edges[1:]) / 2,
        density=counts / (trials * width),
        absorbed_mass=np.cumsum(counts) / trials,
        censored_mass=1 - hits / trials
    )
    return fpt, CrossingEstimate.from_hits(k=int(k), s=int(s), hits=hits, trials=trials, horizon=float(t_end))
