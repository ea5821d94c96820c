"""Quantum-jump trajectories by delay-function sampling.

Between emissions the atom follows the no-jump evolution; the waiting time
to the next jump is sampled by solving P(delay) = eps for a uniform draw
eps, i.e. by inverting the precomputed no-jump norm.  Every jump resets the
atom to its ground state, so all inter-jump segments reuse the same
NoJumpSolution and a trajectory is just its jump times.  Draws with
eps <= P(infinity) never jump again: the trajectory is trapped, with the
excitation stored in the band-gap continuum.

Reproducibility contract: trajectory ``i`` of an ensemble uses the
generator PCG64 seeded with the first 64-bit word of
SeedSequence([master_seed, i]); ensembles accumulate in fixed index order,
so (master_seed, n_traj, parameters) determine every output bit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.stats import chisquare

from .errors import AccuracyError, ParameterDomainError
from .inversion import NoJumpSolution

__all__ = [
    "TrajectoryRecord",
    "EnsembleStats",
    "PhotonStatistics",
    "DelaySampler",
    "build_delay_sampler",
    "run_trajectory",
    "ensemble_average",
    "photon_statistics",
    "trajectory_seed",
]


@dataclass(frozen=True)
class TrajectoryRecord:
    """Jump times and photon count of one realization."""

    seed: int
    jump_times: tuple
    photon_count: int
    terminated_by: str  # 'trapped' | 'horizon'


@dataclass
class EnsembleStats:
    """Seeded ensemble averages with pointwise standard errors."""

    t: np.ndarray
    mean_a: np.ndarray
    mean_b: np.ndarray
    mean_c: np.ndarray
    se_a: np.ndarray
    se_b: np.ndarray
    se_c: np.ndarray
    histogram: np.ndarray
    mean_photons: float
    n_traj: int
    master_seed: int
    non_terminated_fraction: float
    records: tuple


@dataclass
class PhotonStatistics:
    """Empirical jump-count distribution against the geometric law."""

    histogram: np.ndarray
    mean: float
    mean_se: float
    expected_mean: float
    chi2: float
    p_value: float
    k_max: int
    n_trapped: int
    non_terminated_fraction: float


class DelaySampler:
    """Inverse of the no-jump norm, P**-1, as a monotone interpolant.

    Calling with a uniform draw eps returns the waiting time, math.inf for
    eps <= P(grid end) ('never jumps'), and exactly 0.0 for eps >= 1 (the
    immediate-jump edge, P(0) = 1).  Flat stretches of P resolve to the
    earliest time.
    """

    def __init__(self, nojump: NoJumpSolution, tol: float = 1e-4):
        p = np.asarray(nojump.norm, dtype=float)
        t = np.asarray(nojump.t, dtype=float)
        rise = np.diff(p)
        if np.any(rise > tol):
            raise ParameterDomainError(
                f"no-jump norm increases by {rise.max():.3e} (> {tol:.1e}); not a survival function"
            )
        p = np.minimum.accumulate(p)  # flatten sub-tolerance wiggles
        self.p_inf = float(p[-1])
        self.t_end = float(t[-1])
        # first occurrence per unique P value = earliest time (tie-break)
        vals, first = np.unique(p, return_index=True)
        if len(vals) >= 2:
            self._inverse = PchipInterpolator(vals, t[first], extrapolate=False)
        else:
            self._inverse = None

    def __call__(self, eps: float) -> float:
        if eps >= 1.0:
            return 0.0
        if eps <= self.p_inf or self._inverse is None:
            return math.inf
        return float(np.clip(self._inverse(eps), 0.0, self.t_end))


def build_delay_sampler(nojump: NoJumpSolution, tol: float = 1e-4) -> DelaySampler:
    return DelaySampler(nojump, tol=tol)


def trajectory_seed(master_seed: int, index: int) -> int:
    """First 64-bit word of SeedSequence([master_seed, index])."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1, np.uint64)[0])


def run_trajectory(sampler: DelaySampler, nojump: NoJumpSolution,
                   horizon: float, seed: int, series: bool = True,
                   max_jumps: int = 1_000_000):
    """One seeded realization.

    Returns (record, populations) where populations is a (3, len(grid))
    array of the normalized per-trajectory populations pi0_i(t - t_jump) /
    P(t - t_jump) on the no-jump grid clipped to the horizon (None when
    ``series`` is false).  Segments that outlive the precomputed grid hold
    their final normalized values, valid once transients have decayed.
    """
    if horizon < 0:
        raise ParameterDomainError("horizon must be >= 0")
    rng = np.random.Generator(np.random.PCG64(seed))
    jump_times = []
    t_cursor = 0.0
    terminated = None
    while True:
        if len(jump_times) >= max_jumps:
            raise AccuracyError(f"exceeded {max_jumps} jumps before the horizon")
        eps = rng.random()
        delay = sampler(eps)
        if delay == math.inf:
            terminated = "trapped"
            break
        nxt = t_cursor + delay
        if nxt > horizon:
            terminated = "horizon"
            break
        if delay == 0.0:
            nxt = np.nextafter(t_cursor, math.inf)
        jump_times.append(nxt)
        t_cursor = nxt
    record = TrajectoryRecord(seed=seed, jump_times=tuple(jump_times),
                              photon_count=len(jump_times), terminated_by=terminated)
    if not series:
        return record, None
    grid = nojump.t[nojump.t <= horizon + 1e-12]
    pops = np.empty((3, len(grid)))
    starts = [0.0] + list(record.jump_times)
    ends = list(record.jump_times) + [math.inf]
    for t0, t1 in zip(starts, ends):
        i0 = int(np.searchsorted(grid, t0, side="left"))
        i1 = int(np.searchsorted(grid, t1, side="left"))
        if i1 <= i0:
            continue
        tau = grid[i0:i1] - t0
        p = np.interp(tau, nojump.t, nojump.norm)
        pops[0, i0:i1] = np.interp(tau, nojump.t, nojump.pi0_a) / p
        pops[1, i0:i1] = np.interp(tau, nojump.t, nojump.pi0_b) / p
        pops[2, i0:i1] = np.interp(tau, nojump.t, nojump.pi0_c) / p
    return record, pops


def ensemble_average(n_traj: int, master_seed: int, nojump: NoJumpSolution,
                     horizon: Optional[float] = None) -> EnsembleStats:
    """Average ``n_traj`` seeded trajectories on the common grid.

    Accumulation runs in trajectory-index order with per-index derived
    seeds, so the result is independent of any execution schedule.
    """
    if n_traj < 1:
        raise ParameterDomainError("n_traj must be >= 1")
    if horizon is None:
        horizon = float(nojump.t[-1])
    sampler = build_delay_sampler(nojump)
    grid = nojump.t[nojump.t <= horizon + 1e-12]
    acc = np.zeros((3, len(grid)))
    acc2 = np.zeros((3, len(grid)))
    records = []
    counts = []
    for i in range(n_traj):
        rec, pops = run_trajectory(sampler, nojump, horizon,
                                   trajectory_seed(master_seed, i))
        records.append(rec)
        counts.append(rec.photon_count)
        acc += pops
        acc2 += pops * pops
    mean = acc / n_traj
    if n_traj > 1:
        var = np.maximum(acc2 - n_traj * mean * mean, 0.0) / (n_traj - 1)
        se = np.sqrt(var / n_traj)
    else:
        se = np.zeros_like(mean)
    counts = np.asarray(counts)
    non_term = sum(1 for r in records if r.terminated_by == "horizon")
    return EnsembleStats(
        t=grid, mean_a=mean[0], mean_b=mean[1], mean_c=mean[2],
        se_a=se[0], se_b=se[1], se_c=se[2],
        histogram=np.bincount(counts), mean_photons=float(counts.mean()),
        n_traj=n_traj, master_seed=master_seed,
        non_terminated_fraction=non_term / n_traj, records=tuple(records),
    )


def photon_statistics(records: Sequence[TrajectoryRecord], p_inf: float,
                      k_max: int = 15) -> PhotonStatistics:
    """Jump-count histogram against the geometric law (1-P)^k * P.

    Only trapped trajectories enter the fit (a horizon-terminated count is
    censored); their fraction is reported.  The chi-square uses bins
    k = 0..k_max plus a lumped tail.
    """
    if p_inf <= 0 or p_inf > 1:
        raise ParameterDomainError("geometric comparison needs 0 < P(infinity) <= 1")
    trapped = [r.photon_count for r in records if r.terminated_by == "trapped"]
    n_trapped = len(trapped)
    non_term_frac = 1.0 - n_trapped / max(len(records), 1)
    if n_trapped < 200:
        warnings.warn(
            f"only {n_trapped} trapped trajectories; photon statistics are underpowered",
            stacklevel=2,
        )
    counts = np.asarray(trapped, dtype=int)
    hist = np.bincount(counts) if n_trapped else np.zeros(1, dtype=int)
    observed = np.zeros(k_max + 2)
    for k, c in enumerate(hist):
        observed[min(k, k_max + 1)] += c
    probs = np.array([(1.0 - p_inf) ** k * p_inf for k in range(k_max + 1)]
                     + [(1.0 - p_inf) ** (k_max + 1)])
    expected = probs * n_trapped
    if n_trapped:
        live = expected > 0  # degenerate p_inf = 1 leaves empty bins
        chi2, p_value = chisquare(observed[live], expected[live]) \
            if live.sum() > 1 else (0.0, math.nan)
        mean = float(counts.mean())
        mean_se = float(counts.std(ddof=1) / math.sqrt(n_trapped)) if n_trapped > 1 else 0.0
    else:
        chi2, p_value, mean, mean_se = math.nan, math.nan, math.nan, math.nan
    return PhotonStatistics(
        histogram=hist, mean=mean, mean_se=mean_se,
        expected_mean=1.0 / p_inf - 1.0, chi2=float(chi2), p_value=float(p_value),
        k_max=k_max, n_trapped=n_trapped, non_terminated_fraction=non_term_frac,
    )
