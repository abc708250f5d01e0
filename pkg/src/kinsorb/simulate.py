"""Monte Carlo particle tracking.

Three samplers of the position at time ``t`` and the phase there:

* ``discrete``: the ``n``-step chain with a Gaussian move on each free step;
* ``ctmc``: exact exponential holding times in continuous time;
* ``uniformized``: a Poisson clock of rate ``Lambda`` with the embedded
  chain ``I + Q / Lambda``.

Given the free occupation (step count ``K`` or time ``U``) the position is
``Normal(v U, 2 D U)``, so each sampler draws the occupation first and the
position once.  Particles are processed in fixed-size blocks, each with its
own Philox stream keyed by ``(seed, block index)``; output is therefore
identical for any number of worker threads.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Callable

import numpy as np
from scipy import stats

from .core import DiscreteParams, KineticParams, Phase, as_iota
from .errors import DomainError, ParameterError

__all__ = [
    "SampleSet",
    "EmpiricalSummary",
    "simulate_discrete",
    "simulate_ctmc",
    "simulate_uniformized",
    "empirical_summary",
    "ks_compare",
    "block_generator",
    "write_samples_csv",
    "BLOCK_SIZE",
]

BLOCK_SIZE = 1 << 16


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Simulated particles.

    ``free`` is True where the terminal phase is F.  ``occupation`` is the
    free time (continuous models) or free step count times ``dt``
    (discrete model).
    """

    positions: np.ndarray
    free: np.ndarray
    occupation: np.ndarray
    t: float
    model: str
    seed: int

    def __post_init__(self):
        if not (len(self.positions) == len(self.free) == len(self.occupation)):
            raise ValueError("positions, phases and occupation must have equal length")

    def __len__(self):
        return len(self.positions)

    @property
    def phases(self) -> np.ndarray:
        return np.where(self.free, Phase.FREE.value, Phase.ADSORBED.value)

    def select(self, phase: Phase | str) -> np.ndarray:
        phase = Phase.parse(phase)
        if phase is Phase.TOTAL:
            return self.positions
        mask = self.free if phase is Phase.FREE else ~self.free
        return self.positions[mask]


@dataclass(frozen=True)
class EmpiricalSummary:
    phase: Phase
    count: int
    fraction: float
    mean: float
    variance: float
    se_mean: float
    se_variance: float
    se_fraction: float
    histogram: tuple[np.ndarray, np.ndarray] | None = None


def block_generator(seed: int, block: int) -> np.random.Generator:
    """Independent counter-based stream for one particle block."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(ss))


def _run_blocks(N: int, seed: int, workers: int, fn: Callable[[np.random.Generator, int], tuple]):
    if N < 1:
        raise ParameterError(f"N must be at least 1, got {N!r}")
    sizes = [min(BLOCK_SIZE, N - start) for start in range(0, N, BLOCK_SIZE)]
    jobs = [(block_generator(seed, b), size) for b, size in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: fn(*job), jobs))
    else:
        parts = [fn(*job) for job in jobs]
    # block order is fixed, so concatenation is independent of scheduling
    return [np.concatenate(col) for col in zip(*parts)]


def _initial_free(rng: np.random.Generator, size: int, iota) -> np.ndarray:
    return rng.random(size) < as_iota(iota).iota_F


def _positions(rng: np.random.Generator, occ: np.ndarray, params: KineticParams) -> np.ndarray:
    return params.v * occ + np.sqrt(2.0 * params.D * occ) * rng.standard_normal(occ.size)


def simulate_discrete(dp: DiscreteParams, iota, params: KineticParams, N: int, seed: int,
                      workers: int = 1) -> SampleSet:
    """Sample the ``n``-step model: free steps each add ``Normal(v dt, 2 D dt)``."""
    a, b, n, dt = dp.a, dp.b, dp.n, dp.dt

    def block(rng, size):
        free = _initial_free(rng, size, iota)
        count = free.astype(np.int64)
        for _ in range(n - 1):
            u = rng.random(size)
            free = np.where(free, u >= a, u < b)
            count += free
        occ = count * dt
        return _positions(rng, occ, params), free, occ

    pos, free, occ = _run_blocks(N, seed, workers, block)
    return SampleSet(pos, free, occ, dp.t, f"discrete(n={n})", int(seed))


def simulate_ctmc(t: float, iota, params: KineticParams, N: int, seed: int, workers: int = 1) -> SampleSet:
    """Exact continuous-time sampling by an exponential race."""
    if not t > 0:
        raise ParameterError(f"t must be positive, got {t!r}")
    lam, mu = params.lam, params.mu

    def block(rng, size):
        free = _initial_free(rng, size, iota)
        clock = np.zeros(size)
        occ = np.zeros(size)
        active = np.arange(size)
        while active.size:
            f = free[active]
            hold = rng.exponential(1.0, active.size) / np.where(f, lam, mu)
            end = clock[active] + hold
            done = end >= t
            stay = np.where(done, t - clock[active], hold)
            occ[active] += np.where(f, stay, 0.0)
            moving = active[~done]
            clock[moving] = end[~done]
            free[moving] = ~free[moving]
            active = moving
        return _positions(rng, occ, params), free, occ

    pos, free, occ = _run_blocks(N, seed, workers, block)
    return SampleSet(pos, free, occ, float(t), "ctmc", int(seed))


def simulate_uniformized(t: float, Lambda: float, iota, params: KineticParams, N: int, seed: int,
                         workers: int = 1) -> SampleSet:
    """Sampling through a Poisson clock of rate ``Lambda >= max(lam, mu)``.

    Clock ticks are spaced ``Exp(Lambda)``; at each tick a free particle
    adsorbs with probability ``lam / Lambda`` and an adsorbed one desorbs
    with probability ``mu / Lambda``.  The last interval is cut at ``t``.
    """
    if not t > 0:
        raise ParameterError(f"t must be positive, got {t!r}")
    lam, mu = params.lam, params.mu
    if not Lambda >= max(lam, mu):
        raise ParameterError(f"Lambda={Lambda!r} must be at least max(lambda, mu)={max(lam, mu)!r}")
    p_adsorb, p_desorb = lam / Lambda, mu / Lambda

    def block(rng, size):
        free = _initial_free(rng, size, iota)
        clock = np.zeros(size)
        occ = np.zeros(size)
        active = np.arange(size)
        while active.size:
            gap = rng.exponential(1.0 / Lambda, active.size)
            end = clock[active] + gap
            done = end >= t
            f = free[active]
            occ[active] += np.where(f, np.where(done, t - clock[active], gap), 0.0)
            moving = active[~done]
            clock[moving] = end[~done]
            u = rng.random(moving.size)
            fm = free[moving]
            free[moving] = np.where(fm, u >= p_adsorb, u < p_desorb)
            active = moving
        return _positions(rng, occ, params), free, occ

    pos, free, occ = _run_blocks(N, seed, workers, block)
    return SampleSet(pos, free, occ, float(t), f"uniformized(Lambda={Lambda:g})", int(seed))


def empirical_summary(s: SampleSet, phase: Phase | str = Phase.TOTAL, bins: int | None = None) -> EmpiricalSummary:
    """Count, mean, unbiased variance and their standard errors for one phase."""
    phase = Phase.parse(phase)
    x = s.select(phase)
    n = x.size
    if n == 0:
        raise DomainError(f"no particles in phase {phase.value}")
    mean = float(x.mean())
    var = float(x.var(ddof=1)) if n > 1 else 0.0
    se_mean = math.sqrt(var / n)
    if n > 3:
        m4 = float(np.mean((x - mean) ** 4))
        se_var = math.sqrt(max(m4 - var * var * (n - 3) / (n - 1), 0.0) / n)
    else:
        se_var = float("inf")
    frac = n / len(s)
    se_frac = math.sqrt(frac * (1 - frac) / len(s))
    hist = np.histogram(x, bins=bins, density=True) if bins else None
    return EmpiricalSummary(phase, n, frac, mean, var, se_mean, se_var, se_frac, hist)


def ks_compare(a: SampleSet, b: SampleSet, phase: Phase | str = Phase.TOTAL, alpha: float = 0.01):
    """Two-sample Kolmogorov-Smirnov test on one phase.

    Returns ``(statistic, critical value at alpha, p-value)``.
    """
    xa, xb = a.select(phase), b.select(phase)
    res = stats.ks_2samp(xa, xb)
    n, m = xa.size, xb.size
    crit = math.sqrt(-0.5 * math.log(alpha / 2)) * math.sqrt((n + m) / (n * m))
    return float(res.statistic), crit, float(res.pvalue)


def write_samples_csv(s: SampleSet, dest: str | Path | IO[str]) -> None:
    own = not hasattr(dest, "write")
    fh = open(dest, "w", newline="") if own else dest
    try:
        writer = csv.writer(fh)
        writer.writerow(["position", "phase"])
        for x, ph in zip(s.positions, s.phases):
            writer.writerow([f"{x:.17e}", ph])
    finally:
        if own:
            fh.close()
