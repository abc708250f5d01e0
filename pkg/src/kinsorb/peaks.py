"""Peak counting and the Damkohler-number scan for double-peaked free profiles.

The observable is the number of prominent local maxima of the free-phase
density at time ``t`` for a particle released free.  For fixed ``t_star``
the scan looks for the largest ``Da_I`` below which every scanned value
still gives at least two peaks.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Sequence

import numpy as np
from scipy.signal import find_peaks

from .core import DiscreteParams, EngineeringParams, translate_engineering
from .density import DensityGrid, discrete_mixture_density, injected_density
from .errors import ParameterError
from .mbd import conditional_pmf

__all__ = [
    "PeakReport",
    "ScanConfig",
    "ScanResult",
    "Figure3Panel",
    "TABLE1_T_STAR",
    "TABLE1_REFERENCE",
    "FIGURE3_PANELS",
    "count_peaks",
    "profile",
    "damkohler_scan",
    "table1",
    "figure3",
    "write_table1_csv",
    "write_profile_csv",
]

log = logging.getLogger(__name__)

TABLE1_T_STAR = (1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0)
TABLE1_REFERENCE = dict(zip(TABLE1_T_STAR, (0.12, 0.43, 1.45, 1.42, 0.73, 0.45, 0.30, 0.21, 0.11, 0.07, 0.04, 0.02, 0.02)))
FIGURE3_PANELS = ((0.1, 3.6), (0.33, 3.2), (1.0, 3.0))


@dataclass(frozen=True)
class PeakReport:
    locations: np.ndarray
    heights: np.ndarray
    prominences: np.ndarray

    @property
    def count(self) -> int:
        return int(self.locations.size)


def count_peaks(d: DensityGrid | tuple[np.ndarray, np.ndarray], prominence_rel: float = 0.01) -> PeakReport:
    """Interior local maxima whose topographic prominence is at least ``prominence_rel * max``.

    A flat-topped maximum is reported at its leftmost node.
    """
    if not 0.0 <= prominence_rel < 1.0:
        raise ParameterError(f"prominence_rel must lie in [0, 1), got {prominence_rel!r}")
    x, y = (d.x, d.values) if isinstance(d, DensityGrid) else (np.asarray(d[0]), np.asarray(d[1]))
    top = float(np.max(y))
    if top <= 0:
        return PeakReport(np.empty(0), np.empty(0), np.empty(0))
    _, props = find_peaks(y, prominence=prominence_rel * top, plateau_size=1)
    idx = props["left_edges"]
    return PeakReport(x[idx], y[idx], props["prominences"])


@dataclass(frozen=True)
class ScanConfig:
    """Settings of the Damkohler scan.

    Parameters
    ----------
    R, Pe, v, L : float
        Engineering parameters; ``L`` is the length scale inside ``Da_I``
        and ``Pe``.
    n : int
        Number of time steps of the discrete model.
    injection_length : float or None
        Width of a uniform initial slug convolved into the profile; ``None``
        evaluates the profile of a point release.
    prominence_rel : float
        Peak acceptance threshold relative to the global maximum.
    nodes, width : int, float
        Grid of ``nodes`` points over ``[-width sd, v t + width sd]`` with
        ``sd = sqrt(2 D t)``.
    floor, ceiling, step, resolution : float
        Scan range, coarse step and bisection half-width.
    """

    R: float = 2.0
    Pe: float = 100.0
    v: float = 1.0
    L: float = 1.0
    n: int = 400
    injection_length: float | None = None
    prominence_rel: float = 5e-5
    nodes: int = 4000
    width: float = 6.0
    floor: float = 0.01
    ceiling: float = 2.0
    step: float = 0.01
    resolution: float = 0.005

    def __post_init__(self):
        if self.step > 0.01 + 1e-12:
            raise ParameterError("scan step must not exceed 0.01")
        if not 0 < self.floor < self.ceiling:
            raise ParameterError("need 0 < floor < ceiling")
        if self.injection_length is not None and not self.injection_length > 0:
            raise ParameterError("injection_length must be positive or None")


@dataclass(frozen=True)
class ScanResult:
    t_star: float
    Da_I_max: float | None
    monotone: bool = True
    passing_above: tuple[float, ...] = field(default_factory=tuple)
    evaluations: int = 0

    @property
    def found(self) -> bool:
        return self.Da_I_max is not None


class _Profiler:
    """Free-phase profiles at fixed ``t_star``; the occupation weights do not depend on ``Da_I``."""

    def __init__(self, t_star: float, cfg: ScanConfig):
        self.t_star = t_star
        self.cfg = cfg
        # a = lam dt = t_star / n, b = mu dt = t_star / ((R - 1) n)
        self.dp_unit = DiscreteParams(cfg.n, t_star / cfg.n, t_star / ((cfg.R - 1) * cfg.n))
        self.weights = conditional_pmf(self.dp_unit, (1.0, 0.0), "F").values

    def __call__(self, Da_I: float) -> DensityGrid:
        cfg = self.cfg
        ep = EngineeringParams(cfg.Pe, Da_I, self.t_star, cfg.R, cfg.L, cfg.v)
        params, t = translate_engineering(ep)
        dp = DiscreteParams.from_kinetic(params, t, cfg.n)
        sd = math.sqrt(2 * params.D * t)
        extra = cfg.injection_length or 0.0
        x = np.linspace(-cfg.width * sd, params.v * t + extra + cfg.width * sd, cfg.nodes)
        if cfg.injection_length:
            return injected_density(dp, x, cfg.injection_length, (1.0, 0.0), params, weights=self.weights)
        return discrete_mixture_density(dp, x, (1.0, 0.0), params, weights=self.weights)


def profile(Da_I: float, t_star: float, config: ScanConfig | None = None) -> DensityGrid:
    """Free-phase profile used by the scan at one ``(Da_I, t_star)``."""
    return _Profiler(t_star, config or ScanConfig())(Da_I)


def damkohler_scan(t_star: float, config: ScanConfig | None = None) -> ScanResult:
    """Largest ``Da_I`` such that every scanned value below it shows two or more peaks.

    The coarse grid ``floor, floor + step, ...`` locates the first failure;
    bisection then narrows the threshold to ``+/- resolution``.  Passing
    values above the first failure are reported and flag non-monotonicity.
    """
    cfg = config or ScanConfig()
    prof = _Profiler(t_star, cfg)
    evals = 0

    def double(da: float) -> bool:
        nonlocal evals
        evals += 1
        return count_peaks(prof(da), cfg.prominence_rel).count >= 2

    grid = np.round(np.arange(cfg.floor, cfg.ceiling + 0.5 * cfg.step, cfg.step), 12)
    verdicts = [double(float(da)) for da in grid]
    if not verdicts[0]:
        above = tuple(float(d) for d, ok in zip(grid, verdicts) if ok)
        return ScanResult(t_star, None, not above, above, evals)
    fails = [i for i, ok in enumerate(verdicts) if not ok]
    if not fails:
        return ScanResult(t_star, float(grid[-1]), True, (), evals)
    first = fails[0]
    lo, hi = float(grid[first - 1]), float(grid[first])
    while hi - lo > 2 * cfg.resolution:
        mid = 0.5 * (lo + hi)
        if double(mid):
            lo = mid
        else:
            hi = mid
    above = tuple(float(d) for d, ok in zip(grid[first:], verdicts[first:]) if ok)
    if above:
        log.warning("t*=%g: two peaks reappear above the threshold at Da_I=%s", t_star, above[:5])
    return ScanResult(t_star, 0.5 * (lo + hi), not above, above, evals)


def table1(t_stars: Sequence[float] = TABLE1_T_STAR, config: ScanConfig | None = None) -> list[ScanResult]:
    """Run :func:`damkohler_scan` for each ``t_star``."""
    return [damkohler_scan(ts, config) for ts in t_stars]


def write_table1_csv(results: Sequence[ScanResult], dest: str | Path | IO[str]) -> None:
    """Two-row table: ``t_star`` then ``Da_I_max`` (empty when none found)."""
    own = not hasattr(dest, "write")
    fh = open(dest, "w", newline="") if own else dest
    try:
        writer = csv.writer(fh)
        writer.writerow(["t_star"] + [f"{r.t_star:.17e}" for r in results])
        writer.writerow(["Da_I_max"] + ["" if r.Da_I_max is None else f"{r.Da_I_max:.17e}" for r in results])
    finally:
        if own:
            fh.close()


@dataclass(frozen=True)
class Figure3Panel:
    Da_I: float
    t_star: float
    x: np.ndarray
    normalized: np.ndarray
    integral: float
    peaks: PeakReport
    injected_peaks: PeakReport


def figure3(panel: tuple[float, float], config: ScanConfig | None = None,
            injected_prominence: float = 0.01) -> Figure3Panel:
    """Normalised free profile ``f / max f`` at one ``(Da_I, t_star)`` panel.

    ``peaks`` uses the scan configuration, so its count agrees with the
    scan verdict at the same point.  ``injected_peaks`` reports the count
    for a unit uniform slug at ``injected_prominence``.
    """
    cfg = config or ScanConfig()
    Da_I, t_star = panel
    d = profile(Da_I, t_star, cfg)
    inj_cfg = ScanConfig(**{**cfg.__dict__, "injection_length": cfg.injection_length or cfg.L})
    inj = profile(Da_I, t_star, inj_cfg)
    return Figure3Panel(
        Da_I=Da_I,
        t_star=t_star,
        x=d.x,
        normalized=d.values / d.values.max(),
        integral=d.total_mass(),
        peaks=count_peaks(d, cfg.prominence_rel),
        injected_peaks=count_peaks(inj, injected_prominence),
    )


def write_profile_csv(panel: Figure3Panel, dest: str | Path | IO[str]) -> None:
    own = not hasattr(dest, "write")
    fh = open(dest, "w", newline="") if own else dest
    try:
        writer = csv.writer(fh)
        writer.writerow(["x", "normalized_density"])
        for xv, f in zip(panel.x, panel.normalized):
            writer.writerow([f"{xv:.17e}", f"{f:.17e}"])
    finally:
        if own:
            fh.close()
