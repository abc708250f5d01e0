"""Finite-difference solver and residual checks for the coupled transport system

    dC_F/dt = D C_F'' - v C_F' - lam C_F + mu C_A
    dC_A/dt =                    lam C_F - mu C_A

Transport of ``C_F`` is advanced by Crank-Nicolson with central
differences and zero Dirichlet boundaries; exchange is integrated exactly.
The two are combined by Strang splitting (half exchange, transport, half
exchange).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .core import KineticParams, as_iota
from .density import QuadratureConfig, SingularPart, partial_density
from .errors import AccuracyError, GridError, ParameterError

__all__ = [
    "FieldPair",
    "ResidualReport",
    "default_mollifier",
    "solve",
    "residual",
    "density_fields",
    "exchange_step",
    "l1_distance",
    "write_fields_csv",
]

BOUNDARY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class FieldPair:
    """Concentrations on a uniform space grid at a sequence of times.

    ``C_F`` and ``C_A`` have shape ``(len(times), len(x))``.  Optional
    ``singular_F`` / ``singular_A`` hold, per time level, a closed-form
    piece already included in the fields; :func:`residual` differentiates
    it exactly instead of by differences.
    """

    x: np.ndarray
    times: np.ndarray
    C_F: np.ndarray
    C_A: np.ndarray
    singular_F: tuple[SingularPart | None, ...] | None = None
    singular_A: tuple[SingularPart | None, ...] | None = None

    def __post_init__(self):
        shape = (len(self.times), len(self.x))
        for name in ("C_F", "C_A"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise AccuracyError(f"{name} contains non-finite values")
            object.__setattr__(self, name, arr)

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    def mass(self) -> np.ndarray:
        """Total mass per time level."""
        return np.trapezoid(self.C_F + self.C_A, self.x, axis=1)

    def at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        idx = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[idx], t, rel_tol=1e-9, abs_tol=1e-12):
            raise KeyError(f"no snapshot at t={t!r}")
        return self.C_F[idx], self.C_A[idx]


@dataclass(frozen=True)
class ResidualReport:
    r1: float
    r2: float
    r1_rel: float
    r2_rel: float


def default_mollifier(h: float, D: float, t_end: float) -> float:
    """Width of the Gaussian standing in for the initial point mass."""
    return max(2.0 * h, 0.005 * math.sqrt(2.0 * D * t_end))


def exchange_step(CF: np.ndarray, CA: np.ndarray, lam: float, mu: float, tau: float):
    """Exact solution of the local exchange over a time ``tau``."""
    k = lam + mu
    total = CF + CA
    pi_F = mu / k
    decay = math.exp(-k * tau)
    CF_new = pi_F * total + (CF - pi_F * total) * decay
    return CF_new, total - CF_new


def _transport_matrices(n: int, h: float, dt: float, D: float, v: float):
    lower = D / h**2 + v / (2 * h)
    upper = D / h**2 - v / (2 * h)
    diag = -2 * D / h**2
    L = sparse.diags([lower * np.ones(n - 1), diag * np.ones(n), upper * np.ones(n - 1)], [-1, 0, 1], format="csc")
    eye = sparse.identity(n, format="csc")
    return splu((eye - 0.5 * dt * L).tocsc()), (eye + 0.5 * dt * L).tocsr()


def solve(params: KineticParams, init_width: float | None, grid, t_end: float, dt_pde: float,
          iota=(1.0, 0.0), snapshots: Sequence[float] | None = None) -> FieldPair:
    """Advance both concentrations from a narrow Gaussian initial pulse.

    Parameters
    ----------
    init_width : float or None
        Standard deviation of the initial Gaussian; ``None`` uses
        :func:`default_mollifier`.  The sampled pulse is scaled to unit
        mass; a width below the grid spacing triggers a RuntimeWarning.
    grid : array_like
        Uniform node positions; the two end nodes are held at zero.
    dt_pde : float
        Time step; rounded down so that ``t_end`` is hit exactly.
    snapshots : sequence of float, optional
        Times to record (nearest step); defaults to ``[0, t_end]``.

    Raises
    ------
    GridError
        If the solution reaches the boundary (``> 1e-10``) at any recorded
        time.
    """
    x = np.asarray(grid, dtype=float)
    if x.ndim != 1 or x.size < 5:
        raise GridError("grid needs at least 5 nodes")
    h = float(x[1] - x[0])
    if not np.allclose(np.diff(x), h, rtol=1e-9, atol=0):
        raise GridError("grid must be uniformly spaced")
    if not (t_end > 0 and dt_pde > 0):
        raise ParameterError("t_end and dt_pde must be positive")
    lam, mu, D, v = params.lam, params.mu, params.D, params.v
    if abs(v) * h / D > 2.0:
        warnings.warn(f"cell Peclet number {abs(v) * h / D:.3g} exceeds 2; central advection may oscillate",
                      RuntimeWarning, stacklevel=2)
    steps = int(math.ceil(t_end / dt_pde - 1e-9))
    dt = t_end / steps
    sigma0 = default_mollifier(h, D, t_end) if init_width is None else float(init_width)
    iota = as_iota(iota)
    if sigma0 < h:
        warnings.warn(f"initial width {sigma0:.3g} is below the grid spacing {h:.3g}; the pulse is under-resolved",
                      RuntimeWarning, stacklevel=2)
    pulse = np.exp(-0.5 * (x / sigma0) ** 2)
    pulse[0] = pulse[-1] = 0.0
    # unit discrete mass even when the pulse is narrower than the grid
    pulse /= np.trapezoid(pulse, x)
    CF, CA = iota.iota_F * pulse, iota.iota_A * pulse

    want = [0.0, t_end] if snapshots is None else sorted(float(s) for s in snapshots)
    record = {int(round(s / dt)): s for s in want}
    times, F_out, A_out = [], [], []

    def keep(k):
        if k in record:
            times.append(k * dt)
            F_out.append(CF.copy())
            A_out.append(CA.copy())

    lu, rhs = _transport_matrices(x.size - 2, h, dt, D, v)
    keep(0)
    for k in range(1, steps + 1):
        CF, CA = exchange_step(CF, CA, lam, mu, 0.5 * dt)
        CF[1:-1] = lu.solve(rhs @ CF[1:-1])
        CF, CA = exchange_step(CF, CA, lam, mu, 0.5 * dt)
        keep(k)
    fields = FieldPair(x, np.array(times), np.array(F_out), np.array(A_out))
    edge = max(np.abs(fields.C_F[:, [1, -2]]).max(), np.abs(fields.C_A[:, [0, -1]]).max())
    if edge > BOUNDARY_TOL:
        raise GridError(f"solution reaches the boundary ({edge:.3g} > {BOUNDARY_TOL}); widen the grid",
                        boundary_value=float(edge))
    return fields


def density_fields(params: KineticParams, iota, x, times, quad: QuadratureConfig | None = None) -> FieldPair:
    """Fourier-inverted phase-partial densities as a :class:`FieldPair`.

    Atoms (present when ``iota_A > 0``) are not representable on the grid
    and are dropped.
    """
    x = np.asarray(x, dtype=float)
    F, A, sF, sA = [], [], [], []
    for t in times:
        pf = partial_density(t, x, iota, "F", params, quad)
        pa = partial_density(t, x, iota, "A", params, quad)
        F.append(pf.values)
        A.append(pa.values)
        sF.append(pf.singular)
        sA.append(pa.singular)
    return FieldPair(x, np.asarray(times, dtype=float), np.array(F), np.array(A), tuple(sF), tuple(sA))


def _space_derivatives(x: np.ndarray, field: np.ndarray, sing: SingularPart | None, h: float):
    """Central first and second differences on interior nodes."""
    smooth = field if sing is None else field - sing(x)
    d1 = (smooth[2:] - smooth[:-2]) / (2 * h)
    d2 = (smooth[2:] - 2 * smooth[1:-1] + smooth[:-2]) / h**2
    if sing is not None:
        d1 = d1 + sing.derivative(x[1:-1], 1)
        d2 = d2 + sing.derivative(x[1:-1], 2)
    return d1, d2


def residual(fields: FieldPair, params: KineticParams, min_nodes_per_sigma: float = 5.0) -> ResidualReport:
    """Discrete L2 norms of both equations' residuals at interior space-time nodes.

    Time derivatives use central differences, so at least three equally
    spaced time levels are needed.  ``*_rel`` divide by the summed norms of
    the individual terms of each equation.

    Raises
    ------
    AccuracyError
        If the grid has fewer than ``min_nodes_per_sigma`` nodes per
        ``sqrt(2 D t)`` at the earliest time level, or the times are not
        equally spaced.
    """
    x, ts, h = fields.x, fields.times, fields.h
    if ts.size < 3:
        raise AccuracyError("need at least three time levels")
    dts = np.diff(ts)
    if not np.allclose(dts, dts[0], rtol=1e-9):
        raise AccuracyError("time levels must be equally spaced")
    dt = float(dts[0])
    sigma = math.sqrt(2 * params.D * ts[0]) if ts[0] > 0 else 0.0
    if sigma < min_nodes_per_sigma * h:
        raise AccuracyError(
            f"grid too coarse: h={h:.3g} gives {sigma / h:.2f} nodes per sigma (need {min_nodes_per_sigma})",
            h=h, sigma=sigma,
        )
    lam, mu, D, v = params.lam, params.mu, params.D, params.v
    r1_sq = r2_sq = 0.0
    n1 = np.zeros(5)
    n2 = np.zeros(3)
    for k in range(1, ts.size - 1):
        CF, CA = fields.C_F[k], fields.C_A[k]
        sF = fields.singular_F[k] if fields.singular_F else None
        dF_dt = (fields.C_F[k + 1, 1:-1] - fields.C_F[k - 1, 1:-1]) / (2 * dt)
        dA_dt = (fields.C_A[k + 1, 1:-1] - fields.C_A[k - 1, 1:-1]) / (2 * dt)
        d1, d2 = _space_derivatives(x, CF, sF, h)
        terms1 = [dF_dt, -D * d2, v * d1, lam * CF[1:-1], -mu * CA[1:-1]]
        terms2 = [dA_dt, -lam * CF[1:-1], mu * CA[1:-1]]
        r1_sq += h * dt * float(np.sum(sum(terms1) ** 2))
        r2_sq += h * dt * float(np.sum(sum(terms2) ** 2))
        n1 += h * dt * np.array([np.sum(term**2) for term in terms1])
        n2 += h * dt * np.array([np.sum(term**2) for term in terms2])
    r1, r2 = math.sqrt(r1_sq), math.sqrt(r2_sq)
    return ResidualReport(r1, r2, r1 / np.sqrt(n1).sum(), r2 / np.sqrt(n2).sum())


def l1_distance(x: np.ndarray, f: np.ndarray, g: np.ndarray) -> float:
    return float(np.trapezoid(np.abs(f - g), x))


def write_fields_csv(fields: FieldPair, dest: str | Path | IO[str]) -> None:
    own = not hasattr(dest, "write")
    fh = open(dest, "w", newline="") if own else dest
    try:
        writer = csv.writer(fh)
        writer.writerow(["t", "x", "C_F", "C_A"])
        for k, t in enumerate(fields.times):
            for j, xv in enumerate(fields.x):
                writer.writerow([f"{t:.17e}", f"{xv:.17e}", f"{fields.C_F[k, j]:.17e}", f"{fields.C_A[k, j]:.17e}"])
    finally:
        if own:
            fh.close()
