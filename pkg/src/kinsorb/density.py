"""Position densities.

Continuous time
    The phase-partial characteristic function behaves like
    ``atom + c1 / z + c2 / z^2 + O(u^-6)`` for large ``u``.  Before inversion
    the atom and the terms ``c1 / (z + s) + c2' / (z + s)^2`` are removed;
    both have closed-form inverses (:class:`SingularPart`), two-sided
    exponentials with a slope kink at the origin.  The smooth remainder is
    inverted by a direct trapezoidal Fourier sum.

Discrete time
    ``S_n`` given the occupation count ``K = j`` is Gaussian with mean
    ``j v dt`` and variance ``2 j D dt``, so the density is a finite mixture
    with weights from :mod:`kinsorb.mbd`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import IO

import numpy as np
from scipy.special import ndtr

from .cf import cf_partial, exponent, tail_coefficient, tail_crossover
from .core import DiscreteParams, KineticParams, Phase, as_iota, state_prob_continuous
from .errors import DomainError, GridError, ParameterError, QuadratureError
from .mbd import conditional_pmf, pmf
from .moments import moments_discrete, moments_limit

__all__ = [
    "DensityGrid",
    "PartialDensityGrid",
    "QuadratureConfig",
    "default_grid",
    "invert_cf",
    "partial_density",
    "discrete_mixture_density",
    "injected_density",
    "write_density_csv",
]

NEG_RIPPLE = 1e-6


def _exp_poly_integrals(rho: float, a: float, b: float, m_max: int) -> list[float]:
    """``int_a^b x^m exp(rho x) dx`` for ``m = 0..m_max`` (``rho != 0``)."""
    ea, eb = math.exp(rho * a), math.exp(rho * b)
    out = [(eb - ea) / rho]
    for m in range(1, m_max + 1):
        out.append((b**m * eb - a**m * ea) / rho - m / rho * out[-1])
    return out


@dataclass(frozen=True)
class SingularPart:
    """Closed-form piece ``c1 g_s + c2 h_s`` of a density.

    ``g_s`` and ``h_s`` are the inverse Fourier transforms of
    ``1 / (z + s)`` and ``1 / (z + s)^2``.  Both are two-sided exponentials
    decaying at rate ``rho_plus`` to the left of 0 and ``rho_minus`` to the
    right, so their slopes jump at the origin.
    """

    c1: float
    c2: float
    s: float
    D: float
    v: float

    @property
    def q(self) -> float:
        return math.sqrt(self.v**2 + 4 * self.D * self.s)

    @property
    def rho_plus(self) -> float:
        return (self.v + self.q) / (2 * self.D)

    @property
    def rho_minus(self) -> float:
        return (self.v - self.q) / (2 * self.D)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        q = self.q
        g = np.where(x < 0, np.exp(self.rho_plus * np.minimum(x, 0)), np.exp(self.rho_minus * np.maximum(x, 0))) / q
        h = g * (2 * self.D / q**2 + np.abs(x) / q)
        return self.c1 * g + self.c2 * h

    def derivative(self, x: np.ndarray, order: int) -> np.ndarray:
        """Exact first or second derivative; at ``x = 0`` the one-sided mean."""
        x = np.asarray(x, dtype=float)
        q, D = self.q, self.D
        a = 2 * D / q**2

        def side(rho, sgn, xs):
            g = np.exp(rho * xs) / q
            base = a + sgn * xs / q
            if order == 1:
                return self.c1 * rho * g + self.c2 * (rho * g * base + g * sgn / q)
            if order == 2:
                return self.c1 * rho**2 * g + self.c2 * (rho**2 * g * base + 2 * rho * g * sgn / q)
            raise ValueError("order must be 1 or 2")

        left = side(self.rho_plus, -1.0, np.minimum(x, 0.0))
        right = side(self.rho_minus, 1.0, np.maximum(x, 0.0))
        return np.where(x < 0, left, np.where(x > 0, right, 0.5 * (left + right)))

    def power_integrals(self, a: float, b: float) -> np.ndarray:
        """``int_a^b x^m (c1 g + c2 h) dx`` for ``m = 0, 1, 2``, exactly."""
        q, D = self.q, self.D
        out = np.zeros(3)
        for lo, hi, rho, sign in ((a, min(b, 0.0), self.rho_plus, -1.0), (max(a, 0.0), b, self.rho_minus, 1.0)):
            if hi <= lo:
                continue
            I = _exp_poly_integrals(rho, lo, hi, 3)
            for m in range(3):
                g_m = I[m] / q
                h_m = (2 * D / q**2) * I[m] / q + sign * I[m + 1] / q**2
                out[m] += self.c1 * g_m + self.c2 * h_m
        return out

    def scaled(self, factor: float) -> "SingularPart":
        return replace(self, c1=self.c1 * factor, c2=self.c2 * factor)


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Density values on a uniform grid plus a point mass at ``x = 0``.

    ``values`` keep any small negative quadrature ripple; :meth:`clamped`
    removes it for output.  When ``singular`` is set, ``values`` include
    that closed-form piece, and grid integrals treat it exactly while the
    smooth rest uses the trapezoid rule.
    """

    x: np.ndarray
    values: np.ndarray
    atom_weight: float
    phase: Phase
    t: float
    singular: SingularPart | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if x.shape != values.shape or x.ndim != 1 or x.size < 3:
            raise GridError("x and values must be equal-length 1-d arrays with >= 3 nodes")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", values)

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    def _power_integrals(self) -> np.ndarray:
        x = self.x
        smooth = self.values
        exact = np.zeros(3)
        if self.singular is not None:
            smooth = smooth - self.singular(x)
            exact = self.singular.power_integrals(x[0], x[-1])
        return np.array([np.trapezoid(x**m * smooth, x) for m in range(3)]) + exact

    def integral(self) -> float:
        """Mass of the continuous part over the grid."""
        return float(self._power_integrals()[0])

    def total_mass(self) -> float:
        return self.integral() + self.atom_weight

    def clamped(self) -> np.ndarray:
        return np.where(self.values < 0.0, 0.0, self.values)

    def moments(self) -> tuple[float, float]:
        """Mean and variance including the atom (which sits at 0)."""
        m0, m1, m2 = self._power_integrals()
        mass = m0 + self.atom_weight
        mean = m1 / mass
        return float(mean), float(m2 / mass - mean * mean)

    def scaled(self, factor: float) -> "DensityGrid":
        sing = None if self.singular is None else self.singular.scaled(factor)
        return replace(self, values=self.values * factor, atom_weight=self.atom_weight * factor, singular=sing)


@dataclass(frozen=True, eq=False)
class PartialDensityGrid(DensityGrid):
    """Phase-partial density; integrates (with atom) to ``P(Y(t) = tau)``."""

    probability: float = 1.0


@dataclass(frozen=True)
class QuadratureConfig:
    """Controls for Fourier inversion.

    Parameters
    ----------
    tol : float
        Target absolute error of the density from truncating the frequency
        integral.
    u_max : float, optional
        Fixed truncation radius; chosen adaptively when omitted.
    du : float, optional
        Frequency step; derived from the grid extent when omitted.
    mollifier : float
        Standard deviation of a Gaussian the result is convolved with (0 for
        none).  When positive the atom is spread into the density.
    u_cap : float
        Largest radius the adaptive search may reach.
    chunk : int
        Grid nodes per vectorised block.
    """

    tol: float = 1e-9
    u_max: float | None = None
    du: float | None = None
    mollifier: float = 0.0
    u_cap: float = 1e6
    chunk: int = 256

    def __post_init__(self):
        if not self.tol > 0:
            raise ParameterError("tol must be positive")
        if self.mollifier < 0:
            raise ParameterError("mollifier width must be nonnegative")


def default_grid(t: float, iota, phase: Phase | str, params: KineticParams, nodes: int = 2001,
                 width: float = 8.0, dp: DiscreteParams | None = None, L: float = 0.0) -> np.ndarray:
    """Uniform grid spanning ``mean +/- width * sd`` of the phase, always containing 0."""
    phase = Phase.parse(phase)
    if dp is not None:
        ms = moments_discrete(dp, iota, phase, params)
    else:
        ms = moments_limit(t, iota, phase, params)
    mean = ms.mean + 0.5 * L
    sd = math.sqrt(ms.variance + L * L / 12.0)
    sd = max(sd, math.sqrt(2 * params.D * t) / 4)
    lo = min(mean - width * sd, -0.25 * width * sd)
    hi = max(mean + width * sd, L + 0.25 * width * sd)
    return np.linspace(lo, hi, int(nodes))


def _fourier_sum(x: np.ndarray, u: np.ndarray, weights: np.ndarray, chunk: int) -> np.ndarray:
    """``(1/pi) Re sum_k w_k exp(-i u_k x)``, blocked over ``x`` in a fixed order."""
    out = np.empty_like(x)
    for start in range(0, x.size, chunk):
        xs = x[start:start + chunk]
        phase = np.exp(-1j * np.outer(xs, u))
        out[start:start + chunk] = (phase @ weights).real / math.pi
    return out


def _partial_inverse(t: float, x: np.ndarray, iota, phase: Phase, params: KineticParams,
                     quad: QuadratureConfig) -> tuple[np.ndarray, float, SingularPart | None]:
    """Phase-partial density on ``x``, its atom and its closed-form singular piece."""
    atom, c1, c2 = tail_coefficient(t, iota, phase, params)
    D, v = params.D, params.v
    sigma0 = quad.mollifier

    # frequency step from the aliasing period
    ms = moments_limit(t, iota, phase, params)
    sd = math.sqrt(ms.variance) + math.sqrt(2 * D * t) + sigma0
    lo = min(x[0], ms.mean - 12 * sd, -4 * sd)
    hi = max(x[-1], ms.mean + 12 * sd, 4 * sd)
    hull = hi - lo
    du = quad.du if quad.du is not None else 2 * math.pi / (2.0 * hull)

    sing = None
    if sigma0 > 0:
        decay = 2

        def remainder(u):
            return cf_partial(t, u, iota, phase, params) * np.exp(-0.5 * (sigma0 * u) ** 2)
    else:
        # s large enough that the kernels die out well inside the period
        k = 40.0 / hull
        s = D * k * k + abs(v) * k
        sing = SingularPart(c1, c2 + c1 * s, s, D, v)
        decay = 6

        def remainder(u):
            zs = exponent(u, params) + s
            return cf_partial(t, u, iota, phase, params) - atom - sing.c1 / zs - sing.c2 / zs**2

    if quad.u_max is not None:
        u_max = quad.u_max
    else:
        u_max = max(tail_crossover(t, params), 8.0 / (sd if sigma0 == 0 else sigma0), 10 * du)
        while True:
            probe = np.linspace(u_max, 1.25 * u_max, 33)
            peak = np.max(np.abs(remainder(probe)))
            if decay == 2:
                # Gaussian tail: int_U^inf exp(-a u^2) <= exp(-a U^2) / (2 a U)
                tail = peak / (sigma0**2 * u_max) / math.pi
            else:
                tail = peak * u_max / (decay - 1) / math.pi
            if tail <= quad.tol:
                break
            u_max *= 1.5
            if u_max > quad.u_cap:
                raise QuadratureError(
                    "truncation radius exceeds cap; loosen tol or raise u_cap",
                    suggested_radius=u_max, tail_estimate=tail,
                )
    nodes = int(math.ceil(u_max / du))
    u = du * np.arange(nodes + 1)
    r = remainder(u)
    # the sum below uses Hermitian symmetry, so f's imaginary part is zero by construction
    check = remainder(-u[1:4])
    if np.max(np.abs(check - np.conj(r[1:4]))) > 1e-9:
        raise QuadratureError("characteristic function is not Hermitian; imaginary residue")
    w = r * du
    w[0] *= 0.5
    dens = _fourier_sum(x, u, w, quad.chunk)
    if sing is None:
        return dens, 0.0, None
    return dens + sing(x), atom, sing


def _check_ripple(values: np.ndarray, scale: float):
    low = values.min()
    if low < -NEG_RIPPLE * max(scale, 1.0):
        raise QuadratureError(
            f"negative density ripple {low:.3g}; refine quadrature (smaller tol or larger grid)",
            min_value=float(low),
        )


def partial_density(t: float, grid, iota, phase: Phase | str, params: KineticParams,
                    quad: QuadratureConfig | None = None) -> PartialDensityGrid:
    """Phase-partial density ``P(S(t) in dx, Y(t) = tau) / dx``.

    For ``total`` this is the unconditional density.  The partial atom at 0
    is ``iota_A exp(-mu t)`` for ``A`` and ``total``.
    """
    if not t > 0:
        raise ParameterError(f"t must be positive, got {t!r}")
    phase = Phase.parse(phase)
    quad = quad or QuadratureConfig()
    x = np.asarray(grid, dtype=float)
    if x.ndim != 1 or x.size < 3:
        raise GridError("grid must be a 1-d array of at least 3 nodes")
    if not np.allclose(np.diff(x), x[1] - x[0], rtol=1e-9, atol=0):
        raise GridError("grid must be uniformly spaced")
    values, atom, sing = _partial_inverse(t, x, iota, phase, params, quad)
    _check_ripple(values, 1.0)
    prob = 1.0 if phase is Phase.TOTAL else state_prob_continuous(t, params, iota, phase)
    return PartialDensityGrid(x, values, atom, phase, float(t), sing, prob)


def invert_cf(t: float, grid, iota, phase: Phase | str, params: KineticParams,
              quad: QuadratureConfig | None = None) -> DensityGrid:
    """Density of ``S(t)`` given ``Y(t) = tau`` (or unconditional for ``total``).

    Parameters
    ----------
    grid : array_like or None
        Uniform evaluation grid; ``None`` selects :func:`default_grid`.

    Returns
    -------
    DensityGrid
        Continuous part plus ``atom_weight`` at 0.  For ``A`` the atom
        weight equals :func:`kinsorb.cf.atom_weight`.
    """
    phase = Phase.parse(phase)
    if grid is None:
        grid = default_grid(t, iota, phase, params)
    part = partial_density(t, grid, iota, phase, params, quad)
    if part.probability <= 0:
        raise DomainError(f"P(Y(t) = {phase.value}) = 0")
    inv = 1.0 / part.probability
    sing = None if part.singular is None else part.singular.scaled(inv)
    return DensityGrid(part.x, part.values * inv, part.atom_weight * inv, phase, part.t, sing)


def _gauss_mixture(x: np.ndarray, weights: np.ndarray, dp: DiscreteParams, params: KineticParams,
                   L: float, chunk: int = 64) -> tuple[np.ndarray, float]:
    """Mixture over ``j >= 1`` of ``N(j v dt, 2 j D dt)``, optionally convolved with ``U[0, L]``."""
    j = np.nonzero(weights[1:] > 0.0)[0] + 1
    w = weights[j]
    mean = j * params.v * dp.dt
    sd = np.sqrt(2.0 * j * params.D * dp.dt)
    out = np.zeros_like(x)
    for start in range(0, j.size, chunk):
        sl = slice(start, start + chunk)
        m, s, ww = mean[sl, None], sd[sl, None], w[sl, None]
        if L > 0:
            hi = (x[None, :] - m) / s
            lo = (x[None, :] - L - m) / s
            # difference of CDFs taken on the side where it is small
            diff = np.where(lo > 0, ndtr(-lo) - ndtr(-hi), ndtr(hi) - ndtr(lo))
            out += (ww * diff).sum(axis=0) / L
        else:
            zz = (x[None, :] - m) / s
            out += (ww * np.exp(-0.5 * zz * zz) / (s * math.sqrt(2 * math.pi))).sum(axis=0)
    return out, float(weights[0])


def _mixture_weights(dp: DiscreteParams, iota, phase: Phase) -> np.ndarray:
    if phase is Phase.TOTAL:
        return pmf(dp, iota).values
    return conditional_pmf(dp, iota, phase).values


def discrete_mixture_density(dp: DiscreteParams, grid, iota, params: KineticParams,
                             phase: Phase | str = Phase.FREE, weights: np.ndarray | None = None) -> DensityGrid:
    """Exact density of the ``n``-step position given the terminal phase.

    Weights are the conditional occupation-count probabilities (or the
    precomputed ``weights``); the ``j = 0`` mass (adsorbed throughout)
    becomes the atom at 0.
    """
    phase = Phase.parse(phase)
    x = np.asarray(grid, dtype=float) if grid is not None else default_grid(dp.t, iota, phase, params, dp=dp)
    w = _mixture_weights(dp, iota, phase) if weights is None else np.asarray(weights, dtype=float)
    values, atom = _gauss_mixture(x, w, dp, params, 0.0)
    return DensityGrid(x, values, atom, phase, dp.t)


def injected_density(dp: DiscreteParams, grid, L: float, iota, params: KineticParams,
                     phase: Phase | str = Phase.FREE, weights: np.ndarray | None = None) -> DensityGrid:
    """Density of ``S_n + U`` with ``U`` uniform on ``[0, L]`` (a uniform initial slug).

    ``weights`` may pass precomputed conditional occupation probabilities.
    """
    if not L > 0:
        raise ParameterError(f"injection length must be positive, got {L!r}")
    phase = Phase.parse(phase)
    x = np.asarray(grid, dtype=float) if grid is not None else default_grid(dp.t, iota, phase, params, dp=dp, L=L)
    w = _mixture_weights(dp, iota, phase) if weights is None else np.asarray(weights, dtype=float)
    values, atom = _gauss_mixture(x, w, dp, params, L)
    values = values + atom * ((x >= 0) & (x <= L)) / L
    return DensityGrid(x, values, 0.0, phase, dp.t)


def write_density_csv(dest: str | Path | IO[str], d: DensityGrid,
                      partial_F: DensityGrid | None = None, partial_A: DensityGrid | None = None) -> None:
    """Write ``x,density[,partial_density_F,partial_density_A]`` with metadata comments."""
    own = not hasattr(dest, "write")
    fh = open(dest, "w", newline="") if own else dest
    try:
        fh.write(f"# phase={d.phase.value} t={d.t!r} atom_weight={d.atom_weight:.17e}\n")
        cols = [d.x, d.clamped()]
        header = ["x", "density"]
        for name, extra in (("partial_density_F", partial_F), ("partial_density_A", partial_A)):
            if extra is not None:
                cols.append(extra.clamped())
                header.append(name)
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in zip(*cols):
            writer.writerow([f"{val:.17e}" for val in row])
    finally:
        if own:
            fh.close()

