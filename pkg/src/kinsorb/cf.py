"""Characteristic functions of the continuous-time position ``S(t)``.

With ``z = D u^2 - i v u`` a free particle's position increment over a
time ``s`` has characteristic function ``exp(-z s)``.  The position at
time ``t`` is therefore governed by the 2x2 system with matrix
``[[-lam - z, lam], [mu, -mu]]`` whose eigenvalues are expressed through

    theta_A = r - z,   theta_F = r + z,   r = sqrt((z + lam - mu)^2 + 4 lam mu),

with the root of positive real part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .core import (
    DiscreteParams,
    KineticParams,
    Phase,
    as_iota,
    state_prob_continuous,
)
from .errors import DomainError, ParameterError, QuadratureError
from .mbd import pgf

__all__ = [
    "ThetaPair",
    "CFValue",
    "exponent",
    "theta",
    "cf",
    "cf_partial",
    "cf_discrete",
    "atom_weight",
    "tail_coefficient",
    "tail_crossover",
    "cf_tail_bound",
    "resolvent_pair",
    "resolvent_closed",
]


@dataclass(frozen=True)
class ThetaPair:
    theta_A: complex | np.ndarray
    theta_F: complex | np.ndarray


@dataclass(frozen=True)
class CFValue:
    u: float | np.ndarray
    value: complex | np.ndarray

    def __complex__(self):
        return complex(self.value)


def _scalar_or_array(x):
    return complex(x) if np.ndim(x) == 0 else x


def exponent(u, params: KineticParams):
    """``z(u) = D u^2 - i v u``, the free-motion cumulant exponent."""
    u = np.asarray(u, dtype=float)
    return params.D * u * u - 1j * params.v * u


def _root(z, params: KineticParams):
    lam, mu = params.lam, params.mu
    r = np.sqrt((z + lam - mu) ** 2 + 4.0 * lam * mu)
    # principal root already has Re >= 0; flip only the exceptional cases
    r = np.where(r.real < 0.0, -r, r)
    if np.any(r.real == 0.0):
        raise ArithmeticError("square root with vanishing real part; branch undefined")
    return r


def theta(u, params: KineticParams) -> ThetaPair:
    """``theta_A`` and ``theta_F`` at frequency ``u``."""
    z = exponent(u, params)
    r = _root(z, params)
    return ThetaPair(_scalar_or_array(r - z), _scalar_or_array(r + z))


def cf_partial(t: float, u, iota, phase: Phase | str, params: KineticParams):
    """``E[exp(iuS(t)); Y(t) = tau]``, or ``E[exp(iuS(t))]`` for ``total``.

    Returned as a bare complex value or array.
    """
    if not t > 0:
        raise ParameterError(f"t must be positive, got {t!r}")
    phase = Phase.parse(phase)
    iota = as_iota(iota)
    iF, iA = iota.iota_F, iota.iota_A
    lam, mu = params.lam, params.mu
    k = lam + mu
    z = exponent(u, params)
    r = _root(z, params)
    tA, tF = r - z, r + z
    slow = np.exp(0.5 * (tA - k) * t)
    fast = np.exp(-0.5 * (tF + k) * t)
    if phase is Phase.FREE:
        n1 = iF * (tA - k) + 2.0 * mu
        n2 = iF * (tF + k) - 2.0 * mu
    elif phase is Phase.ADSORBED:
        n1 = iA * (tF - k) + 2.0 * lam
        n2 = iA * (tA + k) - 2.0 * lam
    else:
        n1 = iA * tF + iF * tA + k
        n2 = iA * tA + iF * tF - k
    value = (slow * n1 + fast * n2) / (2.0 * r)
    return _scalar_or_array(value)


def cf(t: float, u, iota, phase: Phase | str, params: KineticParams) -> CFValue:
    """Characteristic function of ``S(t)`` or of ``S(t)`` given ``Y(t) = tau``.

    Parameters
    ----------
    t : float
        Time, positive.
    u : float or array_like
        Frequencies.
    phase : {"total", "F", "A"}
        ``total`` is unconditional; ``F``/``A`` condition on the phase at ``t``.
    """
    phase = Phase.parse(phase)
    value = cf_partial(t, u, iota, phase, params)
    if phase is not Phase.TOTAL:
        value = value / state_prob_continuous(t, params, iota, phase)
    return CFValue(u, value)


def cf_discrete(dp: DiscreteParams, u, iota, phase: Phase | str, params: KineticParams) -> CFValue:
    """Characteristic function of the ``n``-step position ``S_n(t)``.

    The generating function of the chosen occupation count is evaluated at
    the one-step free-move characteristic function ``exp(i v dt u - D dt u^2)``.
    """
    dt = dp.dt
    s = np.exp(-exponent(u, params) * dt)
    return CFValue(u, pgf(dp, iota, phase, s))


def atom_weight(t: float, iota, params: KineticParams) -> float:
    """Probability that an adsorbed-at-``t`` particle never moved."""
    iota = as_iota(iota)
    if iota.iota_A == 0.0:
        return 0.0
    p_A = state_prob_continuous(t, params, iota, Phase.ADSORBED)
    return float(iota.iota_A * math.exp(-params.mu * t) / p_A)


def tail_coefficient(t: float, iota, phase: Phase | str, params: KineticParams) -> tuple[float, float, float]:
    """Large-frequency expansion of the partial characteristic function.

    ``cf_partial ~ atom + c1 / z + c2 / z^2`` as ``|u| -> inf`` (the other
    exponential is Gaussian-small).  Returns ``(atom, c1, c2)``.
    """
    phase = Phase.parse(phase)
    iota = as_iota(iota)
    lam, mu = params.lam, params.mu
    iA = iota.iota_A
    em = math.exp(-mu * t)
    free = (
        0.0,
        mu * iA * em,
        mu * em * (lam + iA * (lam * mu * t - 2 * lam + mu)),
    )
    ads = (
        iA * em,
        lam * em * (1 - iA + iA * mu * t),
        0.5 * lam * em * (
            iA * (lam * mu**2 * t**2 - 4 * lam * mu * t + 2 * lam + 2 * mu**2 * t - 4 * mu)
            + 2 * lam * mu * t - 2 * lam + 2 * mu
        ),
    )
    if phase is Phase.FREE:
        return free
    if phase is Phase.ADSORBED:
        return ads
    return tuple(f + a for f, a in zip(free, ads))


def tail_crossover(t: float, params: KineticParams) -> float:
    """Smallest ``|u|`` at which :func:`cf_tail_bound` is certified."""
    lam, mu, D = params.lam, params.mu, params.D
    need = max(2.0 * (abs(lam - mu) + 2.0 * math.sqrt(lam * mu)), 4.0 * lam * mu * t / math.log(2.0))
    return math.sqrt(need / D)


def _bound_constants(t: float, iota, params: KineticParams, u0: float):
    iota = as_iota(iota)
    lam, mu, D, v = params.lam, params.mu, params.D, params.v
    iF, iA = iota.iota_F, iota.iota_A
    em = math.exp(-mu * t)
    q = 8.0 * lam * mu / (D * u0 * u0)  # bound on |theta_A - lam + mu| * D u^2 / D u0^2
    zr = 2.0 * math.sqrt(1.0 + (v / (D * u0)) ** 2)  # bound on |z| / |r|
    c1_F = 2.0 * em * (2.0 * mu * iA + q * iF) / D
    c2_F = 0.5 * iF * (1.0 + zr) + (iF * (lam + mu) + 2.0 * mu) / (D * u0 * u0)
    c1_A = em / D * (8.0 * lam * mu * t * iA + 2.0 * iA * (2.0 * lam + q) + 4.0 * lam)
    c2_A = (iA * (q + 2.0 * lam) + 2.0 * lam) / (D * u0 * u0)
    return (c1_F, c2_F), (c1_A, c2_A)


def cf_tail_bound(t: float, u, params: KineticParams, iota=(1.0, 0.0)) -> float | np.ndarray:
    """Upper bound ``C1/u^2 + C2 exp(-D t u^2 / 2)`` on the inversion integrand.

    Bounds both ``|phi_F(u)|`` and ``|phi_A(u) - kappa|`` (conditional
    transforms) for ``|u| >= tail_crossover(t, params)``.

    Raises
    ------
    DomainError
        If any ``|u|`` lies below the crossover.
    """
    u = np.abs(np.asarray(u, dtype=float))
    u0 = tail_crossover(t, params)
    if np.any(u < u0):
        raise DomainError(f"|u| must be >= {u0:.6g} for a certified bound")
    (c1F, c2F), (c1A, c2A) = _bound_constants(t, iota, params, u0)
    gauss = np.exp(-0.5 * params.D * t * u * u)
    out = []
    for phase, c1, c2 in ((Phase.FREE, c1F, c2F), (Phase.ADSORBED, c1A, c2A)):
        p = state_prob_continuous(t, params, iota, phase)
        out.append((c1 / (u * u) + c2 * gauss) / p if p > 0 else np.zeros_like(u))
    bound = np.maximum(out[0], out[1])
    return float(bound) if bound.ndim == 0 else bound


def resolvent_closed(phi: float, u, iota, phase: Phase | str, params: KineticParams):
    """Rational Laplace transform of the (phase-weighted) characteristic function."""
    phase = Phase.parse(phase)
    iota = as_iota(iota)
    lam, mu = params.lam, params.mu
    z = exponent(u, params)
    det = (phi + lam + z) * (phi + mu) - lam * mu
    if phase is Phase.FREE:
        num = mu + iota.iota_F * phi
    elif phase is Phase.ADSORBED:
        num = lam + iota.iota_A * (phi + z)
    else:
        num = phi + lam + mu + iota.iota_A * z
    return _scalar_or_array(num / det)


def resolvent_pair(phi: float, u: float, iota, params: KineticParams, phase: Phase | str = Phase.TOTAL,
                   tol: float = 1e-6) -> tuple[complex, complex]:
    """Numerical and closed-form Laplace transforms of the characteristic function.

    ``numeric`` integrates ``exp(-phi t) E[exp(iuS(t)); Y(t) = tau]`` (the
    unweighted transform for ``total``) over ``(0, T_max)`` with
    ``exp(-phi T_max) <= 1e-12``; ``closed`` is :func:`resolvent_closed`.

    Raises
    ------
    QuadratureError
        If adaptive quadrature does not meet ``tol``.
    """
    if not phi > 0:
        raise ParameterError(f"phi must be positive, got {phi!r}")
    phase = Phase.parse(phase)
    t_max = math.log(1e12) / phi

    def integrand(t, part):
        if t == 0.0:
            iota_ = as_iota(iota)
            value = 1.0 if phase is Phase.TOTAL else iota_[phase]
        else:
            value = cf_partial(t, u, iota, phase, params)
        value = complex(value) * math.exp(-phi * t)
        return value.real if part == 0 else value.imag

    # breakpoints help the adaptive rule follow the fast exp(-phi t) decay
    points = [t_max * f for f in (1e-3, 1e-2, 0.1, 0.3)]
    parts = []
    for part in (0, 1):
        val, err, *info = integrate.quad(integrand, 0.0, t_max, args=(part,), limit=500,
                                         epsabs=1e-12, epsrel=1e-12, points=points, full_output=1)
        if err > tol or (len(info) > 1 and "The maximum number" in str(info[1])):
            raise QuadratureError("Laplace quadrature did not converge", estimate=err, phi=phi, u=u)
        parts.append(val)
    numeric = complex(parts[0], parts[1])
    closed = complex(resolvent_closed(phi, u, iota, phase, params))
    return numeric, closed

