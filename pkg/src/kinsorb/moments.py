"""Means and variances of the particle position.

Limit formulas for ``S(t)``, ``S^F(t)`` and ``S^A(t)`` and the discrete
``n``-step formulas are transcribed in their printed grouping.  Symbols:
``pF, pA`` stationary law, ``eF, eA`` excentricities, ``iF`` initial
free probability, ``g = 1 - a - b``, ``A = exp(-(lam + mu) t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import DiscreteParams, InitialDistribution, KineticParams, Phase, StationaryInfo
from .mbd import conditional_pmf, pmf_moments
from .errors import AccuracyError

__all__ = [
    "MomentSummary",
    "NonlinearityReport",
    "moments_limit",
    "moments_discrete",
    "michalak_mu2star",
    "stationary_variance",
    "nonlinearity_witness",
]

NEG_VAR_TOL = 1e-12


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    variance: float
    phase: Phase
    t: float

    @property
    def second_moment(self) -> float:
        return self.variance + self.mean**2


def _checked_variance(var: float, scale: float) -> float:
    if var < -NEG_VAR_TOL * max(scale, 1.0):
        raise AccuracyError(f"negative variance {var!r}; formula inconsistency")
    return max(var, 0.0)


def _limit_total(t, st: StationaryInfo, params: KineticParams):
    k = params.lam + params.mu
    D, v = params.D, params.v
    pF, pA, eF, iF = st.pi_F, st.pi_A, st.eps_F, st.iota.iota_F
    A = float(st.A(t))
    mean = pF * v * t - eF * pF / k * v * (1 - A)
    var = (
        2 * D * pF * t
        - 2 * D * eF * pF / k * (1 - A)
        + 2 * (pA + eF * (pA - pF) * A) / k * pF * v**2 * t
        + (eF * (pF - pA) - 2 * pA - eF * (pA - iF)) / k**2 * pF * v**2
        + A * (2 * (pA + eF * (pA - iF)) / k**2 - A * pF * eF**2 / k**2) * pF * v**2
    )
    return mean, var


def _limit_free(t, st: StationaryInfo, params: KineticParams):
    k = params.lam + params.mu
    D, v = params.D, params.v
    pF, pA, eF = st.pi_F, st.pi_A, st.eps_F
    A = float(st.A(t))
    w = 1 - eF * A
    c1 = (pF - eF * pA * A) / w
    c0 = (pA - eF * pF) / (k * w)
    mean = c1 * v * t + c0 * (1 - A) * v
    var = (
        c1 * 2 * D * t
        + c0 * 2 * D * (1 - A)
        + (pF**2 - eF * pA**2 * A) / w * v**2 * t**2
        - (c1 * t + c0 * (1 - A)) ** 2 * v**2
        - 2 * (eF * pF**2 + pA**2 * A - 2 * pA * pF * (1 + eF * A)) / (k * w) * v**2 * t
        + 2 * (1 - A) * (eF * pF**2 + pA**2 - 2 * pA * pF * (1 + eF)) / (k**2 * w) * v**2
    )
    return mean, var


def _limit_adsorbed(t, st: StationaryInfo, params: KineticParams):
    k = params.lam + params.mu
    D, v = params.D, params.v
    pF, pA, eA = st.pi_F, st.pi_A, st.eps_A
    A = float(st.A(t))
    w = 1 - eA * A
    c1 = (pF - eA * pA * A) / w
    c0 = (eA * pA - pF) / (k * w)
    mean = c1 * v * t + c0 * (1 - A) * v
    var = (
        c1 * 2 * D * t
        + c0 * 2 * D * (1 - A)
        + (pF**2 - eA * pA**2 * A) / w * v**2 * t**2
        - (c1 * t + c0 * (1 - A)) ** 2 * v**2
        - 2 * (pF**2 + eA * pA**2 * A - pA * pF * (1 + eA) * (1 + A)) / (k * w) * v**2 * t
        + 2 * (1 - A) * (pF**2 + eA * pA**2 - 2 * pA * pF * (1 + eA)) / (k**2 * w) * v**2
    )
    return mean, var


def moments_limit(t: float, iota, phase: Phase | str, params: KineticParams) -> MomentSummary:
    """Mean and variance of ``S(t)`` (``total``) or of ``S(t)`` given ``Y(t) = tau``."""
    phase = Phase.parse(phase)
    st = StationaryInfo.of(params, iota)
    fn = {Phase.TOTAL: _limit_total, Phase.FREE: _limit_free, Phase.ADSORBED: _limit_adsorbed}[phase]
    mean, var = fn(float(t), st, params)
    scale = 2 * params.D * t + (params.v * t) ** 2
    return MomentSummary(mean, _checked_variance(var, scale), phase, float(t))


def _discrete_total(dp: DiscreteParams, st: StationaryInfo, params: KineticParams):
    D, v, n, t, dt = params.D, params.v, dp.n, dp.t, dp.dt
    pF, pA, eF, iF = st.pi_F, st.pi_A, st.eps_F, st.iota.iota_F
    g = dp.gamma
    gn = g**n
    mean = pF * v * t - eF * pF * (1 - gn) / (1 - g) * v * dt
    var = (
        2 * D * pF * t
        - 2 * D * eF * pF * (1 - gn) / (1 - g) * dt
        + (pA * (1 + g) + 2 * eF * (pA - pF) * gn) / (1 - g) * pF * v**2 * t * dt
        + (g * (eF * (pF - pA) - 2 * pA) - eF * (pA - iF)) / (1 - g) ** 2 * pF * (v * dt) ** 2
        + gn * (
            eF * (pF - pA) / (1 - g)
            + 2 * (g * pA + eF * (pA - iF)) / (1 - g) ** 2
            - gn * pF * eF**2 / (1 - g) ** 2
        ) * pF * (v * dt) ** 2
    )
    return mean, var


def _discrete_free(dp: DiscreteParams, st: StationaryInfo, params: KineticParams):
    D, v, n, t, dt = params.D, params.v, dp.n, dp.t, dp.dt
    pF, pA, eF = st.pi_F, st.pi_A, st.eps_F
    g = dp.gamma
    gn, gm = g**n, g ** (n - 1)
    w = 1 - eF * gm
    c1 = (pF - eF * pA * gm) / w
    c0 = (pA - eF * pF) * (1 - gn) / ((1 - g) * w)
    mean = c1 * v * t + c0 * v * dt
    var = (
        c1 * 2 * D * t
        + c0 * 2 * D * dt
        + (pF**2 - eF * pA**2 * gm) / w * v**2 * t**2
        - (c1 * t + c0 * dt) ** 2 * v**2
        - (
            pA * pF * (1 + 3 * eF * gm) / w
            + 2 * (eF * pF**2 + pA**2 * gn - 2 * pA * pF * (1 + eF * gm)) / ((1 - g) * w)
        ) * v**2 * t * dt
        + (1 - gn) * (
            (pA * pF * (4 + eF) - (pA + eF * pF**2)) / ((1 - g) * w)
            + 2 * (eF * pF**2 + pA**2 - 2 * pA * pF * (1 + eF)) / ((1 - g) ** 2 * w)
        ) * (v * dt) ** 2
    )
    return mean, var


def moments_discrete(dp: DiscreteParams, iota, phase: Phase | str, params: KineticParams,
                     method: str = "auto") -> MomentSummary:
    """Mean and variance of the ``n``-step position ``S_n(t)``.

    Parameters
    ----------
    method : {"auto", "closed", "pmf"}
        ``closed`` uses the closed forms (total and free phases only);
        ``pmf`` composes the exact occupation-count moments with the
        per-step displacement law.  ``auto`` picks ``closed`` where it
        exists, else ``pmf``.
    """
    phase = Phase.parse(phase)
    if method == "auto":
        method = "pmf" if phase is Phase.ADSORBED else "closed"
    if method == "closed":
        if phase is Phase.ADSORBED:
            raise ValueError("no closed form for the adsorbed phase; use method='pmf'")
        st = dp.stationary(iota)
        fn = _discrete_total if phase is Phase.TOTAL else _discrete_free
        mean, var = fn(dp, st, params)
    elif method == "pmf":
        mk, vk = pmf_moments(conditional_pmf(dp, iota, phase))
        step_mean, step_var = params.v * dp.dt, 2 * params.D * dp.dt
        mean = mk * step_mean
        var = mk * step_var + vk * step_mean**2
    else:
        raise ValueError(f"unknown method {method!r}")
    scale = 2 * params.D * dp.t + (params.v * dp.t) ** 2
    return MomentSummary(mean, _checked_variance(var, scale), phase, dp.t)


def michalak_mu2star(t: float, beta: float, k: float, D: float, v: float) -> float:
    """Second central moment of the free phase for a particle free at time 0.

    The published expression carries a sign typo in the last bracket;
    this implementation uses ``-`` there.
    """
    A = math.exp(-(beta + 1) * k * t)
    b1, bA = beta + 1, 1 + beta * A
    return (
        t**2 * A * v**2 * beta * (beta - 1) ** 2 / (b1**2 * bA**2)
        + t * (2 * D / b1 + 2 * v**2 * beta / (k * b1**3))
        + t * A * (
            4 * v**2 * beta * (-(beta**2) * A - beta**2 - beta + 1) / (k * bA**2 * b1**3)
            + 2 * D * beta * (beta - 1) / (b1 * bA)
        )
        + 2 * v**2 * beta * (1 - A) * (3 * beta**2 * A - 3 - beta * (A - 1)) / (k**2 * bA**2 * b1**4)
        + 4 * D * beta * (1 - A) / (k * bA * b1**2)
    )


def stationary_variance(t: float, params: KineticParams) -> float:
    """Variance of ``S(t)`` for a particle started in the stationary law."""
    lam, mu, D, v = params.lam, params.mu, params.D, params.v
    k = lam + mu
    A = math.exp(-k * t)
    return 2 * D * mu / k * t + 2 * mu * lam / k**3 * v**2 * t - 2 * mu * lam / k**4 * v**2 * (1 - A)


@dataclass(frozen=True)
class NonlinearityReport:
    t: float
    var_free_start: float
    var_adsorbed_start: float
    var_mixed_start: float
    mismatch: float
    mean_mismatch: float


def nonlinearity_witness(t: float, params: KineticParams, phase: Phase | str = Phase.FREE) -> NonlinearityReport:
    """Show that conditional variances are not affine in the initial law.

    Compares ``Var`` under ``iota = (1/2, 1/2)`` with the average of the
    variances under ``(1, 0)`` and ``(0, 1)``.  The same comparison for the
    total-phase mean is reported as ``mean_mismatch`` (zero up to round-off).
    """
    starts = [InitialDistribution(1.0, 0.0), InitialDistribution(0.0, 1.0), InitialDistribution(0.5, 0.5)]
    v = [moments_limit(t, s, phase, params).variance for s in starts]
    m = [moments_limit(t, s, Phase.TOTAL, params).mean for s in starts]
    return NonlinearityReport(
        t=float(t),
        var_free_start=v[0],
        var_adsorbed_start=v[1],
        var_mixed_start=v[2],
        mismatch=abs(v[2] - 0.5 * v[0] - 0.5 * v[1]),
        mean_mismatch=abs(m[2] - 0.5 * m[0] - 0.5 * m[1]),
    )

