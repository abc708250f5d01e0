"""Markov binomial distribution of the free-step count ``K_n``.

``K_n`` counts the steps among ``1..n`` in which a two-state chain with
transition matrix ``[[1-a, a], [b, 1-b]]`` sits in the free state.  The
pmf is computed by the three-term recursion shared by the total and the
phase-partitioned mass functions; the closed-form generating functions are
kept as an independent evaluation route.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import IO

import numpy as np

from .core import DiscreteParams, Phase, as_iota, state_prob_discrete
from .errors import DomainError, ResourceError

__all__ = [
    "Pmf",
    "PartialPmf",
    "RootPair",
    "pmf",
    "partial_pmf",
    "conditional_pmf",
    "pmf_bruteforce",
    "partial_pmf_bruteforce",
    "root_pair",
    "pgf",
    "pmf_moments",
    "write_pmf_csv",
]

BRUTEFORCE_MAX_N = 20


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability mass function on ``0..n``."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.n + 1,):
            raise ValueError(f"expected {self.n + 1} values, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.n + 1

    def __getitem__(self, j):
        if np.ndim(j) == 0 and not 0 <= j <= self.n:
            return 0.0
        return self.values[j]

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.n + 1)

    def total(self) -> float:
        return float(self.values.sum())


@dataclass(frozen=True, eq=False)
class PartialPmf(Pmf):
    """``P(K_n = j, Y_n = tau)``; sums to ``P(Y_n = tau)``."""

    tau: Phase = Phase.FREE


@dataclass(frozen=True)
class RootPair:
    """Roots of ``x^2 - ((1-a)s + (1-b)) x + (1-a-b) s``."""

    alpha: np.ndarray | complex
    beta: np.ndarray | complex


def _recurse(n: int, dp: DiscreteParams, first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """Run the three-term recursion from the n=1 and n=2 seeds up to ``n``."""
    out_prev2 = np.zeros(n + 1)
    out_prev2[: min(2, n + 1)] = first[: min(2, n + 1)]
    if n == 1:
        return out_prev2
    out_prev1 = np.zeros(n + 1)
    out_prev1[:3] = second
    one_a, one_b, gamma = 1.0 - dp.a, 1.0 - dp.b, dp.gamma
    for _ in range(3, n + 1):
        nxt = np.empty(n + 1)
        nxt[0] = one_b * out_prev1[0]
        nxt[1:] = one_b * out_prev1[1:] + one_a * out_prev1[:-1] - gamma * out_prev2[:-1]
        out_prev2, out_prev1 = out_prev1, nxt
    return out_prev1


def _seeds(dp: DiscreteParams, iota, tau: Phase) -> tuple[np.ndarray, np.ndarray]:
    iota = as_iota(iota)
    iF, iA, a, b = iota.iota_F, iota.iota_A, dp.a, dp.b
    if tau is Phase.TOTAL:
        return np.array([iA, iF]), np.array([iA * (1 - b), iA * b + iF * a, iF * (1 - a)])
    if tau is Phase.FREE:
        return np.array([0.0, iF]), np.array([0.0, iA * b, iF * (1 - a)])
    return np.array([iA, 0.0]), np.array([iA * (1 - b), iF * a, 0.0])


def _clean(values: np.ndarray) -> np.ndarray:
    # the recursion subtracts nearly equal terms; round-off can leave -1e-20
    return np.where(values < 0.0, 0.0, values)


def pmf(dp: DiscreteParams, iota) -> Pmf:
    """Exact pmf of ``K_n`` via the three-term recursion."""
    first, second = _seeds(dp, iota, Phase.TOTAL)
    return Pmf(dp.n, _clean(_recurse(dp.n, dp, first, second)))


def partial_pmf(dp: DiscreteParams, iota, tau: Phase | str) -> PartialPmf:
    """``j -> P(K_n = j, Y_n = tau)`` via the same recursion with phase seeds."""
    tau = Phase.parse(tau)
    if tau is Phase.TOTAL:
        raise DomainError("partial pmf needs a terminal phase (F or A)")
    first, second = _seeds(dp, iota, tau)
    return PartialPmf(dp.n, _clean(_recurse(dp.n, dp, first, second)), tau)


def conditional_pmf(dp: DiscreteParams, iota, tau: Phase | str) -> Pmf:
    """pmf of ``K_n`` given ``Y_n = tau``."""
    tau = Phase.parse(tau)
    if tau is Phase.TOTAL:
        return pmf(dp, iota)
    weight = state_prob_discrete(dp.n, dp, iota, tau)
    if weight <= 0.0:
        raise DomainError(f"P(Y_n = {tau.value}) = 0; conditional pmf undefined")
    part = partial_pmf(dp, iota, tau)
    return Pmf(dp.n, part.values / weight)


def _enumerate_paths(dp: DiscreteParams, iota):
    """All 2^n state paths: (free count, terminal-is-free, probability)."""
    n = dp.n
    if n > BRUTEFORCE_MAX_N:
        raise ResourceError(f"brute-force enumeration limited to n <= {BRUTEFORCE_MAX_N}, got {n}")
    iota = as_iota(iota)
    codes = np.arange(2**n, dtype=np.int64)
    # bit k set  <=>  Y_{k+1} = F
    states = ((codes[:, None] >> np.arange(n)) & 1).astype(bool)
    P = dp.transition_matrix
    prob = np.where(states[:, 0], iota.iota_F, iota.iota_A)
    for k in range(1, n):
        src = np.where(states[:, k - 1], 0, 1)
        dst = np.where(states[:, k], 0, 1)
        prob = prob * P[src, dst]
    return states.sum(axis=1), states[:, -1], prob


def pmf_bruteforce(dp: DiscreteParams, iota) -> Pmf:
    """pmf of ``K_n`` by enumerating every path (testing oracle, n <= 20)."""
    counts, _, prob = _enumerate_paths(dp, iota)
    return Pmf(dp.n, np.bincount(counts, weights=prob, minlength=dp.n + 1))


def partial_pmf_bruteforce(dp: DiscreteParams, iota, tau: Phase | str) -> PartialPmf:
    tau = Phase.parse(tau)
    counts, terminal_free, prob = _enumerate_paths(dp, iota)
    mask = terminal_free if tau is Phase.FREE else ~terminal_free
    values = np.bincount(counts[mask], weights=prob[mask], minlength=dp.n + 1)
    return PartialPmf(dp.n, values, tau)


def root_pair(s, a: float, b: float) -> RootPair:
    """Roots ``alpha``/``beta`` of the generating-function recursion at ``s``.

    The principal complex square root is used; ``alpha`` carries ``+``.
    """
    s = np.asarray(s, dtype=complex)
    lin = (1 - a) * s + (1 - b)
    root = np.sqrt(((1 - a) * s - (1 - b)) ** 2 + 4 * a * b * s)
    alpha, beta = 0.5 * (lin + root), 0.5 * (lin - root)
    if alpha.ndim == 0:
        return RootPair(complex(alpha), complex(beta))
    return RootPair(alpha, beta)


def _log1p(w):
    """Complex ``log(1 + w)`` accurate for small ``|w|`` (numpy's complex log1p is not)."""
    u = 1.0 + w
    one = u == 1.0
    return np.where(one, w, np.log(u) * w / np.where(one, 1.0, u - 1.0))


def _divided_power(alpha, beta, k: int):
    """``(alpha^k - beta^k) / (alpha - beta)``, continuous through ``alpha == beta``.

    Close roots use ``beta^(k-1) expm1(k log1p(w)) / w`` with
    ``w = (alpha - beta) / beta``, which has no cancellation.
    """
    if k == 0:
        return np.zeros_like(alpha)
    diff = alpha - beta
    close = np.abs(diff) <= 0.5 * np.abs(beta)
    safe_beta = np.where(close, beta, 1.0)
    w = np.where(close, diff / safe_beta, 0.5)
    series = np.where(w == 0, k, np.expm1(k * _log1p(w)) / np.where(w == 0, 1.0, w))
    near = safe_beta ** (k - 1) * series
    far = (alpha**k - beta**k) / np.where(close, 1.0, diff)
    return np.where(close, near, far)


def _two_root_combination(num0, slope, alpha, beta, m: int):
    """``[N(beta) alpha^m - N(alpha) beta^m] / (alpha - beta)`` with ``N(y) = num0 - slope*y``.

    Rewritten as ``num0 E_m - slope alpha beta E_(m-1)`` with divided powers
    ``E_k``, which stays accurate at and near the branch point ``alpha == beta``.
    """
    e_m = _divided_power(alpha, beta, m)
    e_m1 = _divided_power(alpha, beta, m - 1)
    return num0 * e_m - slope * alpha * beta * e_m1


def pgf(dp: DiscreteParams, iota, phase: Phase | str, s, partial: bool = False):
    """Closed-form generating function ``E[s^K]`` of ``K_n``, ``K_n^F`` or ``K_n^A``.

    Parameters
    ----------
    phase : {"total", "F", "A"}
        Unconditional count, or the count conditioned on the terminal phase.
    s : complex or array_like
        Evaluation point(s).
    partial : bool
        For ``F``/``A``, return ``E[s^K; Y_n = tau]`` without dividing by
        ``P(Y_n = tau)``.
    """
    phase = Phase.parse(phase)
    iota = as_iota(iota)
    iF, iA, a, b, n = iota.iota_F, iota.iota_A, dp.a, dp.b, dp.n
    s = np.asarray(s, dtype=complex)
    if n == 1:
        value = {Phase.TOTAL: iA + iF * s, Phase.FREE: iF * s, Phase.ADSORBED: iA + 0 * s}[phase]
    else:
        roots = root_pair(s, a, b)
        alpha, beta = np.asarray(roots.alpha), np.asarray(roots.beta)
        m = n - 1
        if phase is Phase.TOTAL:
            num0 = iA * (1 + b * (s - 1)) + iF * s * (a + s * (1 - a))
            value = _two_root_combination(num0, iA + iF * s, alpha, beta, m)
        elif phase is Phase.FREE:
            num0 = iA * b + iF * (1 - a) * s
            value = s * _two_root_combination(num0, iF, alpha, beta, m)
        else:
            num0 = iA * (1 - b) + iF * a * s
            value = _two_root_combination(num0, iA, alpha, beta, m)
    if phase is not Phase.TOTAL and not partial:
        weight = state_prob_discrete(n, dp, iota, phase)
        if weight <= 0.0:
            raise DomainError(f"P(Y_n = {phase.value}) = 0; conditional pgf undefined")
        value = value / weight
    return complex(value) if np.ndim(value) == 0 else value


def pmf_moments(p: Pmf) -> tuple[float, float]:
    """Mean and variance of a pmf by direct summation."""
    j = p.support.astype(float)
    mass = p.values.sum()
    mean = float(j @ p.values / mass)
    var = float(((j - mean) ** 2) @ p.values / mass)
    return mean, max(var, 0.0)


def write_pmf_csv(p: Pmf, dest: str | Path | IO[str]) -> None:
    """Write ``j,probability`` rows with a header."""
    own = not hasattr(dest, "write")
    fh = open(dest, "w", newline="") if own else dest
    try:
        writer = csv.writer(fh)
        writer.writerow(["j", "probability"])
        for j, value in enumerate(p.values):
            writer.writerow([j, f"{value:.17e}"])
    finally:
        if own:
            fh.close()
