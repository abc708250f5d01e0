"""Parameter containers, convention translations and two-state probabilities.

A particle is either free (``F``) or adsorbed (``A``).  It switches
``F -> A`` at rate ``lam`` and ``A -> F`` at rate ``mu``; while free it is
advected with velocity ``v`` and dispersed with coefficient ``D``.
"""

from __future__ import annotations

import configparser
import enum
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ParameterError

__all__ = [
    "Phase",
    "KineticParams",
    "InitialDistribution",
    "StationaryInfo",
    "DiscreteParams",
    "EngineeringParams",
    "translate_engineering",
    "engineering_from_kinetic",
    "translate_michalak",
    "state_prob_discrete",
    "state_prob_continuous",
    "choose_n",
    "as_iota",
    "load_param_file",
    "RunConfig",
    "run_config_from_mapping",
]


class Phase(str, enum.Enum):
    """Phase selector: conditional on terminal state, or unconditional."""

    FREE = "F"
    ADSORBED = "A"
    TOTAL = "total"

    @classmethod
    def parse(cls, value: "Phase | str") -> "Phase":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {
            "f": cls.FREE, "free": cls.FREE,
            "a": cls.ADSORBED, "adsorbed": cls.ADSORBED, "sorbed": cls.ADSORBED,
            "total": cls.TOTAL, "t": cls.TOTAL, "all": cls.TOTAL,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ParameterError(f"unknown phase {value!r}") from None


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (value > 0.0 and math.isfinite(value)):
        raise ParameterError(f"{name} must be positive and finite, got {value!r}")
    return value


@dataclass(frozen=True)
class KineticParams:
    """Rates and transport coefficients of the continuous model.

    Parameters
    ----------
    lam : float
        Adsorption rate, free -> adsorbed [1/time].
    mu : float
        Desorption rate, adsorbed -> free [1/time].
    D : float
        Dispersion coefficient [length^2/time].
    v : float
        Advection velocity [length/time]; any sign.
    """

    lam: float
    mu: float
    D: float
    v: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lam", _positive("lambda", self.lam))
        object.__setattr__(self, "mu", _positive("mu", self.mu))
        object.__setattr__(self, "D", _positive("D", self.D))
        v = float(self.v)
        if not math.isfinite(v):
            raise ParameterError(f"v must be finite, got {v!r}")
        object.__setattr__(self, "v", v)

    @property
    def rate_sum(self) -> float:
        return self.lam + self.mu

    @property
    def generator(self) -> np.ndarray:
        """Generator matrix of the phase chain, rows/cols ordered (F, A)."""
        return np.array([[-self.lam, self.lam], [self.mu, -self.mu]])


@dataclass(frozen=True)
class InitialDistribution:
    """Probability vector over (free, adsorbed) at time zero."""

    iota_F: float
    iota_A: float | None = None

    def __post_init__(self):
        f = float(self.iota_F)
        a = 1.0 - f if self.iota_A is None else float(self.iota_A)
        if not (0.0 <= f <= 1.0 and 0.0 <= a <= 1.0) or abs(f + a - 1.0) > 1e-12:
            raise ParameterError(f"initial distribution ({f}, {a}) is not a probability vector")
        object.__setattr__(self, "iota_F", f)
        object.__setattr__(self, "iota_A", a)

    @classmethod
    def free(cls) -> "InitialDistribution":
        return cls(1.0, 0.0)

    @classmethod
    def adsorbed(cls) -> "InitialDistribution":
        return cls(0.0, 1.0)

    @classmethod
    def stationary(cls, params: KineticParams) -> "InitialDistribution":
        pi_F = params.mu / params.rate_sum
        return cls(pi_F, 1.0 - pi_F)

    def __getitem__(self, phase: Phase | str) -> float:
        phase = Phase.parse(phase)
        if phase is Phase.FREE:
            return self.iota_F
        if phase is Phase.ADSORBED:
            return self.iota_A
        raise ParameterError("initial probability is defined per phase only")

    def as_tuple(self) -> tuple[float, float]:
        return (self.iota_F, self.iota_A)


def as_iota(iota) -> InitialDistribution:
    """Coerce a tuple ``(iota_F, iota_A)``, a scalar ``iota_F`` or an instance."""
    if isinstance(iota, InitialDistribution):
        return iota
    if np.ndim(iota) == 0:
        return InitialDistribution(float(iota))
    f, a = iota
    return InitialDistribution(f, a)


@dataclass(frozen=True)
class StationaryInfo:
    """Stationary law and excentricities for a rate pair and initial law.

    Only the rates' ratio matters, so the same object serves the discrete
    chain (``a``, ``b``) and the continuous chain (``lam``, ``mu``).
    """

    lam: float
    mu: float
    iota: InitialDistribution

    @classmethod
    def of(cls, params: KineticParams, iota) -> "StationaryInfo":
        return cls(params.lam, params.mu, as_iota(iota))

    @cached_property
    def pi_F(self) -> float:
        return self.mu / (self.lam + self.mu)

    @cached_property
    def pi_A(self) -> float:
        return self.lam / (self.lam + self.mu)

    @cached_property
    def eps_F(self) -> float:
        return 1.0 - self.iota.iota_F / self.pi_F

    @cached_property
    def eps_A(self) -> float:
        return 1.0 - self.iota.iota_A / self.pi_A

    def pi(self, phase: Phase | str) -> float:
        return self.pi_F if Phase.parse(phase) is Phase.FREE else self.pi_A

    def eps(self, phase: Phase | str) -> float:
        return self.eps_F if Phase.parse(phase) is Phase.FREE else self.eps_A

    def A(self, t):
        """Relaxation factor ``exp(-(lam + mu) t)``."""
        return np.exp(-(self.lam + self.mu) * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class DiscreteParams:
    """Discretisation of ``[0, t]`` into ``n`` steps with switch probabilities.

    ``a`` and ``b`` are the one-step probabilities F -> A and A -> F.  Use
    :meth:`from_kinetic` to derive them from rates as ``a = lam * dt``.
    """

    n: int
    a: float
    b: float
    t: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "t", _positive("t", self.t))
        for name in ("a", "b"):
            value = float(getattr(self, name))
            if not 0.0 < value < 1.0:
                raise ParameterError(
                    f"{name}={value!r} outside (0, 1); refine the time step (increase n)"
                )
            object.__setattr__(self, name, value)

    @classmethod
    def from_kinetic(cls, params: KineticParams, t: float, n: int) -> "DiscreteParams":
        t = _positive("t", t)
        dt = t / n
        return cls(n, params.lam * dt, params.mu * dt, t)

    @property
    def dt(self) -> float:
        return self.t / self.n

    @property
    def gamma(self) -> float:
        return 1.0 - self.a - self.b

    @property
    def transition_matrix(self) -> np.ndarray:
        return np.array([[1.0 - self.a, self.a], [self.b, 1.0 - self.b]])

    def stationary(self, iota) -> StationaryInfo:
        return StationaryInfo(self.a, self.b, as_iota(iota))


@dataclass(frozen=True)
class EngineeringParams:
    """Dimensionless groups used in the sorption engineering literature.

    Damkohler number ``Da_I = mu L R / v``, Peclet number ``Pe = v L / D``,
    dimensionless time ``t_star = mu (R - 1) t`` and retardation
    ``R = 1 + lam / mu``.
    """

    Pe: float
    Da_I: float
    t_star: float
    R: float = 2.0
    L: float = 1.0
    v: float = 1.0

    def __post_init__(self):
        for name in ("Pe", "Da_I", "t_star", "R", "L", "v"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))
        if self.R <= 1.0:
            raise ParameterError(f"retardation R must exceed 1, got {self.R!r}")


def translate_engineering(ep: EngineeringParams) -> tuple[KineticParams, float]:
    """Return the kinetic parameters and physical time for ``ep``."""
    mu = ep.Da_I * ep.v / (ep.L * ep.R)
    lam = (ep.R - 1.0) * mu
    D = ep.v * ep.L / ep.Pe
    t = ep.t_star / ((ep.R - 1.0) * mu)
    return KineticParams(lam, mu, D, ep.v), t


def engineering_from_kinetic(params: KineticParams, t: float, L: float = 1.0) -> EngineeringParams:
    """Inverse of :func:`translate_engineering` for a chosen injection length."""
    if params.v <= 0:
        raise ParameterError("engineering groups need a positive velocity")
    R = 1.0 + params.lam / params.mu
    return EngineeringParams(
        Pe=params.v * L / params.D,
        Da_I=params.mu * L * R / params.v,
        t_star=params.mu * (R - 1.0) * t,
        R=R,
        L=L,
        v=params.v,
    )


def translate_michalak(beta: float, k: float) -> tuple[float, float]:
    """Map (partition ratio ``beta``, mass-transfer rate ``k``) to (lam, mu)."""
    beta = _positive("beta", beta)
    k = _positive("k", k)
    return beta * k, k


def state_prob_discrete(k: int, dp: DiscreteParams, iota, tau: Phase | str) -> float:
    """``P(Y_k = tau)`` for the discrete chain, ``1 <= k <= n``."""
    if int(k) != k or not 1 <= k <= dp.n:
        raise ParameterError(f"step index {k!r} outside 1..{dp.n}")
    st = dp.stationary(iota)
    tau = Phase.parse(tau)
    return st.pi(tau) * (1.0 - st.eps(tau) * dp.gamma ** (int(k) - 1))


def state_prob_continuous(t, params: KineticParams, iota, tau: Phase | str):
    """``P(Y(t) = tau)`` for the continuous-time chain; vectorised over ``t``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ParameterError("time must be nonnegative")
    st = StationaryInfo.of(params, iota)
    tau = Phase.parse(tau)
    out = st.pi(tau) * (1.0 - st.eps(tau) * st.A(t_arr))
    return float(out) if out.ndim == 0 else out


def choose_n(t: float, params: KineticParams, cap: float = 0.01) -> int:
    """Smallest ``n`` with ``max(lam, mu) * t / n <= cap``."""
    if not 0.0 < cap < 1.0:
        raise ParameterError(f"cap must lie in (0, 1), got {cap!r}")
    rate_t = max(params.lam, params.mu) * _positive("t", t)
    n = max(1, math.ceil(rate_t / cap))
    # guard against ceil landing one too high through rounding
    while n > 1 and rate_t / (n - 1) <= cap:
        n -= 1
    return n


# ---------------------------------------------------------------------------
# parameter files

_KINETIC_KEYS = {"lambda", "mu", "D", "v", "iota_F", "t", "n"}
_ENGINEERING_KEYS = {"Pe", "Da_I", "t_star", "R", "L", "v"}


def load_param_file(path: str | Path) -> dict[str, float]:
    """Read a flat ``key = value`` (or ``key: value``) file into a dict.

    Lines starting with ``#`` or ``;`` are comments.  Keys are case
    sensitive (``D`` and ``Da_I`` are distinct).
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParameterError(f"cannot read parameter file {path}: {exc.strerror}") from None
    try:
        parser.read_string("[params]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ParameterError(f"cannot parse parameter file {path}: {exc}") from None
    out = {}
    for key, raw in parser["params"].items():
        try:
            out[key] = float(raw)
        except ValueError:
            raise ParameterError(f"{path}: value for {key!r} is not a number: {raw!r}") from None
    unknown = set(out) - _KINETIC_KEYS - _ENGINEERING_KEYS
    if unknown:
        raise ParameterError(f"{path}: unknown keys {sorted(unknown)}")
    return out


@dataclass(frozen=True)
class RunConfig:
    """Resolved run parameters: kinetics, horizon, optional step count and initial law."""

    params: KineticParams
    t: float
    iota: InitialDistribution
    n: int | None = None
    L: float | None = None


def run_config_from_mapping(values: Mapping[str, float]) -> RunConfig:
    """Build a :class:`RunConfig`; engineering keys win over kinetic ones."""
    values = dict(values)
    iota = InitialDistribution(values.get("iota_F", 1.0))
    n = values.get("n")
    if n is not None:
        if int(n) != n:
            raise ParameterError(f"n must be an integer, got {n!r}")
        n = int(n)
    eng = [k for k in ("Pe", "Da_I", "t_star") if k in values]
    if eng:
        missing = {"Pe", "Da_I", "t_star"} - set(eng)
        if missing:
            raise ParameterError(f"engineering parameters incomplete, missing {sorted(missing)}")
        ep = EngineeringParams(
            Pe=values["Pe"],
            Da_I=values["Da_I"],
            t_star=values["t_star"],
            R=values.get("R", 2.0),
            L=values.get("L", 1.0),
            v=values.get("v", 1.0),
        )
        params, t = translate_engineering(ep)
        return RunConfig(params, t, iota, n, ep.L)
    missing = {"lambda", "mu", "D", "t"} - set(values)
    if missing:
        raise ParameterError(f"kinetic parameters incomplete, missing {sorted(missing)}")
    params = KineticParams(values["lambda"], values["mu"], values["D"], values.get("v", 0.0))
    return RunConfig(params, _positive("t", values["t"]), iota, n, values.get("L"))
