import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinsorb.core import (
    DiscreteParams,
    EngineeringParams,
    InitialDistribution,
    KineticParams,
    Phase,
    StationaryInfo,
    choose_n,
    engineering_from_kinetic,
    load_param_file,
    run_config_from_mapping,
    state_prob_continuous,
    state_prob_discrete,
    translate_engineering,
    translate_michalak,
)
from kinsorb.errors import DomainError, ParameterError
from oracles import state_prob_expm

rates = st.floats(0.05, 5.0)


def test_phase_parse_aliases():
    assert Phase.parse("free") is Phase.FREE
    assert Phase.parse("A") is Phase.ADSORBED
    assert Phase.parse(Phase.TOTAL) is Phase.TOTAL
    with pytest.raises(ParameterError):
        Phase.parse("liquid")


@pytest.mark.parametrize("kw", [dict(lam=0, mu=1, D=1), dict(lam=1, mu=-1, D=1), dict(lam=1, mu=1, D=0),
                                dict(lam=1, mu=1, D=1, v=float("nan"))])
def test_kinetic_params_reject_invalid(kw):
    with pytest.raises(ParameterError):
        KineticParams(**kw)


def test_parameter_error_is_value_error_and_domain_error_is_parameter_error():
    assert issubclass(ParameterError, ValueError)
    assert issubclass(DomainError, ParameterError)


def test_initial_distribution_validation():
    assert InitialDistribution(0.3).iota_A == pytest.approx(0.7)
    with pytest.raises(ParameterError):
        InitialDistribution(0.6, 0.6)
    with pytest.raises(ParameterError):
        InitialDistribution(1.2)


@pytest.mark.parametrize("a,b", [(1.0, 0.5), (0.5, 1.0), (0.0, 0.5), (1.5, 0.1)])
def test_discrete_params_reject_out_of_range(a, b):
    with pytest.raises(ParameterError):
        DiscreteParams(10, a, b)


def test_translate_engineering_reference_point():
    # Da_I = mu L R / v with R = 2 gives mu = Da_I / 2; t = t_star / mu
    p, t = translate_engineering(EngineeringParams(Pe=100, Da_I=1.0, t_star=3.0, R=2, L=1, v=1))
    assert (p.lam, p.mu, p.D, t) == pytest.approx((0.5, 0.5, 0.01, 6.0), rel=1e-14)


def test_translate_engineering_figure_panel():
    p, t = translate_engineering(EngineeringParams(Pe=100, Da_I=0.1, t_star=3.6, R=2, L=1, v=1))
    assert (p.lam, p.mu, p.D, t) == pytest.approx((0.05, 0.05, 0.01, 72.0), rel=1e-14)


def test_translate_engineering_step_size_formula():
    # dt = t / n = t_star L R / (n v (R - 1) Da_I)
    ep = EngineeringParams(Pe=100, Da_I=0.33, t_star=3.2, R=2, L=1, v=1)
    _, t = translate_engineering(ep)
    assert t / 400 == pytest.approx(3.2 * 1 * 2 / (400 * 1 * 1 * 0.33), rel=1e-14)


@given(Pe=st.floats(1, 1e4), Da=st.floats(0.01, 5), ts=st.floats(0.1, 20), R=st.floats(1.01, 10),
       L=st.floats(0.1, 10), v=st.floats(0.1, 10))
def test_translate_engineering_round_trip(Pe, Da, ts, R, L, v):
    p, t = translate_engineering(EngineeringParams(Pe, Da, ts, R, L, v))
    assert t * p.mu * (R - 1) == pytest.approx(ts, rel=1e-12)
    back = engineering_from_kinetic(p, t, L)
    assert back.Da_I == pytest.approx(Da, rel=1e-12)
    assert back.Pe == pytest.approx(Pe, rel=1e-12)
    assert back.t_star == pytest.approx(ts, rel=1e-12)
    assert back.R == pytest.approx(R, rel=1e-12)


def test_translate_michalak_examples():
    assert translate_michalak(2, 0.5) == (1.0, 0.5)
    assert translate_michalak(1, 1) == (1.0, 1.0)
    lam, mu = translate_michalak(0.37, 2.9)
    assert abs(lam / mu - 0.37) <= 1e-15


def test_state_prob_discrete_examples():
    dp = DiscreteParams(5, 0.2, 0.3)
    assert state_prob_discrete(1, dp, (1, 0), "F") == 1.0
    assert state_prob_discrete(2, dp, (1, 0), "F") == pytest.approx(0.8, abs=1e-15)
    pi = (0.3 / 0.5, 0.2 / 0.5)
    for k in range(1, 6):
        assert state_prob_discrete(k, dp, pi, "F") == pytest.approx(pi[0], abs=1e-15)


def test_state_prob_discrete_matches_matrix_power():
    dp = DiscreteParams(12, 0.37, 0.11)
    P = dp.transition_matrix
    iota = np.array([0.25, 0.75])
    for k in range(1, 13):
        ref = iota @ np.linalg.matrix_power(P, k - 1)
        assert state_prob_discrete(k, dp, iota, "F") == pytest.approx(ref[0], abs=1e-14)
        assert state_prob_discrete(k, dp, iota, "A") == pytest.approx(ref[1], abs=1e-14)


def test_state_prob_continuous_examples():
    p = KineticParams(1, 1, 1, 0)
    assert state_prob_continuous(0.0, p, (0.2, 0.8), "F") == pytest.approx(0.2, abs=1e-15)
    # pi_F (1 - eps_F e^{-2t}) = 0.5 (1 + 1/4)
    assert state_prob_continuous(math.log(2), p, (1, 0), "F") == pytest.approx(0.625, abs=1e-15)
    assert state_prob_expm(math.log(2), 1, 1, (1, 0))[0] == pytest.approx(0.625, abs=1e-14)
    q = KineticParams(2.0, 0.5, 1, 0)
    pi = InitialDistribution.stationary(q)
    ts = np.linspace(0, 10, 11)
    assert np.allclose(state_prob_continuous(ts, q, pi, "A"), 0.8, atol=1e-15)


@settings(max_examples=50)
@given(lam=rates, mu=rates, iF=st.floats(0, 1), t=st.floats(0, 10))
def test_state_prob_continuous_matches_expm(lam, mu, iF, t):
    p = KineticParams(lam, mu, 1.0)
    ref = state_prob_expm(t, lam, mu, (iF, 1 - iF))
    got = [state_prob_continuous(t, p, iF, ph) for ph in ("F", "A")]
    assert np.allclose(got, ref, atol=1e-13)
    assert abs(sum(got) - 1.0) <= 1e-14


def test_stationary_info_excentricity():
    p = KineticParams(3.0, 1.0, 1.0)
    s = StationaryInfo.of(p, (1.0, 0.0))
    assert s.pi_F == pytest.approx(0.25)
    assert s.eps_F == pytest.approx(1 - 1 / 0.25)
    assert s.eps_A == pytest.approx(1.0)
    # pi_F eps_F + pi_A eps_A = 0 for any initial law
    assert s.pi_F * s.eps_F + s.pi_A * s.eps_A == pytest.approx(0.0, abs=1e-15)


def test_choose_n_examples():
    assert choose_n(3.0, KineticParams(1, 1, 0.01, 1)) == 300
    assert choose_n(1.0, KineticParams(2, 1, 1), cap=0.5) == 4
    with pytest.raises(ParameterError):
        choose_n(1.0, KineticParams(1, 1, 1), cap=1.5)


def test_param_file_and_mapping(tmp_path):
    f = tmp_path / "p.txt"
    f.write_text("# reference point\nlambda = 1\nmu: 1\nD = 0.01\nv = 1\nt = 3\niota_F = 0.5\n")
    cfg = run_config_from_mapping(load_param_file(f))
    assert (cfg.params.lam, cfg.params.D, cfg.t, cfg.iota.iota_A) == (1.0, 0.01, 3.0, 0.5)
    g = tmp_path / "e.txt"
    g.write_text("Pe = 100\nDa_I = 0.1\nt_star = 3.6\n")
    cfg = run_config_from_mapping(load_param_file(g))
    assert cfg.t == pytest.approx(72.0)
    bad = tmp_path / "bad.txt"
    bad.write_text("lamda = 1\n")
    with pytest.raises(ParameterError):
        load_param_file(bad)
    with pytest.raises(ParameterError):
        load_param_file(tmp_path / "missing.txt")


def test_engineering_incomplete_rejected():
    with pytest.raises(ParameterError):
        run_config_from_mapping({"Pe": 100, "Da_I": 1.0})


def test_discrete_converges_to_continuous_at_rate_one_over_n():
    p = KineticParams(1.3, 0.7, 1.0)
    t = 2.0
    ref = state_prob_continuous(t, p, (1, 0), "F")
    errs = []
    for n in (100, 200, 400, 800, 1600):
        dp = DiscreteParams.from_kinetic(p, t, n)
        errs.append(abs(state_prob_discrete(n, dp, (1, 0), "F") - ref))
    assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))
    c = [e * n for e, n in zip(errs, (100, 200, 400, 800, 1600))]
    assert max(c) / min(c) < 1.1
