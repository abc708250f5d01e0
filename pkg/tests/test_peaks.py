import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinsorb.errors import ParameterError
from kinsorb.peaks import (
    FIGURE3_PANELS,
    TABLE1_REFERENCE,
    ScanConfig,
    ScanResult,
    count_peaks,
    damkohler_scan,
    figure3,
    profile,
    write_table1_csv,
)
from oracles import gaussian

X = np.linspace(-10, 10, 4001)
TWO = 0.5 * gaussian(X, -5, 1.0) + 0.5 * gaussian(X, 5, 1.0)


def test_single_gaussian_has_one_peak():
    assert count_peaks((X, gaussian(X, 0.3, 1.0))).count == 1


def test_separated_mixture_has_two_peaks():
    rep = count_peaks((X, TWO))
    assert rep.count == 2
    assert np.allclose(rep.locations, [-5, 5], atol=X[1] - X[0])
    assert np.all(np.diff(rep.locations) > 0)
    assert np.all(rep.prominences >= 0.01 * TWO.max())


def test_shallow_bump_is_rejected_by_prominence():
    y = gaussian(X, 0, 1.0) + 0.001 * gaussian(X, 4, 0.05)
    assert count_peaks((X, y), 0.01).count == 1
    assert count_peaks((X, y), 1e-4).count == 2


def test_plateau_reports_leftmost_node():
    y = np.array([0, 1, 2, 2, 2, 1, 0], dtype=float)
    rep = count_peaks((np.arange(7.0), y))
    assert rep.count == 1 and rep.locations[0] == 2.0


def test_prominence_fraction_validated():
    with pytest.raises(ParameterError):
        count_peaks((X, TWO), 1.5)


@settings(max_examples=25)
@given(c=st.floats(1e-6, 1e6))
def test_peak_count_is_scale_invariant(c):
    assert count_peaks((X, c * TWO)).count == count_peaks((X, TWO)).count


def test_figure3_middle_panel_injected_profile_is_double_peaked():
    d = profile(0.33, 3.2, ScanConfig(injection_length=1.0))
    assert count_peaks(d, 0.01).count == 2


def test_figure3_panels():
    panels = {pn: figure3(pn) for pn in FIGURE3_PANELS}
    assert panels[(0.1, 3.6)].peaks.count == 2
    assert panels[(1.0, 3.0)].normalized.max() == 1.0
    for pn in panels.values():
        assert pn.integral == pytest.approx(1.0, abs=1e-8)


def test_figure3_last_panel_agrees_with_scan_verdict():
    pn = figure3((1.0, 3.0))
    res = damkohler_scan(3.0)
    assert (pn.peaks.count >= 2) == (res.Da_I_max is not None and res.Da_I_max >= 1.0)


def test_scan_config_validation():
    with pytest.raises(ParameterError):
        ScanConfig(step=0.05)
    with pytest.raises(ParameterError):
        ScanConfig(floor=0.0)
    with pytest.raises(ParameterError):
        ScanConfig(injection_length=-1.0)


def test_scan_is_deterministic_and_resolution_convergent():
    a = damkohler_scan(5.0)
    b = damkohler_scan(5.0)
    assert a == b
    fine = damkohler_scan(5.0, ScanConfig(resolution=0.0025))
    assert abs(fine.Da_I_max - a.Da_I_max) <= 0.005


@pytest.mark.parametrize("t_star", [2.0, 3.0, 10.0, 1.5, 5.0, 3.5])
def test_scan_reference_values(t_star):
    res = damkohler_scan(t_star)
    assert res.Da_I_max is not None
    assert abs(res.Da_I_max - TABLE1_REFERENCE[t_star]) <= 0.05


def test_table_csv_layout():
    buf = io.StringIO()
    write_table1_csv([ScanResult(1.5, 0.1), ScanResult(2.0, None)], buf)
    rows = buf.getvalue().splitlines()
    assert rows[0].split(",")[0] == "t_star" and rows[1].split(",")[0] == "Da_I_max"
    assert rows[1].split(",")[2] == ""
