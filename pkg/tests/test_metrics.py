import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from prt_evm.metrics import RunSummary, aswt, awt, improvement, qc, rho

from . import oracles


def test_worked_values():
    assert aswt([3, 4]) == pytest.approx(3.5355, abs=1e-4)
    assert qc(75.0, 357) == pytest.approx(26775)
    assert qc(15.9, 735) == pytest.approx(11686.5)
    assert rho(320, 638) == pytest.approx(0.5016, abs=1e-4)
    assert rho(150, 986) == pytest.approx(0.152, abs=1e-3)
    # inputs are rounded to one decimal, so agree to the same precision
    assert improvement(75.0, 21.2) == pytest.approx(71.8, abs=0.1)


def test_edge_cases():
    assert aswt([]) == 0.0
    assert awt([]) == 0.0
    with pytest.raises(ValueError):
        rho(10, 0)
    assert improvement(0, 0) == 0.0
    assert improvement(10, 20) == -100.0


waits = st.lists(st.floats(0, 1e4, allow_nan=False), min_size=1, max_size=200)


@given(waits)
def test_aswt_matches_oracle_and_bounds_mean(ws):
    assert aswt(ws) == pytest.approx(oracles.rms(ws), rel=1e-9, abs=1e-12)
    assert aswt(ws) + 1e-9 >= awt(ws)


@given(st.floats(0, 1e4))
def test_constant_waits_have_equal_rms_and_mean(w):
    ws = [w] * 5
    assert aswt(ws) == pytest.approx(awt(ws), rel=1e-12)


def test_summary_rejects_rms_below_mean():
    with pytest.raises(ValueError):
        RunSummary(ASWT=1.0, AWT=2.0, NET=0, ETM=0, QC=0, served_groups=0, lam=1, rho=math.nan,
                   J=1, tag="0000", seed=1)


def test_summary_row_excludes_wall_time():
    s = RunSummary(2.0, 1.0, 3, 0.5, 6.0, 4, 100.0, 0.2, 48, "1111", 1, wall_time=9.9)
    assert "wall_time" not in s.row()
    assert list(s.row()) == list(RunSummary.CSV_FIELDS)
