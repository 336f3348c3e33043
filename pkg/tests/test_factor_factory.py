import pytest
import numpy as np
import pandas as pd

from custmom.core.diagnostics import FlagLog
from custmom.core.panel import NYSE, OTHER, ReturnPanel
from custmom.core.periods import month_ordinal
from custmom.portfolios.factor_factory import CELLS, build_factor, growth_of_dollar, scale_returns
from custmom.processors.signal_output import SignalPanel

P = month_ordinal(1995, 6)

# firm: (formation ME, signal, holding return); one firm per cell
FIRMS = {
    "A": (1.0, 0.0, 0.01),   # small, low
    "B": (2.0, 2.0, 0.02),   # small, middle
    "C": (3.0, 4.0, 0.03),   # small, high
    "D": (10.0, 1.0, 0.04),  # big, low
    "E": (20.0, 3.0, 0.05),  # big, middle
    "F": (30.0, 5.0, 0.06),  # big, high
}


def make_inputs(firms, exch=None, me_scale=1.0, sign=1.0):
    exch = exch or {}
    rows, sig = [], []
    for firm, (me, value, ret) in firms.items():
        rows.append((firm, P, 0.0, me * me_scale, exch.get(firm, NYSE)))
        rows.append((firm, P + 1, ret, me * me_scale, exch.get(firm, NYSE)))
        sig.append((firm, P + 1, "cmom-1-1", sign * value))
    panel = ReturnPanel(pd.DataFrame(rows, columns=["firm_id", "period", "ret", "me", "exch"]))
    signals = SignalPanel(pd.DataFrame(sig, columns=["firm_id", "period", "signal", "value"]))
    return panel, signals


def test_six_firm_factor():
    panel, signals = make_inputs(FIRMS)
    factor = build_factor(panel, signals, "cmom-1-1", name="CMOM")
    assert factor.name == "CMOM"
    assert factor.returns.loc[P + 1] == pytest.approx(0.5 * (0.03 + 0.06) - 0.5 * (0.01 + 0.04))
    assert list(factor.cells.columns) == CELLS
    assert factor.cells.loc[P + 1, "SM"] == pytest.approx(0.02)
    assert factor.metadata["breakpoints"] == "NYSE"


TIED_ME = [1.0, 50.0, 2.0, 3.0, 60.0, 4.0, 70.0, 5.0, 80.0, 6.0, 90.0]

# signals 0..10 put firms 3 and 7 exactly on the 30th and 70th percentiles;
# firm 9 sits exactly on the size median
TIED = {f"T{i:02d}": (TIED_ME[i], float(i), 0.0137 * i - 0.0411) for i in range(11)}


def test_breakpoint_ties_are_middle_firms():
    panel, signals = make_inputs(TIED)
    factor = build_factor(panel, signals, "cmom-1-1")
    assert factor.cells.loc[P + 1, "SH"] == TIED["T09"][2]
    assert factor.cells.loc[P + 1, "BL"] == TIED["T01"][2]
    assert factor.cells.loc[P + 1, "BM"] == pytest.approx(
        (60.0 * TIED["T04"][2] + 70.0 * TIED["T06"][2]) / 130.0)


@pytest.mark.parametrize("firms", [FIRMS, TIED])
def test_negated_signal_negates_factor(firms):
    panel, signals = make_inputs(firms)
    _, negated = make_inputs(firms, sign=-1.0)
    up = build_factor(panel, signals, "cmom-1-1")
    down = build_factor(panel, negated, "cmom-1-1")
    assert down.returns.loc[P + 1] == -up.returns.loc[P + 1]
    for low, high in (("SL", "SH"), ("BL", "BH")):
        assert down.cells.loc[P + 1, low] == up.cells.loc[P + 1, high]


@pytest.mark.parametrize("firms", [FIRMS, TIED])
def test_doubling_me_leaves_factor_unchanged(firms):
    panel, signals = make_inputs(firms)
    doubled, _ = make_inputs(firms, me_scale=2.0)
    a = build_factor(panel, signals, "cmom-1-1").returns
    b = build_factor(doubled, signals, "cmom-1-1").returns
    assert b.loc[P + 1] == a.loc[P + 1]


def test_non_nyse_firms_join_cells():
    firms = dict(FIRMS, G=(100.0, 5.0, 0.5))
    panel, signals = make_inputs(firms, exch={"G": OTHER})
    factor = build_factor(panel, signals, "cmom-1-1")
    # G does not move the breakpoints but is held in the big-high cell
    assert factor.cells.loc[P + 1, "BH"] == pytest.approx((30.0 * 0.06 + 100.0 * 0.5) / 130.0)
    assert factor.cells.loc[P + 1, "SL"] == pytest.approx(0.01)


def test_empty_cell_or_no_nyse_is_absent():
    flags = FlagLog()
    firms = {k: v for k, v in FIRMS.items() if k != "E"}
    panel, signals = make_inputs(firms)
    factor = build_factor(panel, signals, "cmom-1-1", flags=flags)
    assert factor.returns.empty
    assert factor.absent == [P + 1]

    panel, signals = make_inputs(FIRMS, exch={k: OTHER for k in FIRMS})
    factor = build_factor(panel, signals, "cmom-1-1", name="X", flags=flags)
    assert factor.absent == [P + 1]
    assert flags.counts["factor X: no NYSE firms"] == 1


def test_growth_of_dollar():
    returns = pd.Series([0.1, -0.5, 0.2], index=[1, 2, 3], name="CMOM")
    growth = growth_of_dollar(returns)
    assert growth.tolist() == pytest.approx([1.1, 0.55, 0.66])
    assert growth.name == "CMOM"


def test_growth_truncates_at_ruin():
    flags = FlagLog()
    returns = pd.Series([0.1, -1.5, 0.2], index=[1, 2, 3], name="L/S")
    growth = growth_of_dollar(returns, flags=flags)
    assert growth.tolist() == pytest.approx([1.1])
    assert flags.counts["growth: truncated at non-positive value"] == 1


def test_scaled_growth():
    returns = pd.Series(np.linspace(-0.02, 0.04, 12), name="CMOM")
    scaled = scale_returns(returns, 0.05)
    assert scaled.std(ddof=1) == pytest.approx(0.05)
    # scaling is invariant to the input's own scale
    assert growth_of_dollar(returns * 3, 0.05).tolist() == pytest.approx(growth_of_dollar(returns, 0.05).tolist(),
                                                                         rel=1e-4)
    with pytest.raises(ValueError):
        scale_returns(pd.Series([0.01, 0.01, 0.01]), 0.05)
