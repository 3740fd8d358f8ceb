from __future__ import annotations

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import average_precision_score

from _oracles import brute_force_optimum
from deepfmea.errors import InvariantError, PreconditionError
from deepfmea.risk import (
    ConfusionRates,
    CostSet,
    average_precision,
    candidate_thresholds,
    confusion_rates,
    delta_qcpn,
    delta_qcpn_curve,
    none_detect_value,
    optimal_threshold,
    pr_curve,
    qcpn,
    qcpn_star,
    rpn,
    scenario_table,
)

S4 = [0.9, 0.8, 0.3, 0.1]


def test_formula_examples():
    assert rpn(1, 1, 1) == 1 and rpn(0, 7, 0.3) == 0
    assert rpn(0.1, 5, 0.5) == pytest.approx(0.25)
    assert qcpn(0.1, 0.5, 100, 1000) == pytest.approx(55)
    assert qcpn(0.2, 1, 100, 1000) == pytest.approx(20) and qcpn(0.2, 0, 100, 1000) == pytest.approx(200)
    assert qcpn_star(0.1, 0.8, 0.2, 0.05, 100, 1000, 20, 1) == pytest.approx(29.1)
    assert qcpn_star(0.3, 1, 0, 0, 100, 1000, 20, 0) == pytest.approx(30)
    assert qcpn_star(0, 0.4, 0.6, 0.9, 100, 1000, 20, 7) == 7
    assert qcpn_star(0.1, 0.8, 0.2, 0.05, 100, 1000, 20, 1, fp_cost_unscaled_by_P=True) == pytest.approx(30.0)


def test_symbolic_identities():
    P, T, F, CD, CDI, CP = sp.symbols("P TPR FPR CD CDI C_PHM", nonnegative=True)
    CU = CD + CDI
    delta = qcpn(P, 0, CD, CU) - qcpn_star(P, T, 1 - T, F, CD, CU, CDI, 0)
    assert sp.simplify(delta - P * CDI * (T - F)) == 0
    perfect = qcpn(P, 0, CD, sp.Symbol("CU")) - qcpn_star(P, 1, 0, 0, CD, sp.Symbol("CU"), CDI, CP)
    assert sp.simplify(perfect - (P * (sp.Symbol("CU") - CD) - CP)) == 0
    none = qcpn(P, 0, CD, sp.Symbol("CU")) - qcpn_star(P, 0, 1, 0, CD, sp.Symbol("CU"), CDI, CP)
    assert sp.simplify(none + CP) == 0
    cu = sp.Symbol("CU")
    slope = sp.diff(qcpn(P, 0, CD, cu) - qcpn_star(P, T, 1 - T, F, CD, cu, CDI, CP), cu)
    assert sp.simplify(slope - P * T) == 0


def test_delta_examples():
    base = CostSet(P=0.1, D=0.3, CD=100, CU=1000, CDI=20)
    assert delta_qcpn(base, ConfusionRates(0.3, 0.0, 0.7)).delta_QCPN == 0.0
    c = CostSet(P=0.1, CD=100, CU=150, CDI=50)
    fig = delta_qcpn(c, ConfusionRates.from_tpr(0.8, 0.1))
    assert fig.delta_QCPN == pytest.approx(0.1 * 50 * 0.7)
    perfect = delta_qcpn(CostSet(P=0.2, CD=100, CU=1000), ConfusionRates.from_tpr(1, 0))
    assert perfect.delta_QCPN == pytest.approx(0.2 * 900)


def test_invariants():
    with pytest.raises(InvariantError):
        ConfusionRates(0.5, 0.0, 0.4)
    with pytest.raises(InvariantError):
        ConfusionRates(1.2, 0.0, -0.2)
    with pytest.raises(InvariantError):
        CostSet(P=2)
    with pytest.raises(InvariantError):
        CostSet(P=0.1, CDI=-1)
    with pytest.raises(InvariantError):
        CostSet.from_mapping({"P": 0.1, "flags": ["nonsense"]})
    c = CostSet.from_mapping({"P": 0.1, "D": 0.4, "C_PHM": 3, "flags": ["assume_run_to_failure", "assume_free_operation"]})
    assert c.effective().D == 0 and c.effective().C_PHM == 0


def test_confusion_examples():
    r, counts = confusion_rates(S4, [1, 1, 0, 0], 0.5)
    assert (r.TPR, r.FPR, r.FNR) == (1.0, 0.0, 0.0)
    assert counts == {"TP": 2, "FP": 0, "FN": 0, "TN": 2}
    r, _ = confusion_rates(S4, [1, 1, 0, 0], 0.0)
    assert (r.TPR, r.FPR) == (1.0, 1.0)
    r, _ = confusion_rates(S4, [1, 1, 0, 0], 1.0)
    assert (r.TPR, r.FPR) == (0.0, 0.0)
    with pytest.raises(PreconditionError):
        confusion_rates(S4, [1, 1, 1, 1], 0.5)
    with pytest.raises(PreconditionError):
        confusion_rates(S4, [0, 0, 0, 0], 0.5)


def test_pr_curve_examples():
    pts = pr_curve(S4, [1, 0, 1, 0])
    mid = [p for p in pts if p.threshold == pytest.approx(0.55)]
    assert (mid[0].recall, mid[0].precision) == (0.5, 0.5)
    assert all(p.threshold != math.inf for p in pts)  # no detections at +inf: omitted
    sep = pr_curve(S4, [1, 1, 0, 0])
    assert any(p.precision == 1 and p.recall == 1 for p in sep)
    assert all(p.precision == 1 for p in pr_curve(S4, [1, 1, 1, 1]))
    with pytest.raises(PreconditionError):
        pr_curve(S4, [0, 0, 0, 0])


def test_curve_examples():
    c = CostSet(P=0.1, CD=100, CU=150, CDI=50)
    y = [1, 0, 1, 0, 1]
    s = [0.9, 0.8, 0.3, 0.1, 0.7]
    for t, d in delta_qcpn_curve(s, y, c):
        r, _ = confusion_rates(s, y, t)
        assert d == pytest.approx(0.1 * 50 * (r.TPR - r.FPR), abs=1e-12)
    flat = delta_qcpn_curve([2.0] * 4, [1, 0, 1, 0], CostSet(P=0.1, CD=1, CU=10, C_PHM=1))
    assert [t for t, _ in flat] == [-math.inf, math.inf]
    assert flat[-1][1] == pytest.approx(-1.0)
    zero = CostSet(P=0.3, C_PHM=2.5)
    assert all(d == pytest.approx(-2.5) for _, d in delta_qcpn_curve(s, y, zero))
    assert none_detect_value(CostSet(P=0.1, CD=1, CU=10, C_PHM=4)) == pytest.approx(-4)


def test_optimal_threshold_examples():
    s = [0.1, 0.2, 0.3, 5.0, 6.0]
    y = [0, 0, 0, 1, 1]
    c = CostSet(P=0.05, CD=400, CU=50000, CDI=100, C_PHM=3)
    t, d = optimal_threshold(s, y, c)
    assert 0.3 < t < 5.0
    assert d == pytest.approx(0.05 * (50000 - 400) - 3)
    # ties: every threshold scores the same, so the largest one wins
    t, d = optimal_threshold(s, y, CostSet(P=0.3))
    assert t == math.inf


def test_scenarios_ordered(rng):
    s = np.concatenate([rng.normal(0, 1, 80), rng.normal(2, 1, 40)])
    y = np.r_[np.zeros(80), np.ones(40)].astype(bool)
    scen = [CostSet(P=0.05, CD=400, CU=cu, CDI=100, name=n) for n, cu in (("a", 450), ("b", 2000), ("c", 50000))]
    res = scenario_table(s, y, scen)
    assert [r.name for r in res] == ["a", "b", "c"]
    assert res[0].delta_QCPN <= res[1].delta_QCPN <= res[2].delta_QCPN
    assert res[2].delta_QCPN > 0
    for r in res:
        assert r.figures.delta_QCPN == pytest.approx(r.delta_QCPN)


def test_average_precision_matches_sklearn(rng):
    for _ in range(20):
        s = np.round(rng.normal(size=50), 1)
        y = rng.random(50) < 0.4
        y[0] = True
        assert average_precision(s, y) == pytest.approx(average_precision_score(y, s), abs=1e-12)


# -- properties -----------------------------------------------------------------------

prob = st.floats(0, 1)
cost = st.floats(0, 1e5)


@given(prob, prob, cost, cost, cost, cost, prob, prob)
@settings(max_examples=300, deadline=None)
def test_identity_and_fixed_point(P, D, CD, CU, CDI, CPHM, tpr, fpr):
    c = CostSet(P=P, D=D, CD=CD, CU=CU, CDI=CDI, C_PHM=CPHM)
    f = delta_qcpn(c, ConfusionRates.from_tpr(tpr, fpr))
    assert f.delta_QCPN == f.QCPN - f.QCPN_star
    base = CostSet(P=P, D=D, CD=CD, CU=CU, CDI=CDI)
    assert delta_qcpn(base, ConfusionRates(D, 0.0, 1 - D)).delta_QCPN == 0.0


@given(prob, cost, cost, cost, cost, prob, prob, st.floats(0, 1e4))
@settings(max_examples=300, deadline=None)
def test_monotone_in_cu(P, CD, CU, CDI, CPHM, tpr, fpr, bump):
    r = ConfusionRates.from_tpr(tpr, fpr)
    lo = delta_qcpn(CostSet(P=P, CD=CD, CU=CU, CDI=CDI, C_PHM=CPHM), r).delta_QCPN
    hi = delta_qcpn(CostSet(P=P, CD=CD, CU=CU + bump, CDI=CDI, C_PHM=CPHM), r).delta_QCPN
    assert hi >= lo - 1e-9 * max(1.0, abs(lo))


@given(st.lists(st.integers(0, 20), min_size=2, max_size=40), st.data())
@settings(max_examples=200, deadline=None)
def test_optimum_matches_brute_force(raw, data):
    s = np.asarray(raw, dtype=float) / 4
    y = np.asarray(data.draw(st.lists(st.booleans(), min_size=len(raw), max_size=len(raw))))
    y[0], y[-1] = True, False
    c = CostSet(
        P=data.draw(st.floats(0.001, 1)), CD=data.draw(cost), CU=data.draw(cost),
        CDI=data.draw(cost), C_PHM=data.draw(st.floats(0, 100)),
    )
    want_t, want_d = brute_force_optimum(
        s, y, lambda tpr, fpr: qcpn(c.P, 0, c.CD, c.CU) - qcpn_star(c.P, tpr, 1 - tpr, fpr, c.CD, c.CU, c.CDI, c.C_PHM)
    )
    t, d = optimal_threshold(s, y, c)
    assert t == want_t
    assert d == pytest.approx(want_d, rel=1e-12, abs=1e-12)
    assert d >= -c.C_PHM - 1e-12 * max(1.0, c.P * c.CU)


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=40), st.data())
@settings(max_examples=150, deadline=None)
def test_recall_non_increasing(s, data):
    y = data.draw(st.lists(st.booleans(), min_size=len(s), max_size=len(s)))
    y[0] = True
    pts = sorted(pr_curve(s, y), key=lambda p: p.threshold)
    rec = [p.recall for p in pts]
    assert all(a >= b for a, b in zip(rec, rec[1:]))
    t = candidate_thresholds(s)
    assert t[0] == -math.inf and t[-1] == math.inf and np.all(np.diff(t) > 0)
