from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deepfmea.errors import InvariantError, UnknownIdError
from deepfmea.model import (
    DetectionMethod,
    FailureIncident,
    FailureMode,
    Hierarchy,
    Intervention,
    Measurement,
    NodeInput,
    OperationNode,
    Segment,
    Signal,
    SystemElement,
    VirtualSensor,
    from_record,
    references,
    resolve_subtree,
    signals_for_scope,
    to_record,
    validate_hierarchy,
)

TABLE2 = [
    Signal("EPS1", "EPS1", ("Motor",), 100),
    Signal("VS1", "VS1", ("Pump",), 1),
    Signal("PS1", "PS1", ("Valve",), 100),
    Signal("TS3", "TS3", ("Cooler",), 1),
    Signal("TS4", "TS4", ("Cooler",), 1),
]


def rules(report):
    return {v.rule for v in report.violations}


def test_table1_validates(elements):
    assert validate_hierarchy(elements).ok


def test_self_loop_reported(elements):
    bad = elements + [SystemElement("X", "X", "X")]
    rep = validate_hierarchy(bad)
    assert not rep.ok
    assert any(v.element_id == "X" and v.rule == "self-loop" for v in rep.violations)


def test_two_roots(elements):
    rep = validate_hierarchy(elements + [SystemElement("Other", "Other")])
    assert "multiple-roots" in rules(rep)
    assert {v.element_id for v in rep.violations} == {"Hydraulic-System", "Other"}


def test_longer_cycle_and_dangling():
    els = [
        SystemElement("R", "R"),
        SystemElement("A", "A", "B"),
        SystemElement("B", "B", "A"),
        SystemElement("C", "C", "ghost"),
    ]
    rep = validate_hierarchy(els)
    assert {"cycle", "dangling-parent"} <= rules(rep)


def test_duplicate_sibling_names():
    els = [SystemElement("R", "R"), SystemElement("a", "pump", "R"), SystemElement("b", "pump", "R")]
    assert "duplicate-sibling-name" in rules(validate_hierarchy(els))


def test_duplicate_ids():
    els = [SystemElement("R", "R"), SystemElement("R", "R2")]
    assert "duplicate-id" in rules(validate_hierarchy(els))


def test_resolve_subtree_examples(elements):
    assert resolve_subtree(elements, "Pump") == {"Pump", "Motor"}
    assert resolve_subtree(elements, "Motor") == {"Motor"}
    assert resolve_subtree(elements, "Hydraulic-System") == {e.id for e in elements}
    with pytest.raises(UnknownIdError):
        resolve_subtree(elements, "Nope")


def test_signals_for_scope_examples(elements):
    assert signals_for_scope(elements, TABLE2, {"Pump"}) == {"EPS1", "VS1"}
    assert signals_for_scope(elements, TABLE2, {"Cooler"}) == {"TS3", "TS4"}
    assert signals_for_scope(elements, TABLE2, set()) == set()


def test_hierarchy_helpers(elements):
    h = Hierarchy(elements)
    assert h.root == "Hydraulic-System"
    assert h.ancestors("Motor") == ["Pump", "Working-Circuit", "Hydraulic-System"]
    assert h.path("Cooler") == ["Hydraulic-System", "Working-Circuit", "Cooling & Filtration", "Cooler"]
    assert h.leaves() == {"Motor", "Valve", "Variable Load", "Accumulators", "Cooler"}


@st.composite
def random_trees(draw):
    n = draw(st.integers(1, 25))
    parents = [None] + [draw(st.integers(0, i - 1)) for i in range(1, n)]
    return [SystemElement(f"e{i}", f"n{i}", None if p is None else f"e{p}") for i, p in enumerate(parents)]


@given(random_trees())
@settings(max_examples=150, deadline=None)
def test_tree_properties(els):
    assert validate_hierarchy(els).ok
    h = Hierarchy(els)
    leaves = h.leaves()
    union = set()
    for leaf in leaves:
        union |= h.resolve_subtree(leaf)
    assert union == leaves
    for e in els:
        sub = h.resolve_subtree(e.id)
        for anc in h.ancestors(e.id):
            assert sub <= h.resolve_subtree(anc)
        # closed under children
        for c in sub:
            assert set(h.children.get(c, ())) <= sub


@given(random_trees(), st.data())
@settings(max_examples=100, deadline=None)
def test_signals_for_scope_monotone(els, data):
    ids = [e.id for e in els]
    sigs = [
        Signal(f"s{i}", "s", tuple(data.draw(st.lists(st.sampled_from(ids), min_size=1, max_size=3))), 1.0)
        for i in range(data.draw(st.integers(0, 10)))
    ]
    s1 = set(data.draw(st.lists(st.sampled_from(ids), max_size=4)))
    s2 = s1 | set(data.draw(st.lists(st.sampled_from(ids), max_size=4)))
    assert signals_for_scope(els, sigs, s1) <= signals_for_scope(els, sigs, s2)


def test_type_invariants():
    with pytest.raises(InvariantError):
        Signal("s", "s", (), 1.0)
    with pytest.raises(InvariantError):
        Signal("s", "s", ("a",), 0.0)
    with pytest.raises(InvariantError):
        Segment("x", "x", 10.0, 10.0)
    with pytest.raises(InvariantError):
        FailureMode("f", "f", "e", P=1.5)
    with pytest.raises(InvariantError):
        FailureMode("f", "f", "e", CU=-1)
    with pytest.raises(InvariantError):
        Intervention("i", "f", "diagnostic", cost=-1)
    with pytest.raises(InvariantError):
        FailureIncident("i", "a", "f", (5, 4))
    with pytest.raises(InvariantError):
        OperationNode("n", "DIFF", (NodeInput("a"),))
    with pytest.raises(InvariantError):
        OperationNode("n", "STD", (NodeInput("a"),), {"rate_hz": 1.0})
    with pytest.raises(ValueError):
        OperationNode("n", "FFT", (NodeInput("a"),))
    with pytest.raises(InvariantError):
        DetectionMethod("d", "monitoring", scope_failure_mode_ids=("f",))
    with pytest.raises(InvariantError):
        DetectionMethod("d", "diagnostic", scope_element_ids=("e",))
    with pytest.raises(InvariantError):
        VirtualSensor("v", "v", ("e",), "missing", (OperationNode("n", "ABS", (NodeInput("a"),)),))


def test_measurement_rate_check():
    m = Measurement("m", "a", "s", 0, 0.0, 60.0, [0.0] * 60)
    m.check_rate(1.0)
    with pytest.raises(InvariantError):
        m.check_rate(100.0)
    Segment("INT13", "INT13", 50.01, 60.0).check_duration(60.0)
    with pytest.raises(InvariantError):
        Segment("late", "late", 50.0, 61.0).check_duration(60.0)


def test_record_roundtrip_and_references():
    vs = VirtualSensor(
        "dT", "dT", ("Cooler",), "me",
        (
            OperationNode("d", "DIFF", (NodeInput("TS3", "INT1"), NodeInput("TS4", "INT1"))),
            OperationNode("me", "ME", (NodeInput("d"),)),
        ),
    )
    dm = DetectionMethod("DM", "monitoring", (), ("dT",), ("Cooler",))
    for e in (vs, dm, FailureIncident("I", "rig", "FM", (1, 3)), TABLE2[0]):
        assert from_record(to_record(e)) == e
    assert to_record(dm)["threshold"] == "inf"
    assert math.isinf(from_record(to_record(dm)).threshold)
    assert sorted(references(vs)) == sorted(["Cooler", "TS3", "INT1", "TS4", "INT1"])
