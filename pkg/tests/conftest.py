from __future__ import annotations

import numpy as np
import pytest

from deepfmea import synthetic
from deepfmea.model import (
    Asset,
    FailureMode,
    Intervention,
    Segment,
    Signal,
    SystemElement,
)
from deepfmea.modelspec import apply_model_spec, shipped_spec_path, stored_label_config
from deepfmea.ingest import load_dataset
from deepfmea.store import Store

# element hierarchy of the hydraulic rig
HYDRAULIC_TREE = [
    ("Hydraulic-System", None),
    ("Working-Circuit", "Hydraulic-System"),
    ("Pump", "Working-Circuit"),
    ("Motor", "Pump"),
    ("Valve", "Working-Circuit"),
    ("Variable Load", "Working-Circuit"),
    ("Accumulators", "Cooling & Filtration"),
    ("Cooling & Filtration", "Working-Circuit"),
    ("Cooler", "Cooling & Filtration"),
]


@pytest.fixture
def elements() -> list[SystemElement]:
    return [SystemElement(i, i, p) for i, p in HYDRAULIC_TREE]


@pytest.fixture
def base_store(tmp_path, elements) -> Store:
    """Store with the hydraulic tree, one asset and a few signals and segments."""
    st = Store(tmp_path / "store")
    st.put_many(elements)
    st.put_many([
        Asset("rig", "Hydraulic-System", "test rig", 60.0),
        Signal("PS1", "Pressure 1", ("Valve",), 100.0, "bar"),
        Signal("VS1", "Vibration", ("Pump",), 1.0, "mm/s"),
        Signal("EPS1", "Motor power", ("Motor",), 100.0, "W"),
        Signal("TS3", "Temperature 3", ("Cooler",), 1.0, "C"),
        Signal("TS4", "Temperature 4", ("Cooler",), 1.0, "C"),
        Segment("INT1", "whole cycle", 0.0, 60.0),
        Segment("INT2", "first 10 s", 0.0, 10.0),
        FailureMode("FM-COOL", "Cooling Power Decrease", "Cooler", 0.05, 5, 0, 400, 2000),
        Intervention("IV-1", "FM-COOL", "proactive", 100.0),
    ])
    return st


@pytest.fixture(scope="session")
def surrogate_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("surrogate")
    synthetic.generate(d, n_cycles=240, seed=7)
    return d


@pytest.fixture(scope="session")
def hydraulic_store(tmp_path_factory, surrogate_dir) -> Store:
    """Shipped hydraulic spec with the surrogate dataset ingested.  Treat as read-only."""
    st = Store(tmp_path_factory.mktemp("hstore"))
    apply_model_spec(shipped_spec_path(), st)
    load_dataset(surrogate_dir, st, stored_label_config(st))
    return st


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance criteria lines when that module ran."""
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
