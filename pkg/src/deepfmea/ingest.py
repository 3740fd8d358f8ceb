"""Load the hydraulic test-rig dataset (or anything laid out like it).

Expected directory layout: one ``<signal_id>.txt`` per raw sensor with one
tab-separated row per cycle, plus a profile file with one row of condition
values per cycle.  Which profile values count as nominal is configuration
(:class:`LabelConfig`), not code.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import IngestError, InvariantError, ShapeMismatchError
from .model import Asset, FailureIncident, FailureMode, Signal
from .store import Store, _atomic_write, parse_matrix

log = logging.getLogger(__name__)

LABELS_FILE = "labels.records"


@dataclass(frozen=True)
class ConditionColumn:
    name: str
    failure_mode_id: str
    nominal: tuple[float, ...]
    degraded: tuple[float, ...]


@dataclass(frozen=True)
class LabelConfig:
    """Per-column nominal/degraded values of the profile file, in file column order."""

    columns: tuple[ConditionColumn, ...]
    stability_column: str | None = None
    stable: tuple[float, ...] = (0,)
    unstable: tuple[float, ...] = (1,)
    profile_file: str = "profile.txt"

    @property
    def column_names(self) -> list[str]:
        names = [c.name for c in self.columns]
        if self.stability_column is not None:
            names.append(self.stability_column)
        return names

    @classmethod
    def from_mapping(cls, d: Mapping) -> "LabelConfig":
        cols = tuple(
            ConditionColumn(
                name=str(c["name"]),
                failure_mode_id=str(c["failure_mode"]),
                nominal=tuple(float(v) for v in c["nominal"]),
                degraded=tuple(float(v) for v in c.get("degraded", ())),
            )
            for c in d["columns"]
        )
        stab = d.get("stability") or {}
        return cls(
            columns=cols,
            stability_column=stab.get("name"),
            stable=tuple(float(v) for v in stab.get("stable", (0,))),
            unstable=tuple(float(v) for v in stab.get("unstable", (1,))),
            profile_file=str(d.get("profile_file", "profile.txt")),
        )


@dataclass(frozen=True)
class CycleLabel:
    cycle_index: int
    conditions: Mapping[str, float]
    stable: bool
    health: str  # "healthy", "degraded" or "unstable" (nominal but not yet settled)
    failure_mode_ids: tuple[str, ...] = ()

    @property
    def degraded(self) -> bool:
        return self.health == "degraded"

    def to_record(self) -> dict:
        return {
            "cycle_index": self.cycle_index,
            "conditions": dict(self.conditions),
            "stable": self.stable,
            "health": self.health,
            "failure_mode_ids": list(self.failure_mode_ids),
        }

    @classmethod
    def from_record(cls, d: Mapping) -> "CycleLabel":
        return cls(
            int(d["cycle_index"]), dict(d["conditions"]), bool(d["stable"]), d["health"],
            tuple(d["failure_mode_ids"]),
        )


def derive_labels(profile_rows: Sequence[Sequence[float]], config: LabelConfig) -> list[CycleLabel]:
    """Turn profile rows into cycle labels.

    A cycle is healthy when every condition column is nominal and the
    stability flag says stable.  Any non-nominal column makes it degraded;
    every non-nominal column contributes a candidate failure mode, in
    column order.
    """
    names = config.column_names
    out = []
    for idx, row in enumerate(profile_rows):
        row = [float(v) for v in row]
        if len(row) != len(names):
            raise IngestError(f"profile row {idx}: {len(row)} values, expected {len(names)} ({', '.join(names)})")
        modes = []
        for col, v in zip(config.columns, row):
            if v in col.nominal:
                continue
            if v not in col.degraded:
                raise IngestError(f"profile row {idx}: value {v:g} of column {col.name!r} is not in the nominal map")
            modes.append(col.failure_mode_id)
        stable = True
        if config.stability_column is not None:
            flag = row[-1]
            if flag in config.stable:
                stable = True
            elif flag in config.unstable:
                stable = False
            else:
                raise IngestError(f"profile row {idx}: stability value {flag:g} is not in the nominal map")
        if modes:
            health = "degraded"
        else:
            health = "healthy" if stable else "unstable"
        out.append(CycleLabel(idx, dict(zip(names, row)), stable, health, tuple(modes)))
    return out


def labels_to_incidents(labels: Sequence[CycleLabel], asset_id: str) -> list[FailureIncident]:
    """One incident per maximal run of consecutive cycles degraded by the same mode."""
    runs: dict[str, list[list[int]]] = {}
    ordered = sorted(labels, key=lambda l: l.cycle_index)
    for lab in ordered:
        for mode in lab.failure_mode_ids:
            mode_runs = runs.setdefault(mode, [])
            if mode_runs and mode_runs[-1][1] == lab.cycle_index - 1:
                mode_runs[-1][1] = lab.cycle_index
            else:
                mode_runs.append([lab.cycle_index, lab.cycle_index])
    out = []
    for mode in sorted(runs):
        for first, last in runs[mode]:
            out.append(FailureIncident(f"INC-{mode}-{first}", asset_id, mode, (first, last)))
    return out


def save_labels(store: Store, labels: Sequence[CycleLabel]) -> None:
    lines = [json.dumps(l.to_record(), sort_keys=True) for l in labels]
    _atomic_write(store.root / LABELS_FILE, ("\n".join(lines) + "\n" if lines else "").encode("utf-8"))


def load_labels(store: Store) -> list[CycleLabel]:
    path = store.root / LABELS_FILE
    if not path.exists():
        raise IngestError(f"no cycle labels in {store.root}; run ingest first")
    with open(path, encoding="utf-8") as fh:
        return [CycleLabel.from_record(json.loads(line)) for line in fh if line.strip()]


@dataclass
class IngestCounts:
    cycles: int
    signals: int
    measurements: int
    incidents: int = 0
    healthy: int = 0
    degraded: int = 0
    unstable: int = 0


def _read(path: Path) -> tuple[bytes, np.ndarray]:
    raw = path.read_bytes()
    try:
        return raw, parse_matrix(raw)
    except ValueError as exc:
        raise IngestError(f"{path.name}: {exc}") from None


def load_dataset(
    dataset_dir: str | os.PathLike,
    store: Store,
    config: LabelConfig,
    signal_ids: Iterable[str] | None = None,
    asset_id: str | None = None,
    workers: int = 4,
) -> IngestCounts:
    """Validate every sensor file and the profile, then write them to ``store``.

    Nothing is written unless all files agree on cycle count and row length.
    """
    root = Path(dataset_dir)
    if not root.is_dir():
        raise IngestError(f"dataset directory not found: {root}")
    signals: list[Signal] = store.all(Signal)
    if signal_ids is not None:
        wanted = set(signal_ids)
        signals = [s for s in signals if s.id in wanted]
    if not signals:
        raise IngestError("no signals declared in the model")
    if asset_id is None:
        assets = store.all(Asset)
        if len(assets) != 1:
            raise IngestError(f"asset_id required: model declares {len(assets)} assets")
        asset = assets[0]
    else:
        asset = store.get(asset_id)
    for col in config.columns:
        fm = store.get(col.failure_mode_id)
        if not isinstance(fm, FailureMode):
            raise InvariantError(f"profile column {col.name!r} maps to {col.failure_mode_id!r}, not a failure mode")

    paths = {s.id: root / f"{s.id}.txt" for s in signals}
    missing = [str(p.name) for p in paths.values() if not p.exists()]
    profile_path = root / config.profile_file
    if not profile_path.exists():
        missing.append(config.profile_file)
    if missing:
        raise IngestError(f"missing file(s) in {root}: {', '.join(sorted(missing))}")

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        parsed = dict(zip(paths, pool.map(_read, paths.values())))
    _, profile = _read(profile_path)

    counts = {sid: m.shape[0] for sid, (_, m) in parsed.items()}
    counts[config.profile_file] = profile.shape[0]
    if len(set(counts.values())) != 1:
        detail = ", ".join(f"{k}={v}" for k, v in sorted(counts.items()))
        raise IngestError(f"inconsistent cycle counts: {detail}")
    for s in signals:
        expected = s.samples_per(asset.cycle_duration_s)
        got = parsed[s.id][1].shape[1]
        if got != expected:
            raise ShapeMismatchError(
                f"{s.id}.txt columns ({s.sampling_rate_hz} Hz x {asset.cycle_duration_s} s)", expected, got
            )

    labels = derive_labels(profile.tolist(), config)
    incidents = labels_to_incidents(labels, asset.id)

    for old in store.all(FailureIncident):
        if old.asset_id == asset.id:
            store.delete(old.id)
    for s in signals:
        raw, mat = parsed[s.id]
        store.put_measurement_matrix(s.id, mat, asset.id, raw=raw)
    store.put_many(incidents)
    save_labels(store, labels)

    n_cycles = profile.shape[0]
    out = IngestCounts(
        cycles=n_cycles,
        signals=len(signals),
        measurements=n_cycles * len(signals),
        incidents=len(incidents),
        healthy=sum(l.health == "healthy" for l in labels),
        degraded=sum(l.health == "degraded" for l in labels),
        unstable=sum(l.health == "unstable" for l in labels),
    )
    log.info("ingested %s", out)
    return out
