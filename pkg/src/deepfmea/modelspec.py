"""Declarative model definition (YAML) and its application to a store.

The grammar is documented in ``docs/model-spec.md``; the shipped
``hydraulic.yaml`` is the canonical example.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import DeepFMEAError, DuplicateIdError, GraphCycleError, InvariantError, SpecError
from .features import output_kind, topological_order
from .ingest import LabelConfig
from .model import (
    Asset,
    DetectionMethod,
    FailureMode,
    Intervention,
    NodeInput,
    OperationNode,
    Segment,
    Signal,
    SystemElement,
    VirtualSensor,
    references,
    to_record,
    validate_hierarchy,
)
from .store import Store


class _Map(dict):
    line: int | None = None


class _Loader(yaml.SafeLoader):
    pass


def _construct_map(loader, node):
    m = _Map(loader.construct_mapping(node, deep=True))
    m.line = node.start_mark.line + 1
    return m


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_map)


def _line(obj) -> int | None:
    return getattr(obj, "line", None)


@dataclass
class ModelSpec:
    name: str
    elements: list[SystemElement]
    assets: list[Asset]
    signals: list[Signal]
    segments: list[Segment]
    virtual_sensors: list[VirtualSensor]
    failure_modes: list[FailureMode]
    interventions: list[Intervention]
    detection_methods: list[DetectionMethod]
    labels: LabelConfig | None = None
    cycle_duration_s: float = 60.0
    source_lines: dict[str, int] = field(default_factory=dict)

    def entities(self) -> list:
        return [
            *self.elements, *self.assets, *self.signals, *self.segments, *self.virtual_sensors,
            *self.failure_modes, *self.interventions, *self.detection_methods,
        ]

    @property
    def hash(self) -> str:
        payload = {
            "entities": sorted((to_record(e) for e in self.entities()), key=lambda r: (r["type"], r["id"])),
            "labels": None if self.labels is None else _label_record(self.labels),
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()


def _label_record(cfg: LabelConfig) -> dict:
    return {
        "columns": [[c.name, c.failure_mode_id, list(c.nominal), list(c.degraded)] for c in cfg.columns],
        "stability": [cfg.stability_column, list(cfg.stable), list(cfg.unstable)],
        "profile_file": cfg.profile_file,
    }


def _get(d: Mapping, key: str, where: str, default: Any = ...):
    if key in d:
        return d[key]
    if default is ...:
        raise SpecError(f"{where}: missing key {key!r}", _line(d))
    return default


def _inputs(raw, where: str, line) -> tuple[NodeInput, ...]:
    out = []
    for item in raw:
        if isinstance(item, str):
            out.append(NodeInput(item))
        elif isinstance(item, (list, tuple)) and 1 <= len(item) <= 2:
            out.append(NodeInput(str(item[0]), None if len(item) == 1 or item[1] is None else str(item[1])))
        elif isinstance(item, Mapping):
            out.append(NodeInput(str(item["ref"]), item.get("segment")))
        else:
            raise SpecError(f"{where}: cannot read input {item!r}", line)
    return tuple(out)


def parse_model_spec(text: str) -> ModelSpec:
    """Parse spec text; structural problems raise :class:`SpecError` with a line number."""
    try:
        doc = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SpecError(f"YAML parse error: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None) from None
    if not isinstance(doc, Mapping):
        raise SpecError("model spec must be a mapping at top level", 1)
    lines: dict[str, int] = {}

    def build(kind: str, item: Mapping, fn):
        try:
            ent = fn(item)
        except SpecError:
            raise
        except (InvariantError, ValueError, TypeError, KeyError) as exc:
            raise SpecError(f"{kind} {item.get('id', '?')!r}: {exc}", _line(item)) from None
        if _line(item) is not None:
            lines.setdefault(ent.id, _line(item))
        return ent

    duration = float(doc.get("cycle_duration_s", 60.0))
    elements = [
        build("element", e, lambda e: SystemElement(str(e["id"]), str(e.get("name", e["id"])), e.get("parent")))
        for e in doc.get("elements", [])
    ]
    roots = [e.id for e in elements if e.parent_id is None]
    assets = [
        build(
            "asset",
            a,
            lambda a: Asset(
                str(a["id"]), str(a.get("root", roots[0] if len(roots) == 1 else "")), str(a.get("label", "")),
                float(a.get("cycle_duration_s", duration)),
            ),
        )
        for a in doc.get("assets", [])
    ]
    signals = [
        build(
            "signal",
            s,
            lambda s: Signal(
                str(s["id"]), str(s.get("name", s["id"])), tuple(s["elements"]), float(s["rate_hz"]),
                str(s.get("unit", "")), s.get("source", "intrinsic"),
            ),
        )
        for s in doc.get("signals", [])
    ]
    segments = [
        build(
            "segment",
            s,
            lambda s: Segment(
                str(s["id"]), str(s.get("name", s["id"])), float(s["start_s"]), float(s["end_s"]),
                s.get("method", "fixed_interval"),
            ),
        )
        for s in doc.get("segments", [])
    ]

    def vs_from(v):
        nodes = tuple(
            OperationNode(
                str(_get(n, "id", f"virtual sensor {v.get('id')}")),
                str(_get(n, "op", f"node {n.get('id')}")),
                _inputs(_get(n, "inputs", f"node {n.get('id')}"), f"node {n.get('id')}", _line(n)),
                dict(n.get("params", {})),
            )
            for n in v["nodes"]
        )
        return VirtualSensor(str(v["id"]), str(v.get("name", v["id"])), tuple(v["elements"]), str(v["output"]), nodes)

    sensors = [build("virtual sensor", v, vs_from) for v in doc.get("virtual_sensors", [])]
    sig_by_id = {s.id: s for s in signals}
    for grid in doc.get("feature_grid", []):
        sensors.extend(_expand_grid(grid, sig_by_id, {s.id for s in segments}, lines))

    failure_modes = [
        build(
            "failure mode",
            f,
            lambda f: FailureMode(
                str(f["id"]), str(f.get("name", f["id"])), str(f["element"]),
                float(f.get("P", 0)), float(f.get("S", 0)), float(f.get("D", 0)),
                float(f.get("CD", 0)), float(f.get("CU", 0)), str(f.get("reference_interval", "")),
            ),
        )
        for f in doc.get("failure_modes", [])
    ]
    interventions = [
        build(
            "intervention",
            i,
            lambda i: Intervention(
                str(i["id"]), str(i["failure_mode"]), i["kind"], float(i.get("cost", 0)), str(i.get("description", ""))
            ),
        )
        for i in doc.get("interventions", [])
    ]

    all_vs = [v.id for v in sensors]

    def method_from(m):
        ins = m.get("inputs", {}) or {}
        vs_ids = ins.get("virtual_sensors", [])
        if vs_ids == "*":
            vs_ids = all_vs
        return DetectionMethod(
            str(m["id"]),
            m.get("kind", "monitoring"),
            tuple(ins.get("signals", [])),
            tuple(vs_ids),
            tuple(m.get("scope_elements", [])),
            tuple(m.get("scope_failure_modes", [])),
            float(m.get("threshold", float("inf"))),
            float(m.get("operating_cost", 0.0)),
        )

    methods = [build("detection method", m, method_from) for m in doc.get("detection_methods", [])]
    labels = None
    if doc.get("dataset"):
        try:
            labels = LabelConfig.from_mapping(doc["dataset"])
        except (KeyError, ValueError, TypeError) as exc:
            raise SpecError(f"dataset section: {exc}", _line(doc["dataset"])) from None
    return ModelSpec(
        str(doc.get("name", "model")), elements, assets, signals, segments, sensors, failure_modes,
        interventions, methods, labels, duration, lines,
    )


_GRID_OPS = {"MEAN", "STD", "MIN", "MAX", "SUM", "SLOPE", "ME"}


def _expand_grid(grid: Mapping, signals: Mapping[str, Signal], segment_ids: set[str], lines) -> list[VirtualSensor]:
    """One scalar virtual sensor per (signal, segment, operator) combination."""
    sig_ids = grid.get("signals", "*")
    if sig_ids == "*":
        sig_ids = list(signals)
    seg_ids = grid.get("segments", [])
    ops = grid.get("operators", [])
    out = []
    for sid in sig_ids:
        if sid not in signals:
            raise SpecError(f"feature_grid: unknown signal {sid!r}", _line(grid))
        for seg in seg_ids:
            if seg not in segment_ids:
                raise SpecError(f"feature_grid: unknown segment {seg!r}", _line(grid))
            for op in ops:
                if op not in _GRID_OPS:
                    raise SpecError(f"feature_grid: {op!r} is not a reducing operator", _line(grid))
                vid = f"{sid}_{op}_{seg}"
                out.append(
                    VirtualSensor(vid, vid, signals[sid].element_ids, "out", (OperationNode("out", op, ((sid, seg),)),))
                )
                if _line(grid) is not None:
                    lines.setdefault(vid, _line(grid))
    return out


def load_model_spec(path: str | Path) -> ModelSpec:
    return parse_model_spec(Path(path).read_text(encoding="utf-8"))


def shipped_spec_path(name: str = "hydraulic.yaml") -> Path:
    return Path(str(resources.files("deepfmea") / "data" / name))


def check_model_spec(spec: ModelSpec) -> list[str]:
    """Every cross-reference and invariant problem, as readable strings."""
    out: list[str] = []

    def at(eid: str) -> str:
        line = spec.source_lines.get(eid)
        return f"line {line}: " if line else ""

    report = validate_hierarchy(spec.elements)
    out.extend(f"{at(v.element_id)}hierarchy: {v}" for v in report.violations)

    ids: dict[str, str] = {}
    for e in spec.entities():
        kind = type(e).__name__
        if e.id in ids:
            out.append(f"{at(e.id)}duplicate id {e.id!r} ({ids[e.id]} and {kind})")
        ids.setdefault(e.id, kind)
    for e in spec.entities():
        for ref in references(e):
            if ref not in ids:
                out.append(f"{at(e.id)}{type(e).__name__} {e.id!r} references unknown id {ref!r}")

    root = next((e.id for e in spec.elements if e.parent_id is None), None)
    for a in spec.assets:
        if a.root_element_id != root:
            out.append(f"{at(a.id)}asset {a.id!r} must reference the root element {root!r}")
        for s in spec.segments:
            if s.end_s > a.cycle_duration_s + 1e-9:
                out.append(f"{at(s.id)}segment {s.id!r} ends after the {a.cycle_duration_s} s cycle")

    sensors = {v.id: v for v in spec.virtual_sensors}
    for v in spec.virtual_sensors:
        local = {n.id for n in v.nodes}
        for n in v.nodes:
            for inp in n.inputs:
                if inp.ref not in local and ids.get(inp.ref) not in ("Signal", "VirtualSensor"):
                    if inp.ref in ids:
                        out.append(f"{at(v.id)}node {v.id}/{n.id}: {inp.ref!r} is not a signal or virtual sensor")
                if inp.segment_id is not None and ids.get(inp.segment_id) not in (None, "Segment"):
                    out.append(f"{at(v.id)}node {v.id}/{n.id}: {inp.segment_id!r} is not a segment")
                if inp.ref in ids and ids[inp.ref] == "Signal" and inp.segment_id is None:
                    out.append(f"{at(v.id)}node {v.id}/{n.id}: signal input {inp.ref!r} needs a segment")
        try:
            topological_order(v)
            output_kind(v, sensors)
        except GraphCycleError as exc:
            out.append(f"{at(v.id)}virtual sensor {v.id!r}: {exc}")
        except DeepFMEAError:
            pass
    for m in spec.detection_methods:
        for vid in m.input_virtual_sensor_ids:
            if vid in sensors:
                try:
                    if output_kind(sensors[vid], sensors) != "scalar":
                        out.append(f"{at(m.id)}method {m.id!r}: input {vid!r} is vector-valued")
                except GraphCycleError:
                    pass
    if spec.labels is not None:
        fm_ids = {f.id for f in spec.failure_modes}
        for c in spec.labels.columns:
            if c.failure_mode_id not in fm_ids:
                out.append(f"dataset column {c.name!r} maps to unknown failure mode {c.failure_mode_id!r}")
    return out


SPEC_HASH_FILE = "spec.sha256"


def apply_model_spec(spec: ModelSpec | str | Path, store: Store) -> ModelSpec:
    """Write every entity of ``spec`` to ``store`` in one batch.

    Entities already present with identical content are skipped, so
    re-applying a spec is a no-op.
    """
    if not isinstance(spec, ModelSpec):
        spec = load_model_spec(spec)
    problems = check_model_spec(spec)
    if problems:
        raise SpecError("model spec failed integrity checks", violations=problems)
    try:
        store.put_many(spec.entities(), skip_identical=True)
    except DuplicateIdError as exc:
        raise SpecError("model spec conflicts with the store", violations=[f"{exc.entity_id!r} exists with different content"]) from None
    except DeepFMEAError as exc:
        raise SpecError("model spec rejected by the store", violations=[str(exc)]) from None
    (store.root / SPEC_HASH_FILE).write_text(spec.hash + "\n", encoding="utf-8")
    if spec.labels is not None:
        (store.root / "labels.config.json").write_text(
            json.dumps(_label_record(spec.labels), sort_keys=True) + "\n", encoding="utf-8"
        )
    return spec


def stored_label_config(store: Store) -> LabelConfig | None:
    path = store.root / "labels.config.json"
    if not path.exists():
        return None
    d = json.loads(path.read_text(encoding="utf-8"))
    (stab_name, stable, unstable) = d["stability"]
    return LabelConfig.from_mapping(
        {
            "columns": [
                {"name": n, "failure_mode": fm, "nominal": nom, "degraded": deg} for n, fm, nom, deg in d["columns"]
            ],
            "stability": {"name": stab_name, "stable": stable, "unstable": unstable},
            "profile_file": d["profile_file"],
        }
    )


def stored_spec_hash(store: Store) -> str:
    path = store.root / SPEC_HASH_FILE
    return path.read_text(encoding="utf-8").strip() if path.exists() else ""
