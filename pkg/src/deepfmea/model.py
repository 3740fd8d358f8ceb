"""Entity types of the PHM data model and hierarchy/scope resolution.

All entities are frozen dataclasses that check their own invariants on
construction.  Cross-entity rules (foreign keys, tree shape) live in
:func:`validate_hierarchy` and in :mod:`deepfmea.store`.
"""

from __future__ import annotations

import dataclasses
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping

from .errors import InvariantError, UnknownIdError


class SignalSource(str, Enum):
    INTRINSIC = "intrinsic"
    CONTROL = "control"
    EXTERNAL = "external"


class Operator(str, Enum):
    DIFF = "DIFF"
    DIV = "DIV"
    ME = "ME"
    MEAN = "MEAN"
    STD = "STD"
    MIN = "MIN"
    MAX = "MAX"
    SUM = "SUM"
    SLOPE = "SLOPE"
    ABS = "ABS"

    @property
    def arity(self) -> int:
        return 2 if self in (Operator.DIFF, Operator.DIV) else 1

    @property
    def reduces(self) -> bool:
        return self not in (Operator.DIFF, Operator.DIV, Operator.ABS)


class InterventionKind(str, Enum):
    DIAGNOSTIC = "diagnostic"
    PROACTIVE = "proactive"
    REACTIVE = "reactive"


class IncidentStatus(str, Enum):
    DETECTED_PRIOR = "detected_prior"
    UNDETECTED = "undetected"
    FALSE_ALARM = "false_alarm"
    UNRECONCILED = "unreconciled"


class MethodKind(str, Enum):
    MONITORING = "monitoring"
    DIAGNOSTIC = "diagnostic"
    PROGNOSTIC = "prognostic"


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise InvariantError(msg)


def _ids(values: Iterable[str]) -> tuple[str, ...]:
    return tuple(str(v) for v in values)


@dataclass(frozen=True)
class SystemElement:
    id: str
    name: str
    parent_id: str | None = None

    def __post_init__(self):
        _require(bool(self.id), "SystemElement.id must be non-empty")


@dataclass(frozen=True)
class Asset:
    id: str
    root_element_id: str
    label: str = ""
    cycle_duration_s: float = 60.0

    def __post_init__(self):
        _require(self.cycle_duration_s > 0, f"Asset {self.id}: cycle_duration_s must be > 0")


@dataclass(frozen=True)
class Signal:
    id: str
    name: str
    element_ids: tuple[str, ...]
    sampling_rate_hz: float
    unit: str = ""
    source: SignalSource = SignalSource.INTRINSIC

    def __post_init__(self):
        object.__setattr__(self, "element_ids", _ids(self.element_ids))
        object.__setattr__(self, "source", SignalSource(self.source))
        _require(len(self.element_ids) > 0, f"Signal {self.id}: element_ids must be non-empty")
        _require(
            math.isfinite(self.sampling_rate_hz) and self.sampling_rate_hz > 0,
            f"Signal {self.id}: sampling_rate_hz must be > 0",
        )

    def samples_per(self, duration_s: float) -> int:
        return int(round(self.sampling_rate_hz * duration_s))


@dataclass(frozen=True)
class Measurement:
    """One cycle of one signal.  Stored in bulk as per-signal matrices."""

    id: str
    asset_id: str
    signal_id: str
    cycle_index: int
    start_offset_s: float
    duration_s: float
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        _require(self.cycle_index >= 0, "Measurement.cycle_index must be >= 0")
        _require(self.duration_s > 0, "Measurement.duration_s must be > 0")

    def check_rate(self, sampling_rate_hz: float) -> None:
        expected = int(round(sampling_rate_hz * self.duration_s))
        _require(
            len(self.values) == expected,
            f"Measurement {self.id}: {len(self.values)} samples, expected {expected}",
        )


@dataclass(frozen=True)
class Segment:
    id: str
    name: str
    start_s: float
    end_s: float
    method: str = "fixed_interval"

    def __post_init__(self):
        _require(self.method == "fixed_interval", f"Segment {self.id}: unsupported method {self.method!r}")
        _require(0 <= self.start_s < self.end_s, f"Segment {self.id}: need 0 <= start_s < end_s")

    @property
    def params(self) -> dict[str, float]:
        return {"start_s": self.start_s, "end_s": self.end_s}

    def check_duration(self, cycle_duration_s: float) -> None:
        _require(
            self.end_s <= cycle_duration_s + 1e-9,
            f"Segment {self.id}: end_s {self.end_s} exceeds cycle duration {cycle_duration_s}",
        )


@dataclass(frozen=True)
class NodeInput:
    ref: str
    segment_id: str | None = None


@dataclass(frozen=True)
class OperationNode:
    id: str
    operator: Operator
    inputs: tuple[NodeInput, ...]
    # only MEAN understands rate_hz: block-mean resampling to that rate
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "operator", Operator(self.operator))
        ins = tuple(i if isinstance(i, NodeInput) else NodeInput(*i) for i in self.inputs)
        object.__setattr__(self, "inputs", ins)
        object.__setattr__(self, "params", dict(self.params))
        _require(
            len(ins) == self.operator.arity,
            f"node {self.id}: {self.operator.value} takes {self.operator.arity} input(s), got {len(ins)}",
        )
        unknown = set(self.params) - {"rate_hz"}
        _require(not unknown, f"node {self.id}: unknown params {sorted(unknown)}")
        if "rate_hz" in self.params:
            _require(self.operator is Operator.MEAN, f"node {self.id}: rate_hz only valid on MEAN")
            _require(self.params["rate_hz"] > 0, f"node {self.id}: rate_hz must be > 0")

    def __hash__(self):
        return hash((self.id, self.operator, self.inputs))

    @property
    def is_resample(self) -> bool:
        return "rate_hz" in self.params


@dataclass(frozen=True)
class VirtualSensor:
    id: str
    name: str
    element_ids: tuple[str, ...]
    output_node_id: str
    nodes: tuple[OperationNode, ...]

    def __post_init__(self):
        object.__setattr__(self, "element_ids", _ids(self.element_ids))
        object.__setattr__(self, "nodes", tuple(self.nodes))
        _require(len(self.element_ids) > 0, f"VirtualSensor {self.id}: element_ids must be non-empty")
        node_ids = [n.id for n in self.nodes]
        _require(len(set(node_ids)) == len(node_ids), f"VirtualSensor {self.id}: duplicate node ids")
        _require(
            self.output_node_id in node_ids,
            f"VirtualSensor {self.id}: output node {self.output_node_id!r} not among nodes",
        )

    def node(self, node_id: str) -> OperationNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise UnknownIdError(node_id, "node")


@dataclass(frozen=True)
class FailureMode:
    id: str
    name: str
    element_id: str
    P: float = 0.0
    S: float = 0.0
    D: float = 0.0
    CD: float = 0.0
    CU: float = 0.0
    reference_interval: str = ""

    def __post_init__(self):
        _require(0 <= self.P <= 1, f"FailureMode {self.id}: P must lie in [0, 1]")
        _require(0 <= self.D <= 1, f"FailureMode {self.id}: D must lie in [0, 1]")
        _require(self.S >= 0, f"FailureMode {self.id}: S must be >= 0")
        _require(self.CD >= 0 and self.CU >= 0, f"FailureMode {self.id}: costs must be >= 0")


@dataclass(frozen=True)
class Intervention:
    id: str
    failure_mode_id: str
    kind: InterventionKind
    cost: float = 0.0
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", InterventionKind(self.kind))
        _require(self.cost >= 0, f"Intervention {self.id}: cost must be >= 0")


@dataclass(frozen=True)
class FailureIncident:
    id: str
    asset_id: str
    failure_mode_id: str
    cycle_range: tuple[int, int]
    status: IncidentStatus = IncidentStatus.UNRECONCILED

    def __post_init__(self):
        first, last = (int(c) for c in self.cycle_range)
        object.__setattr__(self, "cycle_range", (first, last))
        object.__setattr__(self, "status", IncidentStatus(self.status))
        _require(first <= last, f"FailureIncident {self.id}: first > last")

    @property
    def first(self) -> int:
        return self.cycle_range[0]

    @property
    def last(self) -> int:
        return self.cycle_range[1]


@dataclass(frozen=True)
class DetectionMethod:
    id: str
    kind: MethodKind
    input_signal_ids: tuple[str, ...] = ()
    input_virtual_sensor_ids: tuple[str, ...] = ()
    scope_element_ids: tuple[str, ...] = ()
    scope_failure_mode_ids: tuple[str, ...] = ()
    threshold: float = math.inf
    operating_cost: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", MethodKind(self.kind))
        for name in ("input_signal_ids", "input_virtual_sensor_ids", "scope_element_ids", "scope_failure_mode_ids"):
            object.__setattr__(self, name, _ids(getattr(self, name)))
        _require(self.operating_cost >= 0, f"DetectionMethod {self.id}: operating_cost must be >= 0")
        if self.kind is MethodKind.MONITORING:
            _require(
                bool(self.scope_element_ids) and not self.scope_failure_mode_ids,
                f"DetectionMethod {self.id}: monitoring scope must list elements only",
            )
        else:
            _require(
                bool(self.scope_failure_mode_ids) and not self.scope_element_ids,
                f"DetectionMethod {self.id}: {self.kind.value} scope must list failure modes only",
            )


@dataclass(frozen=True)
class MeasurementMatrix:
    """Index record for one per-signal matrix file (rows are cycles)."""

    id: str
    signal_id: str
    asset_id: str
    cycles: int
    samples: int
    duration_s: float


ENTITY_TYPES: dict[str, type] = {
    cls.__name__: cls
    for cls in (
        SystemElement,
        Asset,
        Signal,
        Segment,
        VirtualSensor,
        FailureMode,
        Intervention,
        FailureIncident,
        DetectionMethod,
        MeasurementMatrix,
    )
}


def references(entity) -> list[str]:
    """Foreign keys held by ``entity`` (excluding graph-local node ids)."""
    if isinstance(entity, SystemElement):
        return [entity.parent_id] if entity.parent_id is not None else []
    if isinstance(entity, Asset):
        return [entity.root_element_id]
    if isinstance(entity, Signal):
        return list(entity.element_ids)
    if isinstance(entity, VirtualSensor):
        local = {n.id for n in entity.nodes}
        refs = list(entity.element_ids)
        for n in entity.nodes:
            for inp in n.inputs:
                if inp.ref not in local:
                    refs.append(inp.ref)
                if inp.segment_id is not None:
                    refs.append(inp.segment_id)
        return refs
    if isinstance(entity, FailureMode):
        return [entity.element_id]
    if isinstance(entity, Intervention):
        return [entity.failure_mode_id]
    if isinstance(entity, FailureIncident):
        return [entity.asset_id, entity.failure_mode_id]
    if isinstance(entity, DetectionMethod):
        return [
            *entity.input_signal_ids,
            *entity.input_virtual_sensor_ids,
            *entity.scope_element_ids,
            *entity.scope_failure_mode_ids,
        ]
    if isinstance(entity, MeasurementMatrix):
        return [entity.signal_id, entity.asset_id]
    return []


def _plain(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, Mapping):
        return {k: _plain(v) for k, v in value.items()}
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    return value


def to_record(entity) -> dict[str, Any]:
    rec = {"type": type(entity).__name__, "id": entity.id}
    for f in dataclasses.fields(entity):
        if f.name != "id":
            rec[f.name] = _plain(getattr(entity, f.name))
    return rec


def from_record(rec: Mapping[str, Any]):
    rec = dict(rec)
    kind = rec.pop("type", None)
    if kind not in ENTITY_TYPES:
        raise InvariantError(f"unknown entity type {kind!r}")
    cls = ENTITY_TYPES[kind]
    if cls is VirtualSensor:
        rec["nodes"] = tuple(
            OperationNode(
                id=n["id"],
                operator=n["operator"],
                inputs=tuple(NodeInput(i["ref"], i.get("segment_id")) for i in n["inputs"]),
                params=n.get("params", {}),
            )
            for n in rec["nodes"]
        )
    if cls is DetectionMethod and isinstance(rec.get("threshold"), str):
        rec["threshold"] = float(rec["threshold"])
    if cls is FailureIncident:
        rec["cycle_range"] = tuple(rec["cycle_range"])
    return cls(**rec)


# -- hierarchy --------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    element_id: str
    rule: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.element_id}: {self.rule}" + (f" ({self.detail})" if self.detail else "")


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_hierarchy(elements: Iterable[SystemElement]) -> ValidationReport:
    """Check that ``elements`` form one rooted tree.

    Rules reported: ``duplicate-id``, ``dangling-parent``, ``self-loop``,
    ``cycle``, ``multiple-roots``, ``no-root``, ``duplicate-sibling-name``.
    """
    elements = list(elements)
    out: list[Violation] = []
    by_id: dict[str, SystemElement] = {}
    for e in elements:
        if e.id in by_id:
            out.append(Violation(e.id, "duplicate-id"))
        else:
            by_id[e.id] = e

    roots = [e.id for e in by_id.values() if e.parent_id is None]
    if len(roots) > 1:
        for r in roots:
            out.append(Violation(r, "multiple-roots", f"{len(roots)} roots"))
    elif not roots and by_id:
        out.append(Violation(next(iter(by_id)), "no-root"))

    for e in by_id.values():
        if e.parent_id is None:
            continue
        if e.parent_id == e.id:
            out.append(Violation(e.id, "self-loop"))
        elif e.parent_id not in by_id:
            out.append(Violation(e.id, "dangling-parent", e.parent_id))

    # walk parents; anything that never reaches a root sits on or under a cycle
    reported: set[str] = set()
    for start in by_id:
        path: list[str] = []
        seen: set[str] = set()
        cur: str | None = start
        while cur is not None and cur in by_id and cur not in seen:
            seen.add(cur)
            path.append(cur)
            cur = by_id[cur].parent_id
        if cur is not None and cur in seen:
            loop = path[path.index(cur):]
            key = min(loop)
            if len(loop) > 1 and key not in reported:
                reported.add(key)
                out.append(Violation(key, "cycle", " -> ".join(loop + [cur])))

    siblings: dict[tuple[str | None, str], list[str]] = defaultdict(list)
    for e in by_id.values():
        siblings[(e.parent_id, e.name)].append(e.id)
    for (parent, name), ids in siblings.items():
        if len(ids) > 1:
            for i in sorted(ids):
                out.append(Violation(i, "duplicate-sibling-name", f"{name!r} under {parent!r}"))

    return ValidationReport(tuple(out))


class Hierarchy:
    """Read-only index over a validated element tree."""

    def __init__(self, elements: Iterable[SystemElement]):
        self.elements: dict[str, SystemElement] = {e.id: e for e in elements}
        self.children: dict[str, list[str]] = defaultdict(list)
        for e in self.elements.values():
            if e.parent_id is not None:
                self.children[e.parent_id].append(e.id)
        for kids in self.children.values():
            kids.sort()
        roots = [e.id for e in self.elements.values() if e.parent_id is None]
        self.root: str | None = roots[0] if len(roots) == 1 else None

    def __contains__(self, element_id: str) -> bool:
        return element_id in self.elements

    def _check(self, element_id: str) -> None:
        if element_id not in self.elements:
            raise UnknownIdError(element_id, "element")

    def resolve_subtree(self, element_id: str) -> set[str]:
        self._check(element_id)
        out: set[str] = set()
        stack = [element_id]
        while stack:
            cur = stack.pop()
            if cur in out:
                continue
            out.add(cur)
            stack.extend(self.children.get(cur, ()))
        return out

    def closure(self, element_ids: Iterable[str]) -> set[str]:
        out: set[str] = set()
        for e in element_ids:
            out |= self.resolve_subtree(e)
        return out

    def ancestors(self, element_id: str) -> list[str]:
        """Ancestors of ``element_id``, nearest first (excluding itself)."""
        self._check(element_id)
        out: list[str] = []
        cur = self.elements[element_id].parent_id
        while cur is not None and cur not in out and cur != element_id:
            out.append(cur)
            cur = self.elements[cur].parent_id if cur in self.elements else None
        return out

    def path(self, element_id: str) -> list[str]:
        """Names from the root down to ``element_id``."""
        ids = [element_id, *self.ancestors(element_id)][::-1]
        return [self.elements[i].name for i in ids]

    def leaves(self) -> set[str]:
        return {i for i in self.elements if not self.children.get(i)}

    def signals_for_scope(self, element_ids: Iterable[str], signals: Iterable[Signal]) -> set[str]:
        scope = self.closure(element_ids)
        return {s.id for s in signals if scope.intersection(s.element_ids)}


def resolve_subtree(elements: Iterable[SystemElement], element_id: str) -> set[str]:
    return Hierarchy(elements).resolve_subtree(element_id)


def signals_for_scope(
    elements: Iterable[SystemElement], signals: Iterable[Signal], element_ids: Iterable[str]
) -> set[str]:
    return Hierarchy(elements).signals_for_scope(element_ids, signals)
