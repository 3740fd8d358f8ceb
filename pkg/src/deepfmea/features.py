"""Virtual-sensor evaluation: segments, atomic operators, and operation graphs.

Values flow through graphs as :class:`Series`.  A series is either a
scalar or a sampled vector that remembers the time offset (seconds into
the cycle) and the sampling rate of every sample, so a derived vector can
still be restricted to a segment further downstream.

Evaluation is batched over cycles: a vector series holds a ``(cycles,
samples)`` array, a scalar series a ``(cycles,)`` array.  Every operator
works row by row with the same numpy calls that a single-cycle evaluation
would make, so batch and single-cycle results are bitwise identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DivisionError,
    EmptyWindowError,
    GraphCycleError,
    MissingMeasurementError,
    OperatorError,
    PreconditionError,
    UnknownIdError,
)
from .model import Measurement, NodeInput, OperationNode, Operator, Segment, Signal, VirtualSensor, to_record

log = logging.getLogger(__name__)

EPS_DIV = 1e-12
_OFFSET_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Series:
    values: np.ndarray
    offsets: np.ndarray | None = None  # None for scalars
    rate_hz: float | None = None

    @property
    def is_scalar(self) -> bool:
        return self.offsets is None

    @staticmethod
    def scalar(value) -> "Series":
        return Series(np.asarray(value, dtype=float))

    @staticmethod
    def vector(values, rate_hz: float, offsets=None) -> "Series":
        values = np.asarray(values, dtype=float)
        n = values.shape[-1]
        if offsets is None:
            offsets = np.arange(n) / rate_hz
        return Series(values, np.asarray(offsets, dtype=float), float(rate_hz))

    def __len__(self) -> int:
        if self.is_scalar:
            raise TypeError("scalar series has no length")
        return self.values.shape[-1]


def window_indices(offsets: np.ndarray, start_s: float, end_s: float) -> np.ndarray:
    """Sample positions whose offset lies in ``[start_s, end_s]`` (both inclusive)."""
    return np.flatnonzero((offsets >= start_s - _OFFSET_TOL) & (offsets <= end_s + _OFFSET_TOL))


def restrict_series(series: Series, segment: Segment) -> Series:
    if series.is_scalar:
        raise OperatorError(f"cannot restrict a scalar to segment {segment.id!r}")
    idx = window_indices(series.offsets, segment.start_s, segment.end_s)
    if idx.size == 0:
        raise EmptyWindowError(
            f"segment {segment.id!r} [{segment.start_s}, {segment.end_s}] s selects no samples"
        )
    lo, hi = int(idx[0]), int(idx[-1]) + 1
    if hi - lo == idx.size:
        values = series.values[..., lo:hi]
    else:
        values = series.values[..., idx]
    return Series(values, series.offsets[idx], series.rate_hz)


def restrict_to_segment(measurement: Measurement, segment: Segment) -> np.ndarray:
    """Samples of one measurement inside ``segment``; sample ``i`` sits at ``i / rate``."""
    rate = len(measurement.values) / measurement.duration_s
    if segment.end_s > measurement.duration_s + _OFFSET_TOL:
        raise PreconditionError(
            f"segment {segment.id!r} ends at {segment.end_s} s, measurement lasts {measurement.duration_s} s"
        )
    return restrict_series(Series.vector(measurement.values, rate), segment).values


# -- operators ------------------------------------------------------------------


def _binary(op: Operator, a: Series, b: Series) -> Series:
    if not a.is_scalar and not b.is_scalar:
        if not math.isclose(a.rate_hz, b.rate_hz):
            raise OperatorError(
                f"{op.value}: sampling rates differ ({a.rate_hz} vs {b.rate_hz} Hz); resample with MEAN rate_hz"
            )
        if len(a) != len(b):
            raise OperatorError(f"{op.value}: vector lengths differ ({len(a)} vs {len(b)})")
    av, bv = a.values, b.values
    if a.is_scalar and not b.is_scalar:
        av = av[..., None]
    elif b.is_scalar and not a.is_scalar:
        bv = bv[..., None]
    if op is Operator.DIFF:
        out = av - bv
    else:
        out = av / np.where(np.abs(bv) < EPS_DIV, np.nan, bv)
    like = a if not a.is_scalar else b
    return Series(out, like.offsets, like.rate_hz)


def _reduce(op: Operator, a: Series, node: OperationNode | None = None) -> Series:
    v = a.values
    if a.is_scalar:
        if op is Operator.ABS:
            return Series(np.abs(v))
        raise OperatorError(f"{op.value} needs a vector input, got a scalar")
    n = v.shape[-1]
    if op is Operator.ABS:
        return Series(np.abs(v), a.offsets, a.rate_hz)
    if n == 0:
        raise OperatorError(f"{op.value} of an empty vector")
    if op is Operator.MEAN and node is not None and node.is_resample:
        return _resample_mean(a, node.params["rate_hz"])
    if op is Operator.ME:
        return Series(np.median(v, axis=-1))
    if op is Operator.MEAN:
        return Series(np.mean(v, axis=-1))
    if op is Operator.STD:
        return Series(np.std(v, axis=-1))
    if op is Operator.MIN:
        return Series(np.min(v, axis=-1))
    if op is Operator.MAX:
        return Series(np.max(v, axis=-1))
    if op is Operator.SUM:
        return Series(np.sum(v, axis=-1))
    if op is Operator.SLOPE:
        if n < 2:
            raise OperatorError("SLOPE needs at least 2 samples")
        x = np.arange(n, dtype=float)
        xc = x - x.mean()
        yc = v - np.mean(v, axis=-1)[..., None]
        return Series(np.sum(xc * yc, axis=-1) / np.sum(xc * xc))
    raise OperatorError(f"unsupported unary operator {op.value}")


def _resample_mean(a: Series, rate_hz: float) -> Series:
    ratio = a.rate_hz / rate_hz
    block = int(round(ratio))
    if block < 1 or abs(ratio - block) > 1e-9:
        raise OperatorError(f"MEAN resample: {a.rate_hz} Hz -> {rate_hz} Hz is not an integer downsample")
    n = a.values.shape[-1]
    if n % block:
        raise OperatorError(f"MEAN resample: {n} samples do not split into blocks of {block}")
    shaped = a.values.reshape(*a.values.shape[:-1], n // block, block)
    return Series(np.mean(shaped, axis=-1), a.offsets[::block], float(rate_hz))


def apply_series(op: Operator, inputs: Sequence[Series], node: OperationNode | None = None) -> Series:
    op = Operator(op)
    if len(inputs) != op.arity:
        raise OperatorError(f"{op.value} takes {op.arity} input(s), got {len(inputs)}")
    if op.arity == 2:
        return _binary(op, inputs[0], inputs[1])
    return _reduce(op, inputs[0], node)


def _as_series(x) -> Series:
    if isinstance(x, Series):
        return x
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return Series.scalar(arr)
    return Series.vector(arr, 1.0)


def apply_operator(op: Operator | str, inputs: Sequence, node: OperationNode | None = None):
    """Apply one atomic operation to single-cycle inputs (scalars or 1-D vectors).

    Division by a value whose magnitude is below ``EPS_DIV`` raises
    :class:`DivisionError`.  Returns a float or a 1-D array.
    """
    op = Operator(op)
    series = [_as_series(x) for x in inputs]
    if op is Operator.DIV:
        b = series[1].values
        if np.any(np.abs(b) < EPS_DIV):
            raise DivisionError(f"divisor magnitude below {EPS_DIV}")
    out = apply_series(op, series, node)
    if out.is_scalar:
        return float(out.values)
    return out.values


# -- graph structure --------------------------------------------------------------


def topological_order(vs: VirtualSensor) -> list[str]:
    """Node ids so that each node follows every node it reads from."""
    local = {n.id: n for n in vs.nodes}
    state: dict[str, int] = {}  # 1 = on stack, 2 = done
    order: list[str] = []

    for start in local:
        if start in state:
            continue
        stack: list[tuple[str, Iterable[str]]] = [(start, iter(_local_deps(local[start], local)))]
        state[start] = 1
        while stack:
            node_id, deps = stack[-1]
            nxt = next(deps, None)
            if nxt is None:
                stack.pop()
                state[node_id] = 2
                order.append(node_id)
            elif state.get(nxt) == 1:
                path = [s[0] for s in stack]
                raise GraphCycleError(path[path.index(nxt):] + [nxt])
            elif nxt not in state:
                state[nxt] = 1
                stack.append((nxt, iter(_local_deps(local[nxt], local))))
    return order


def _local_deps(node: OperationNode, local: Mapping[str, OperationNode]) -> list[str]:
    return [i.ref for i in node.inputs if i.ref in local]


def output_kind(vs: VirtualSensor, sensors: Mapping[str, VirtualSensor], _seen: frozenset = frozenset()) -> str:
    """``"scalar"`` or ``"vector"``, inferred statically from the graph."""
    if vs.id in _seen:
        raise GraphCycleError([*sorted(_seen), vs.id])
    local = {n.id: n for n in vs.nodes}
    kinds: dict[str, str] = {}
    for node_id in topological_order(vs):
        node = local[node_id]
        ins = []
        for inp in node.inputs:
            if inp.ref in local:
                ins.append(kinds[inp.ref])
            elif inp.ref in sensors:
                ins.append(output_kind(sensors[inp.ref], sensors, _seen | {vs.id}))
            else:
                ins.append("vector")
        op = node.operator
        if op is Operator.ABS:
            kinds[node_id] = ins[0]
        elif op.arity == 2:
            kinds[node_id] = "vector" if "vector" in ins else "scalar"
        elif op is Operator.MEAN and node.is_resample:
            kinds[node_id] = "vector"
        else:
            kinds[node_id] = "scalar"
    return kinds[vs.output_node_id]


# -- evaluation ---------------------------------------------------------------------


@dataclass(frozen=True)
class EvalError:
    cycle_index: int
    sensor_id: str
    node_id: str
    message: str


class SignalSource:
    """Raw sample access for a batch of cycles."""

    def __init__(
        self,
        signals: Mapping[str, Signal],
        matrices: Callable[[str], np.ndarray] | Mapping[str, np.ndarray],
        cycles: Sequence[int],
    ):
        self.signals = dict(signals)
        self._matrices = matrices
        self.cycles = np.asarray(list(cycles), dtype=np.int64)
        self._cache: dict[str, Series] = {}

    def series(self, signal_id: str) -> Series:
        if signal_id not in self._cache:
            sig = self.signals.get(signal_id)
            if sig is None:
                raise UnknownIdError(signal_id, "signal")
            try:
                mat = self._matrices(signal_id) if callable(self._matrices) else self._matrices[signal_id]
            except (KeyError, UnknownIdError):
                raise MissingMeasurementError(f"no measurements for signal {signal_id!r}") from None
            mat = np.asarray(mat, dtype=float)
            if self.cycles.size and self.cycles.max() >= mat.shape[0]:
                raise MissingMeasurementError(
                    f"signal {signal_id!r} has {mat.shape[0]} cycles, cycle {int(self.cycles.max())} requested"
                )
            self._cache[signal_id] = Series.vector(mat[self.cycles], sig.sampling_rate_hz)
        return self._cache[signal_id]


class Evaluator:
    """Memoized evaluation of virtual sensors over one batch of cycles.

    With ``strict=True`` the first operator error is raised, annotated with
    its node id.  Otherwise failing cycles become NaN from the failing node
    onward and are listed in :attr:`errors`.
    """

    def __init__(
        self,
        sensors: Mapping[str, VirtualSensor],
        segments: Mapping[str, Segment],
        source: SignalSource,
        strict: bool = True,
    ):
        self.sensors = dict(sensors)
        self.segments = dict(segments)
        self.source = source
        self.strict = strict
        self.errors: list[EvalError] = []
        self._memo: dict[tuple[str, str], Series] = {}
        self._active: list[str] = []

    def sensor(self, vs_id: str) -> Series:
        vs = self.sensors.get(vs_id)
        if vs is None:
            raise UnknownIdError(vs_id, "virtual sensor")
        key = (vs_id, vs.output_node_id)
        if key in self._memo:
            return self._memo[key]
        if vs_id in self._active:
            raise GraphCycleError(self._active[self._active.index(vs_id):] + [vs_id])
        self._active.append(vs_id)
        try:
            local = {n.id: n for n in vs.nodes}
            for node_id in topological_order(vs):
                if (vs_id, node_id) not in self._memo:
                    self._memo[(vs_id, node_id)] = self._node(vs, local[node_id], local)
        finally:
            self._active.pop()
        return self._memo[key]

    def _input(self, vs: VirtualSensor, inp: NodeInput, local) -> Series:
        if inp.ref in local:
            s = self._memo[(vs.id, inp.ref)]
        elif inp.ref in self.sensors:
            s = self.sensor(inp.ref)
        else:
            s = self.source.series(inp.ref)
        if inp.segment_id is not None:
            seg = self.segments.get(inp.segment_id)
            if seg is None:
                raise UnknownIdError(inp.segment_id, "segment")
            s = restrict_series(s, seg)
        return s

    def _node(self, vs: VirtualSensor, node: OperationNode, local) -> Series:
        try:
            ins = [self._input(vs, i, local) for i in node.inputs]
            if node.operator is Operator.DIV:
                bad = np.abs(ins[1].values) < EPS_DIV
                if bad.ndim > 1:
                    bad = bad.any(axis=-1)
                bad = np.broadcast_to(bad, (self.source.cycles.size,))
                if bad.any():
                    if self.strict:
                        raise DivisionError(f"divisor magnitude below {EPS_DIV}")
                    for row in np.flatnonzero(bad):
                        self._log(vs, node, int(row), f"divisor magnitude below {EPS_DIV}")
                    out = apply_series(node.operator, ins, node)
                    values = np.array(np.broadcast_to(out.values, bad.shape + out.values.shape[1:]))
                    values[bad] = np.nan
                    return Series(values, out.offsets, out.rate_hz)
            return apply_series(node.operator, ins, node)
        except OperatorError as exc:
            if exc.node_id is None:
                raise exc.at(node.id) from None
            raise

    def _log(self, vs: VirtualSensor, node: OperationNode, row: int, message: str) -> None:
        err = EvalError(int(self.source.cycles[row]), vs.id, node.id, message)
        self.errors.append(err)
        log.warning("cycle %d, %s/%s: %s", err.cycle_index, vs.id, node.id, message)


def evaluate_virtual_sensor(
    vs: VirtualSensor,
    measurements: Mapping[str, Measurement],
    segments: Mapping[str, Segment],
    sensors: Mapping[str, VirtualSensor] | None = None,
    signals: Mapping[str, Signal] | None = None,
):
    """Evaluate one virtual sensor on one cycle.

    ``measurements`` maps signal id to that signal's measurement for the
    cycle.  Sampling rates come from ``signals`` when given, otherwise
    from sample count over duration.  Returns a float or a 1-D array.
    """
    sensors = {**(sensors or {}), vs.id: vs}
    rates = {}
    for sid, m in measurements.items():
        rate = signals[sid].sampling_rate_hz if signals and sid in signals else len(m.values) / m.duration_s
        rates[sid] = Signal(sid, sid, ("-",), rate)
    source = SignalSource(rates, {sid: np.asarray([m.values]) for sid, m in measurements.items()}, [0])
    try:
        out = Evaluator(sensors, segments, source, strict=True).sensor(vs.id)
    except UnknownIdError as exc:
        if exc.what == "signal":
            raise MissingMeasurementError(f"no measurement for {exc.entity_id!r} in this cycle") from None
        raise
    if out.is_scalar:
        return float(out.values[0])
    return out.values[0]


# -- feature matrix -------------------------------------------------------------------


@dataclass
class FeatureMatrix:
    cycles: np.ndarray
    columns: list[str]
    values: np.ndarray
    provenance: str = ""
    errors: list[EvalError] = field(default_factory=list)

    def __post_init__(self):
        self.cycles = np.asarray(self.cycles, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.cycles), len(self.columns))

    def rows(self, cycles: Iterable[int]) -> "FeatureMatrix":
        pos = {int(c): i for i, c in enumerate(self.cycles)}
        idx = [pos[int(c)] for c in cycles]
        return FeatureMatrix(self.cycles[idx], list(self.columns), self.values[idx], self.provenance)

    def select(self, columns: Sequence[str]) -> "FeatureMatrix":
        pos = {c: i for i, c in enumerate(self.columns)}
        idx = [pos[c] for c in columns]
        return FeatureMatrix(self.cycles, list(columns), self.values[:, idx], self.provenance, list(self.errors))

    def finite_rows(self) -> np.ndarray:
        return np.isfinite(self.values).all(axis=1)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cycle", *self.columns])
            for c, row in zip(self.cycles.tolist(), self.values.tolist()):
                w.writerow([c, *(_fmt(v) for v in row)])

    @classmethod
    def from_csv(cls, path, provenance: str = "") -> "FeatureMatrix":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        cycles = [int(r[0]) for r in body]
        values = np.array([[float(v) for v in r[1:]] for r in body], dtype=float)
        return cls(np.asarray(cycles), header[1:], values.reshape(len(cycles), len(header) - 1), provenance)


def _fmt(v: float) -> str:
    if math.isnan(v):
        return "nan"
    return repr(v)


def definition_hash(sensors: Iterable[VirtualSensor], segments: Iterable[Segment], signals: Iterable[Signal]) -> str:
    blob = json.dumps(
        [to_record(e) for e in sorted([*sensors, *segments, *signals], key=lambda e: (type(e).__name__, e.id))],
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def compute_feature_matrix(
    sensors: Mapping[str, VirtualSensor],
    segments: Mapping[str, Segment],
    signals: Mapping[str, Signal],
    matrices: Callable[[str], np.ndarray] | Mapping[str, np.ndarray],
    sensor_ids: Sequence[str],
    cycles: Sequence[int],
    provenance: str | None = None,
) -> FeatureMatrix:
    """Evaluate scalar virtual sensors for every cycle in ``cycles``.

    Cells whose evaluation fails are NaN and listed in ``errors``.
    """
    for vid in sensor_ids:
        if vid not in sensors:
            raise UnknownIdError(vid, "virtual sensor")
        if output_kind(sensors[vid], sensors) != "scalar":
            raise PreconditionError(f"virtual sensor {vid!r} is vector-valued")
    cycles = [int(c) for c in cycles]
    if provenance is None:
        provenance = definition_hash(sensors.values(), segments.values(), signals.values())
    if not cycles:
        return FeatureMatrix(np.empty(0, dtype=np.int64), list(sensor_ids), np.empty((0, len(sensor_ids))), provenance)
    source = SignalSource(signals, matrices, cycles)
    ev = Evaluator(sensors, segments, source, strict=False)
    values = np.empty((len(cycles), len(sensor_ids)))
    for j, vid in enumerate(sensor_ids):
        values[:, j] = np.broadcast_to(ev.sensor(vid).values, (len(cycles),))
    bad = [sensor_ids[j] for j in range(len(sensor_ids)) if not np.isfinite(values[:, j]).any()]
    if bad:
        raise PreconditionError(f"feature columns entirely non-finite: {', '.join(bad)}")
    # NaN cells without a logged origin (e.g. non-finite raw samples) still get an entry
    logged = {(e.cycle_index, e.sensor_id) for e in ev.errors}
    errors = list(ev.errors)
    for i, j in zip(*np.nonzero(~np.isfinite(values))):
        key = (cycles[i], sensor_ids[j])
        if key not in logged:
            errors.append(EvalError(cycles[i], sensor_ids[j], "", "non-finite value"))
            logged.add(key)
    return FeatureMatrix(np.asarray(cycles), list(sensor_ids), values, provenance, errors)
