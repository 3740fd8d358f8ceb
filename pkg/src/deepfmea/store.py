"""File-backed entity store with referential integrity.

Layout under ``root_dir``::

    entities/<Type>.records      one JSON object per line, sorted by id
    measurements/<signal>.mat    tab-separated matrix, one cycle per line
    models/                      fitted monitor models (written by deepfmea.detect)

Ids share one namespace across all entity types.  Writes go through one
lock and are checked before anything touches disk.
"""

from __future__ import annotations

import io
import json
import os
import threading
import weakref
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    DanglingReferenceError,
    DependentExistsError,
    DuplicateIdError,
    InvariantError,
    ShapeMismatchError,
    UnknownIdError,
)
from .model import (
    ENTITY_TYPES,
    Asset,
    DetectionMethod,
    FailureIncident,
    FailureMode,
    Intervention,
    Measurement,
    MeasurementMatrix,
    Segment,
    Signal,
    SystemElement,
    VirtualSensor,
    from_record,
    to_record,
)


def matrix_id(signal_id: str) -> str:
    return f"mat:{signal_id}"


def _typed_refs(entity) -> list[tuple[str, tuple[type, ...]]]:
    E, S, SEG, VS, FM, A = SystemElement, Signal, Segment, VirtualSensor, FailureMode, Asset
    if isinstance(entity, SystemElement):
        return [(entity.parent_id, (E,))] if entity.parent_id is not None else []
    if isinstance(entity, Asset):
        return [(entity.root_element_id, (E,))]
    if isinstance(entity, Signal):
        return [(e, (E,)) for e in entity.element_ids]
    if isinstance(entity, VirtualSensor):
        local = {n.id for n in entity.nodes}
        out = [(e, (E,)) for e in entity.element_ids]
        for n in entity.nodes:
            for inp in n.inputs:
                if inp.ref not in local:
                    out.append((inp.ref, (S, VS)))
                if inp.segment_id is not None:
                    out.append((inp.segment_id, (SEG,)))
        return out
    if isinstance(entity, FailureMode):
        return [(entity.element_id, (E,))]
    if isinstance(entity, Intervention):
        return [(entity.failure_mode_id, (FM,))]
    if isinstance(entity, FailureIncident):
        return [(entity.asset_id, (A,)), (entity.failure_mode_id, (FM,))]
    if isinstance(entity, DetectionMethod):
        return (
            [(i, (S,)) for i in entity.input_signal_ids]
            + [(i, (VS,)) for i in entity.input_virtual_sensor_ids]
            + [(i, (E,)) for i in entity.scope_element_ids]
            + [(i, (FM,)) for i in entity.scope_failure_mode_ids]
        )
    if isinstance(entity, MeasurementMatrix):
        return [(entity.signal_id, (S,)), (entity.asset_id, (A,))]
    return []


def format_matrix(matrix: np.ndarray) -> bytes:
    """Tab-separated text with the shortest round-tripping float repr."""
    buf = io.StringIO()
    for row in np.asarray(matrix, dtype=float).tolist():
        parts = []
        for v in row:
            r = repr(v)
            parts.append(r[:-2] if r.endswith(".0") else r)
        buf.write("\t".join(parts))
        buf.write("\n")
    return buf.getvalue().encode("utf-8")


def parse_matrix(raw: bytes, samples: int = 0) -> np.ndarray:
    """Parse tab-separated numeric text, one row per line."""
    if not raw.strip():
        return np.empty((0, samples))
    return np.loadtxt(io.BytesIO(raw), delimiter="\t", ndmin=2, dtype=float)


def read_matrix(path: str | os.PathLike, samples: int = 0) -> np.ndarray:
    with open(path, "rb") as fh:
        return parse_matrix(fh.read(), samples)


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


class Snapshot:
    """Immutable view of the store at the moment :meth:`Store.snapshot` ran."""

    def __init__(self, store: "Store", entities: dict[str, object]):
        self._store = store
        self.entities: Mapping[str, object] = MappingProxyType(dict(entities))
        by_type: dict[str, list] = {name: [] for name in ENTITY_TYPES}
        for eid in sorted(self.entities):
            e = self.entities[eid]
            by_type[type(e).__name__].append(e)
        self._by_type = {k: tuple(v) for k, v in by_type.items()}
        self._matrices: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def get(self, entity_id: str):
        try:
            return self.entities[entity_id]
        except KeyError:
            raise UnknownIdError(entity_id) from None

    def all(self, cls: type) -> tuple:
        return self._by_type[cls.__name__]

    def __len__(self) -> int:
        return len(self.entities)

    def matrix(self, signal_id: str) -> np.ndarray:
        with self._lock:
            if signal_id in self._matrices:
                return self._matrices[signal_id]
            rec = self.entities.get(matrix_id(signal_id))
            if rec is None:
                raise UnknownIdError(signal_id, "measurement matrix")
            arr = self._store._load_matrix_version(rec)
            self._matrices[signal_id] = arr
            return arr

    def _adopt(self, signal_id: str, rec: MeasurementMatrix, arr: np.ndarray) -> None:
        with self._lock:
            if signal_id not in self._matrices and self.entities.get(matrix_id(signal_id)) is rec:
                self._matrices[signal_id] = arr


class Store:
    def __init__(self, root_dir: str | os.PathLike, create: bool = True):
        self.root = Path(root_dir)
        if create:
            (self.root / "entities").mkdir(parents=True, exist_ok=True)
            (self.root / "measurements").mkdir(parents=True, exist_ok=True)
        elif not (self.root / "entities").is_dir():
            raise FileNotFoundError(f"no store at {self.root}")
        self._lock = threading.RLock()
        self._entities: dict[str, object] = {}
        self._matrices: dict[str, np.ndarray] = {}
        self._snapshots: "weakref.WeakSet[Snapshot]" = weakref.WeakSet()
        self._load()

    @property
    def models_dir(self) -> Path:
        return self.root / "models"

    def _records_path(self, type_name: str) -> Path:
        return self.root / "entities" / f"{type_name}.records"

    def _matrix_path(self, signal_id: str) -> Path:
        return self.root / "measurements" / f"{signal_id}.mat"

    def _load(self) -> None:
        for type_name in ENTITY_TYPES:
            path = self._records_path(type_name)
            if not path.exists():
                continue
            with open(path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    if not line.strip():
                        continue
                    rec = json.loads(line)
                    if rec.get("type") != type_name:
                        raise InvariantError(f"{path}:{lineno}: record type {rec.get('type')!r} in {type_name} file")
                    self._entities[rec["id"]] = from_record(rec)

    # -- reads ----------------------------------------------------------------

    def __contains__(self, entity_id: str) -> bool:
        return entity_id in self._entities

    def get(self, entity_id: str):
        try:
            return self._entities[entity_id]
        except KeyError:
            raise UnknownIdError(entity_id) from None

    def all(self, cls: type) -> list:
        return sorted((e for e in self._entities.values() if isinstance(e, cls)), key=lambda e: e.id)

    def dependents(self, entity_id: str) -> list[str]:
        return sorted(
            e.id for e in self._entities.values() if any(ref == entity_id for ref, _ in _typed_refs(e))
        )

    def snapshot(self) -> Snapshot:
        with self._lock:
            snap = Snapshot(self, self._entities)
            self._snapshots.add(snap)
            return snap

    # -- writes ---------------------------------------------------------------

    def _check_refs(self, batch: dict[str, object]) -> None:
        def lookup(i):
            return batch.get(i, self._entities.get(i))

        for e in batch.values():
            if isinstance(e, SystemElement) and e.parent_id == e.id:
                raise InvariantError(f"SystemElement {e.id}: parent_id references itself")
            for ref, allowed in _typed_refs(e):
                target = lookup(ref)
                if target is None:
                    raise DanglingReferenceError(ref, e.id)
                if not isinstance(target, allowed):
                    names = "/".join(t.__name__ for t in allowed)
                    raise InvariantError(f"{e.id}: {ref!r} is a {type(target).__name__}, expected {names}")

    def put(self, entity) -> str:
        self.put_many([entity])
        return entity.id

    def put_many(self, entities: Iterable[object], skip_identical: bool = False) -> list[str]:
        """Store all ``entities`` or none of them."""
        entities = list(entities)
        with self._lock:
            batch: dict[str, object] = {}
            for e in entities:
                if type(e).__name__ not in ENTITY_TYPES or isinstance(e, MeasurementMatrix):
                    raise InvariantError(f"not a storable entity: {type(e).__name__}")
                if e.id in batch:
                    raise DuplicateIdError(e.id)
                existing = self._entities.get(e.id)
                if existing is not None:
                    if skip_identical and existing == e:
                        continue
                    raise DuplicateIdError(e.id)
                batch[e.id] = e
            if not batch:
                return []
            self._check_refs(batch)
            self._entities.update(batch)
            self._flush({type(e).__name__ for e in batch.values()})
            return list(batch)

    def delete(self, entity_id: str) -> None:
        with self._lock:
            entity = self.get(entity_id)
            deps = self.dependents(entity_id)
            if deps:
                raise DependentExistsError(entity_id, deps)
            if isinstance(entity, MeasurementMatrix):
                self._retire_matrix(entity)
                self._matrices.pop(entity.signal_id, None)
                self._matrix_path(entity.signal_id).unlink(missing_ok=True)
            del self._entities[entity_id]
            self._flush({type(entity).__name__})

    def replace(self, entity) -> None:
        """Overwrite an existing record of the same type (e.g. incident statuses)."""
        with self._lock:
            old = self.get(entity.id)
            if type(old) is not type(entity):
                raise InvariantError(f"{entity.id}: cannot replace {type(old).__name__} with {type(entity).__name__}")
            self._check_refs({entity.id: entity})
            self._entities[entity.id] = entity
            self._flush({type(entity).__name__})

    def _flush(self, type_names: set[str]) -> None:
        for name in sorted(type_names):
            rows = [
                json.dumps(to_record(e), sort_keys=True, ensure_ascii=False)
                for e in sorted(self._entities.values(), key=lambda x: x.id)
                if type(e).__name__ == name
            ]
            path = self._records_path(name)
            if rows:
                _atomic_write(path, ("\n".join(rows) + "\n").encode("utf-8"))
            else:
                path.unlink(missing_ok=True)

    # -- measurements -----------------------------------------------------------

    def _default_asset(self) -> Asset:
        assets = self.all(Asset)
        if len(assets) != 1:
            raise InvariantError(f"asset_id required: store holds {len(assets)} assets")
        return assets[0]

    def put_measurement_matrix(
        self,
        signal_id: str,
        matrix: np.ndarray,
        asset_id: str | None = None,
        duration_s: float | None = None,
        raw: bytes | None = None,
    ) -> None:
        """Store ``matrix`` (cycles x samples) for a signal, replacing any previous one.

        ``raw`` may carry the exact source text of ``matrix``; it is then
        written verbatim so files stay byte-identical to their source.
        """
        with self._lock:
            signal = self.get(signal_id)
            if not isinstance(signal, Signal):
                raise InvariantError(f"{signal_id!r} is not a Signal")
            asset = self.get(asset_id) if asset_id is not None else self._default_asset()
            if not isinstance(asset, Asset):
                raise InvariantError(f"{asset_id!r} is not an Asset")
            duration = asset.cycle_duration_s if duration_s is None else duration_s
            matrix = np.asarray(matrix, dtype=float)
            if matrix.ndim != 2:
                raise ShapeMismatchError(f"{signal_id} matrix rank", 2, matrix.ndim)
            expected = signal.samples_per(duration)
            if matrix.shape[1] != expected and matrix.shape[0] > 0:
                raise ShapeMismatchError(
                    f"{signal_id} row length ({signal.sampling_rate_hz} Hz x {duration} s)",
                    expected,
                    matrix.shape[1],
                )
            rec = MeasurementMatrix(
                id=matrix_id(signal_id),
                signal_id=signal_id,
                asset_id=asset.id,
                cycles=int(matrix.shape[0]),
                samples=expected,
                duration_s=float(duration),
            )
            old = self._entities.get(rec.id)
            if old is not None:
                self._retire_matrix(old)
            _atomic_write(self._matrix_path(signal_id), raw if raw is not None else format_matrix(matrix))
            frozen = matrix.copy()
            frozen.setflags(write=False)
            self._matrices[signal_id] = frozen
            self._entities[rec.id] = rec
            self._flush({MeasurementMatrix.__name__})

    def _retire_matrix(self, rec: MeasurementMatrix) -> None:
        # hand the outgoing version to snapshots that still point at it
        live = [s for s in self._snapshots if s.entities.get(rec.id) is rec]
        if live:
            arr = self._load_matrix_version(rec)
            for s in live:
                s._adopt(rec.signal_id, rec, arr)

    def _load_matrix_version(self, rec: MeasurementMatrix) -> np.ndarray:
        with self._lock:
            if self._entities.get(rec.id) is not rec:
                raise InvariantError(f"matrix {rec.signal_id} changed and was not retained")
            arr = self._matrices.get(rec.signal_id)
            if arr is None:
                arr = read_matrix(self._matrix_path(rec.signal_id), rec.samples)
                if arr.shape != (rec.cycles, rec.samples):
                    raise ShapeMismatchError(f"{rec.signal_id}.mat shape", (rec.cycles, rec.samples), arr.shape)
                arr.setflags(write=False)
                self._matrices[rec.signal_id] = arr
            return arr

    def measurement_matrix(self, signal_id: str) -> np.ndarray:
        rec = self._entities.get(matrix_id(signal_id))
        if rec is None:
            raise UnknownIdError(signal_id, "measurement matrix")
        return self._load_matrix_version(rec)

    def measurement(self, signal_id: str, cycle_index: int) -> Measurement:
        rec = self.get(matrix_id(signal_id))
        mat = self.measurement_matrix(signal_id)
        if not 0 <= cycle_index < rec.cycles:
            raise UnknownIdError(str(cycle_index), f"cycle of {signal_id}")
        return Measurement(
            id=f"{signal_id}@{cycle_index}",
            asset_id=rec.asset_id,
            signal_id=signal_id,
            cycle_index=cycle_index,
            start_offset_s=cycle_index * rec.duration_s,
            duration_s=rec.duration_s,
            values=mat[cycle_index],
        )

    def cycle_count(self) -> int:
        counts = {r.cycles for r in self.all(MeasurementMatrix)}
        if len(counts) > 1:
            raise InvariantError(f"measurement matrices disagree on cycle count: {sorted(counts)}")
        return counts.pop() if counts else 0
