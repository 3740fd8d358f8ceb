"""Unsupervised similarity-based monitoring and element attribution.

The attention index of a cycle is the mean squared Euclidean distance, in
z-score space, to its k nearest healthy training cycles.  Because squared
distance splits into per-feature terms, the index decomposes exactly into
per-feature contributions, which are then shared out to system elements.
"""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import PreconditionError
from .features import FeatureMatrix
from .model import FailureIncident, Hierarchy, IncidentStatus

log = logging.getLogger(__name__)

DEFAULT_K = 5
DEFAULT_RATIO = 0.7


@dataclass(frozen=True)
class Split:
    train: tuple[int, ...]
    test: tuple[int, ...]


def split_cycles(labels: Sequence, ratio: float = DEFAULT_RATIO, seed: int = 0, k: int = DEFAULT_K) -> Split:
    """Draw a healthy-only training set; everything else labelled goes to test.

    ``labels`` are :class:`deepfmea.ingest.CycleLabel` (anything with
    ``cycle_index`` and ``health``).  Cycles that are neither healthy nor
    degraded (nominal but unstable) appear in neither set.
    """
    if not 0 < ratio < 1:
        raise PreconditionError(f"split ratio must lie strictly between 0 and 1, got {ratio}")
    healthy = sorted(l.cycle_index for l in labels if l.health == "healthy")
    degraded = sorted(l.cycle_index for l in labels if l.health == "degraded")
    if len(healthy) < k + 1:
        raise PreconditionError(f"need at least k+1={k + 1} healthy cycles, have {len(healthy)}")
    n_train = int(math.floor(ratio * len(healthy) + 1e-9))
    n_train = min(max(n_train, k), len(healthy) - 1)
    perm = np.random.default_rng(seed).permutation(len(healthy))
    train = sorted(healthy[i] for i in perm[:n_train])
    rest = sorted(set(healthy) - set(train))
    return Split(tuple(train), tuple(sorted(rest + degraded)))


@dataclass
class MonitorModel:
    feature_ids: list[str]
    means: np.ndarray
    stds: np.ndarray
    reference: np.ndarray  # z-scored training rows
    k: int
    dropped: list[str] = field(default_factory=list)
    train_cycles: list[int] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=float)
        self.stds = np.asarray(self.stds, dtype=float)
        self.reference = np.asarray(self.reference, dtype=float).reshape(-1, len(self.feature_ids))
        if not 1 <= self.k <= self.reference.shape[0]:
            raise PreconditionError(f"k={self.k} must lie in [1, {self.reference.shape[0]}]")
        if not np.all(self.stds > 0):
            raise PreconditionError("retained feature stds must be > 0")

    def zscore(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """z-scores of rows already restricted to ``feature_ids``; non-finite cells are imputed."""
        values = np.array(values, dtype=float, ndmin=2)
        bad = ~np.isfinite(values)
        if bad.any():
            values = np.where(bad, self.means, values)
        return (values - self.means) / self.stds, bad.any(axis=1)

    def to_json(self) -> str:
        return json.dumps(
            {
                "feature_ids": self.feature_ids,
                "means": self.means.tolist(),
                "stds": self.stds.tolist(),
                "reference": self.reference.tolist(),
                "k": self.k,
                "dropped": self.dropped,
                "train_cycles": self.train_cycles,
                "warnings": self.warnings,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "MonitorModel":
        d = json.loads(text)
        return cls(
            d["feature_ids"], d["means"], d["stds"], d["reference"], d["k"],
            d["dropped"], d["train_cycles"], d["warnings"],
        )

    def save(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "MonitorModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def fit_monitor(train: FeatureMatrix, k: int = DEFAULT_K) -> MonitorModel:
    """Fit z-score statistics and the reference set on healthy training rows.

    Rows with any non-finite feature are left out.  Features with zero
    sample variance are dropped.  With a single usable row every std is
    forced to 1.
    """
    warnings: list[str] = []
    finite = train.finite_rows()
    if not finite.all():
        skipped = train.cycles[~finite].tolist()
        warnings.append(f"excluded {len(skipped)} training cycle(s) with non-finite features: {skipped}")
    values = train.values[finite]
    cycles = train.cycles[finite].tolist()
    n = values.shape[0]
    if n == 0:
        raise PreconditionError("no finite training rows")
    if k > n:
        raise PreconditionError(f"k={k} exceeds the {n} usable training rows")
    means = values.mean(axis=0)
    if n < 2:
        stds = np.ones(values.shape[1])
        warnings.append("single training row: std forced to 1 for every feature")
        keep = np.ones(values.shape[1], dtype=bool)
    else:
        stds = values.std(axis=0, ddof=1)
        keep = stds > 0
    dropped = [c for c, kp in zip(train.columns, keep) if not kp]
    if dropped:
        warnings.append(f"dropped zero-variance features: {', '.join(dropped)}")
    if not keep.any():
        raise PreconditionError("every feature has zero variance on the training rows")
    for w in warnings:
        log.warning(w)
    feature_ids = [c for c, kp in zip(train.columns, keep) if kp]
    means, stds = means[keep], stds[keep]
    reference = (values[:, keep] - means) / stds
    return MonitorModel(feature_ids, means, stds, reference, k, dropped, cycles, warnings)


@dataclass(frozen=True)
class ScoreRecord:
    cycle_index: int
    attention_index: float
    contributions: tuple[float, ...]
    imputed: bool = False
    neighbours: tuple[int, ...] = ()


def score_matrix(model: MonitorModel, fm: FeatureMatrix) -> list[ScoreRecord]:
    """Attention index and per-feature contributions for every row of ``fm``."""
    sub = fm.select(model.feature_ids) if list(fm.columns) != model.feature_ids else fm
    z, imputed = model.zscore(sub.values)
    contrib, nbrs = _kernels.knn_contributions(z, model.reference, model.k)
    out = []
    for i, c in enumerate(sub.cycles.tolist()):
        row = contrib[i]
        out.append(
            ScoreRecord(
                cycle_index=int(c),
                attention_index=float(math.fsum(row)),
                contributions=tuple(row.tolist()),
                imputed=bool(imputed[i]),
                neighbours=tuple(int(x) for x in nbrs[i]),
            )
        )
    return out


def attention_index(model: MonitorModel, row: Sequence[float], cycle_index: int = -1) -> ScoreRecord:
    """Score one feature row given in ``model.feature_ids`` order."""
    row = np.asarray(row, dtype=float)
    if row.shape != (len(model.feature_ids),):
        raise PreconditionError(f"row has {row.size} values, model expects {len(model.feature_ids)}")
    fm = FeatureMatrix(np.array([cycle_index]), list(model.feature_ids), row[None, :])
    return score_matrix(model, fm)[0]


# -- attribution -------------------------------------------------------------------


@dataclass(frozen=True)
class AttributionReport:
    cycle_index: int
    attention_index: float
    contributions: Mapping[str, float]
    top: tuple[tuple[str, float], ...]

    def share(self, element_id: str) -> float:
        total = self.attention_index
        return self.contributions.get(element_id, 0.0) / total if total > 0 else 0.0


def element_contributions(
    model: MonitorModel, record: ScoreRecord, sensor_elements: Mapping[str, Sequence[str]]
) -> dict[str, float]:
    """Split each feature's contribution equally among its referenced elements."""
    acc: dict[str, list[float]] = defaultdict(list)
    for fid, c in zip(model.feature_ids, record.contributions):
        elements = sensor_elements.get(fid)
        if not elements:
            raise PreconditionError(f"feature {fid!r} references no system element")
        part = c / len(elements)
        for e in elements:
            acc[e].append(part)
    return {e: math.fsum(v) for e, v in acc.items()}


def rollup(contributions: Mapping[str, float], hierarchy: Hierarchy) -> dict[str, float]:
    """Contribution of every element's subtree (element plus descendants)."""
    acc: dict[str, list[float]] = defaultdict(list)
    for e, c in contributions.items():
        for target in (e, *hierarchy.ancestors(e)):
            acc[target].append(c)
    return {e: math.fsum(v) for e, v in acc.items()}


def attribute(
    model: MonitorModel,
    record: ScoreRecord,
    sensor_elements: Mapping[str, Sequence[str]],
    top_n: int = 3,
    hierarchy: Hierarchy | None = None,
    rolled_up: bool = False,
) -> AttributionReport:
    """Rank system elements by their share of a cycle's attention index.

    With ``rolled_up=True`` (needs ``hierarchy``) every element is credited
    with its whole subtree, so parents outrank their children.
    """
    contrib = element_contributions(model, record, sensor_elements)
    if rolled_up:
        if hierarchy is None:
            raise PreconditionError("rolled_up attribution needs a hierarchy")
        contrib = rollup(contrib, hierarchy)
    total = record.attention_index
    ranked = sorted(contrib.items(), key=lambda kv: (-kv[1], kv[0]))
    if rolled_up and hierarchy is not None and hierarchy.root in contrib:
        total = contrib[hierarchy.root]
    top = tuple((e, (c / total if total > 0 else 0.0)) for e, c in ranked[:top_n])
    return AttributionReport(record.cycle_index, record.attention_index, dict(contrib), top)


# -- detection and reconciliation -----------------------------------------------------


def detect_cycles(scores: Mapping[int, float], threshold: float) -> dict[int, bool]:
    """Flag cycles whose attention index is strictly above ``threshold``."""
    return {int(c): bool(s > threshold) for c, s in sorted(scores.items())}


@dataclass(frozen=True)
class Confusion:
    TP: int
    FP: int
    FN: int
    TN: int


@dataclass(frozen=True)
class Reconciliation:
    incidents: tuple[FailureIncident, ...]
    false_alarms: tuple[int, ...]
    counts: Confusion


def reconcile(
    detections: Mapping[int, bool], incidents: Iterable[FailureIncident], lead_window: int = 0
) -> Reconciliation:
    """Match detections against incidents on the shared cycle axis.

    An incident counts as detected when any detection falls in
    ``[first - lead_window, last]``.  Per-cycle counts treat a cycle as
    degraded when some incident covers it.
    """
    if lead_window < 0:
        raise PreconditionError("lead_window must be >= 0")
    incidents = list(incidents)
    flagged = sorted(c for c, d in detections.items() if d)
    flagged_arr = np.asarray(flagged, dtype=np.int64)

    def any_in(lo: int, hi: int) -> bool:
        i = np.searchsorted(flagged_arr, lo, side="left")
        return bool(i < flagged_arr.size and flagged_arr[i] <= hi)

    out = []
    windows = []
    for inc in incidents:
        lo = inc.first - lead_window
        windows.append((lo, inc.last))
        status = IncidentStatus.DETECTED_PRIOR if any_in(lo, inc.last) else IncidentStatus.UNDETECTED
        out.append(FailureIncident(inc.id, inc.asset_id, inc.failure_mode_id, inc.cycle_range, status))

    windows.sort()
    starts = np.asarray([w[0] for w in windows], dtype=np.int64)
    ends = np.maximum.accumulate(np.asarray([w[1] for w in windows], dtype=np.int64)) if windows else starts

    def covered(c: int) -> bool:
        i = np.searchsorted(starts, c, side="right") - 1
        return bool(i >= 0 and ends[i] >= c)

    false_alarms = tuple(c for c in flagged if not covered(c))

    degraded: set[int] = set()
    for inc in incidents:
        degraded.update(range(inc.first, inc.last + 1))
    tp = fp = fn = tn = 0
    for c, d in detections.items():
        if c in degraded:
            tp += d
            fn += not d
        else:
            fp += d
            tn += not d
    return Reconciliation(tuple(out), false_alarms, Confusion(tp, fp, fn, tn))


def project2d(model: MonitorModel, fm: FeatureMatrix) -> np.ndarray:
    """First two principal components (fitted on the reference set) of z-scored rows."""
    sub = fm.select(model.feature_ids)
    z, _ = model.zscore(sub.values)
    ref = model.reference
    centre = ref.mean(axis=0)
    _, _, vt = np.linalg.svd(ref - centre, full_matrices=False)
    comps = vt[:2]
    # fix component signs so output is reproducible across LAPACK builds
    for i in range(comps.shape[0]):
        j = np.argmax(np.abs(comps[i]))
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    proj = (z - centre) @ comps.T
    if proj.shape[1] < 2:
        proj = np.hstack([proj, np.zeros((proj.shape[0], 2 - proj.shape[1]))])
    return proj
