"""Store-backed stages and the end-to-end pipeline.

Each stage reads what earlier stages left in the store (entities,
measurements, labels, cached features, fitted models) so the CLI can run
them one at a time.  :func:`run_pipeline` chains them and writes a report
directory whose manifest lists a sha256 digest per output file.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from . import charts
from .detect import (
    DEFAULT_K,
    DEFAULT_RATIO,
    AttributionReport,
    MonitorModel,
    ScoreRecord,
    Split,
    attribute,
    detect_cycles,
    fit_monitor,
    project2d,
    reconcile,
    score_matrix,
    split_cycles,
)
from .errors import DeepFMEAError, IngestError, PreconditionError, StageError, UnknownIdError
from .features import FeatureMatrix, compute_feature_matrix, definition_hash
from .ingest import CycleLabel, IngestCounts, load_dataset, load_labels
from .model import (
    DetectionMethod,
    FailureIncident,
    FailureMode,
    Hierarchy,
    Intervention,
    InterventionKind,
    MethodKind,
    Segment,
    Signal,
    SystemElement,
    VirtualSensor,
)
from .modelspec import apply_model_spec, stored_label_config, stored_spec_hash
from .risk import (
    CostSet,
    average_precision,
    confusion_rates,
    delta_qcpn,
    delta_qcpn_curve,
    fmt_threshold,
    none_detect_value,
    optimal_threshold,
    pr_curve,
)
from .store import Store, _atomic_write, matrix_id

log = logging.getLogger(__name__)

FEATURES_FILE = "features.csv"
FEATURES_META = "features.json"
MANIFEST = "manifest.json"


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _fmt(v: float) -> str:
    return fmt_threshold(v) if np.isinf(v) else repr(float(v))


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# -- ingest ---------------------------------------------------------------------------


def ingest(store: Store, dataset_dir: str | os.PathLike, spec_path: str | os.PathLike | None = None) -> IngestCounts:
    if spec_path is not None:
        apply_model_spec(spec_path, store)
    config = stored_label_config(store)
    if config is None:
        raise IngestError("the model spec declares no dataset section; cannot label cycles")
    counts = load_dataset(dataset_dir, store, config)
    for name in (FEATURES_FILE, FEATURES_META):
        (store.root / name).unlink(missing_ok=True)
    return counts


# -- features -------------------------------------------------------------------------


def _data_digest(store: Store, signal_ids: Sequence[str]) -> str:
    h = hashlib.sha256()
    for sid in sorted(signal_ids):
        if matrix_id(sid) in store:
            h.update(f"{sid}:{_sha256_file(store._matrix_path(sid))}\n".encode())
    return h.hexdigest()


def _provenance(store: Store) -> str:
    sensors, segments, signals = store.all(VirtualSensor), store.all(Segment), store.all(Signal)
    return definition_hash(sensors, segments, signals) + ":" + _data_digest(store, [s.id for s in signals])


def compute_features(store: Store, sensor_ids: Sequence[str] | None = None, cache: bool = True) -> FeatureMatrix:
    """Evaluate virtual sensors over every stored cycle; caches the result as CSV in the store."""
    snap = store.snapshot()
    sensors = {v.id: v for v in snap.all(VirtualSensor)}
    segments = {s.id: s for s in snap.all(Segment)}
    signals = {s.id: s for s in snap.all(Signal)}
    ids = sorted(sensors) if sensor_ids is None else list(sensor_ids)
    n = store.cycle_count()
    if n == 0:
        raise PreconditionError("no measurements in the store; run ingest first")
    fm = compute_feature_matrix(sensors, segments, signals, snap.matrix, ids, range(n), _provenance(store))
    if fm.errors:
        log.warning("%d feature cell(s) failed to evaluate; first: %s", len(fm.errors), fm.errors[0])
    if cache:
        fm.to_csv(store.root / FEATURES_FILE)
        meta = {"provenance": fm.provenance, "cycles": n, "columns": fm.columns, "errors": len(fm.errors)}
        _atomic_write(store.root / FEATURES_META, (json.dumps(meta, sort_keys=True) + "\n").encode())
    return fm


def load_features(store: Store, sensor_ids: Sequence[str]) -> FeatureMatrix:
    """Cached feature matrix restricted to ``sensor_ids``, recomputed when stale."""
    meta_path = store.root / FEATURES_META
    if meta_path.exists() and (store.root / FEATURES_FILE).exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        if meta["provenance"] == _provenance(store) and set(sensor_ids) <= set(meta["columns"]):
            fm = FeatureMatrix.from_csv(store.root / FEATURES_FILE, meta["provenance"])
            return fm.select(list(sensor_ids))
        log.info("feature cache is stale; recomputing")
    return compute_features(store).select(list(sensor_ids))


def method_sensor_ids(store: Store, method: DetectionMethod) -> list[str]:
    """Virtual-sensor inputs of ``method`` that touch its scope (elements or failure-mode elements)."""
    if method.input_signal_ids:
        raise PreconditionError(
            f"method {method.id!r}: raw signal inputs are vector-valued; wrap them in virtual sensors"
        )
    h = Hierarchy(store.all(SystemElement))
    if method.kind is MethodKind.MONITORING:
        roots = method.scope_element_ids
    else:
        roots = tuple(store.get(f).element_id for f in method.scope_failure_mode_ids)
    scope = h.closure(roots)
    out = []
    for vid in sorted(set(method.input_virtual_sensor_ids)):
        vs = store.get(vid)
        if scope.intersection(vs.element_ids):
            out.append(vid)
    if not out:
        raise PreconditionError(f"method {method.id!r}: no virtual-sensor input lies in its scope")
    return out


def _method(store: Store, method_id: str | None) -> DetectionMethod:
    if method_id is None:
        methods = store.all(DetectionMethod)
        if len(methods) != 1:
            raise PreconditionError(f"--method required: store holds {len(methods)} detection methods")
        return methods[0]
    m = store.get(method_id)
    if not isinstance(m, DetectionMethod):
        raise UnknownIdError(method_id, "detection method")
    return m


# -- fit / score ----------------------------------------------------------------------


def _model_path(store: Store, method_id: str) -> Path:
    return store.models_dir / f"{method_id}.json"


def _split_path(store: Store, method_id: str) -> Path:
    return store.models_dir / f"{method_id}.split.json"


def fit(
    store: Store,
    method_id: str | None = None,
    k: int = DEFAULT_K,
    ratio: float = DEFAULT_RATIO,
    seed: int = 0,
) -> tuple[MonitorModel, Split]:
    """Split labelled cycles, fit on healthy training rows, save model and split."""
    method = _method(store, method_id)
    labels = load_labels(store)
    split = split_cycles(labels, ratio, seed, k)
    fm = load_features(store, method_sensor_ids(store, method))
    model = fit_monitor(fm.rows(split.train), k)
    model.save(_model_path(store, method.id))
    doc = {"train": list(split.train), "test": list(split.test), "k": k, "ratio": ratio, "seed": seed}
    _atomic_write(_split_path(store, method.id), (json.dumps(doc, sort_keys=True) + "\n").encode())
    return model, split


def load_fitted(store: Store, method_id: str | None = None) -> tuple[DetectionMethod, MonitorModel, Split]:
    method = _method(store, method_id)
    path = _model_path(store, method.id)
    if not path.exists():
        raise PreconditionError(f"method {method.id!r} has not been fitted; run fit first")
    doc = json.loads(_split_path(store, method.id).read_text(encoding="utf-8"))
    return method, MonitorModel.load(path), Split(tuple(doc["train"]), tuple(doc["test"]))


def score(store: Store, method_id: str | None = None, split: str = "test") -> list[ScoreRecord]:
    method, model, sp = load_fitted(store, method_id)
    fm = load_features(store, model.feature_ids)
    if split == "test":
        cycles: Sequence[int] = sp.test
    elif split == "train":
        cycles = sp.train
    elif split == "all":
        cycles = fm.cycles.tolist()
    else:
        raise PreconditionError(f"split must be test, train or all, not {split!r}")
    return score_matrix(model, fm.rows(cycles))


def write_scores(path: Path, records: Sequence[ScoreRecord]) -> None:
    _write_csv(
        path,
        ["cycle", "attention_index", "imputed_flag"],
        [[r.cycle_index, repr(r.attention_index), int(r.imputed)] for r in records],
    )


def sensor_elements(store: Store) -> dict[str, tuple[str, ...]]:
    return {v.id: v.element_ids for v in store.all(VirtualSensor)}


def attribute_cycle(
    store: Store, cycle: int, method_id: str | None = None, top_n: int = 3, rolled_up: bool = False
) -> AttributionReport:
    method, model, _ = load_fitted(store, method_id)
    fm = load_features(store, model.feature_ids)
    if cycle not in set(fm.cycles.tolist()):
        raise UnknownIdError(str(cycle), "cycle")
    rec = score_matrix(model, fm.rows([cycle]))[0]
    h = Hierarchy(store.all(SystemElement))
    return attribute(model, rec, sensor_elements(store), top_n, h, rolled_up)


# -- enrichment -----------------------------------------------------------------------


@dataclass(frozen=True)
class Candidate:
    failure_mode_id: str
    name: str
    element_id: str
    share: float
    interventions: tuple[Intervention, ...]


@dataclass(frozen=True)
class EnrichedDetection:
    cycle_index: int
    attention_index: float
    top: tuple[tuple[str, float, tuple[str, ...]], ...]  # (element, share, path from root)
    candidates: tuple[Candidate, ...]


_KIND_ORDER = {InterventionKind.DIAGNOSTIC: 0, InterventionKind.PROACTIVE: 1, InterventionKind.REACTIVE: 2}


def enrich_detection(
    report: AttributionReport,
    hierarchy: Hierarchy,
    failure_modes: Sequence[FailureMode],
    interventions: Sequence[Intervention],
    top_n: int | None = None,
) -> EnrichedDetection:
    """Attach element paths, candidate failure modes and their interventions.

    A failure mode is a candidate when its element is one of the top
    attributed elements or lies in one of their subtrees.  It is ranked
    by the share of the highest-ranked top element that covers it.
    """
    top = report.top if top_n is None else report.top[:top_n]
    ranked: dict[str, tuple[int, float]] = {}
    for rank, (eid, share) in enumerate(top):
        for sub in hierarchy.resolve_subtree(eid):
            ranked.setdefault(sub, (rank, share))
    by_mode: dict[str, list[Intervention]] = {}
    for iv in interventions:
        by_mode.setdefault(iv.failure_mode_id, []).append(iv)
    cands = []
    for fm in failure_modes:
        if fm.element_id not in ranked:
            continue
        rank, share = ranked[fm.element_id]
        ivs = sorted(by_mode.get(fm.id, ()), key=lambda i: (_KIND_ORDER[i.kind], i.id))
        cands.append((rank, fm.id, Candidate(fm.id, fm.name, fm.element_id, share, tuple(ivs))))
    cands.sort(key=lambda t: (t[0], t[1]))
    return EnrichedDetection(
        report.cycle_index,
        report.attention_index,
        tuple((e, s, tuple(hierarchy.path(e))) for e, s in top),
        tuple(c for _, _, c in cands),
    )


# -- evaluate -------------------------------------------------------------------------


def load_cost_file(path: str | os.PathLike) -> tuple[list[CostSet], str]:
    """Scenarios and the name of the one used for the operating threshold."""
    p = Path(path)
    if not p.exists():
        raise PreconditionError(f"cost file not found: {p}")
    doc = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    raw = doc.get("scenarios")
    if not raw:
        raise PreconditionError(f"{p}: no scenarios")
    scenarios = []
    for i, s in enumerate(raw):
        d = {k: v for k, v in s.items() if k not in ("name", "description")}
        scenarios.append(CostSet.from_mapping(d, str(s.get("name", f"scenario{i + 1}"))))
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        raise PreconditionError(f"{p}: duplicate scenario names")
    decision = str(doc.get("decision_scenario", names[0]))
    if decision not in names:
        raise PreconditionError(f"{p}: decision_scenario {decision!r} is not one of {names}")
    return scenarios, decision


@dataclass
class Evaluation:
    scores: list[ScoreRecord]
    labels: list[bool]
    scenarios: list[CostSet]
    decision: str
    thresholds: dict[str, float]
    average_precision: float
    files: list[str] = field(default_factory=list)


def _test_labels(store: Store, records: Sequence[ScoreRecord]) -> list[bool]:
    by_cycle = {l.cycle_index: l for l in load_labels(store)}
    return [by_cycle[r.cycle_index].degraded for r in records]


def evaluate(
    store: Store,
    costs_path: str | os.PathLike,
    out_dir: str | os.PathLike,
    method_id: str | None = None,
    svg: bool = True,
    records: Sequence[ScoreRecord] | None = None,
) -> Evaluation:
    """Write the PR curve, dQCPN curves and the per-scenario summary for the test split."""
    scenarios, decision = load_cost_file(costs_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    recs = list(records) if records is not None else score(store, method_id, "test")
    y = _test_labels(store, recs)
    s = [r.attention_index for r in recs]
    files = []

    pr = pr_curve(s, y)
    _write_csv(out / "pr_curve.csv", ["threshold", "precision", "recall"],
               [[_fmt(p.threshold), repr(p.precision), repr(p.recall)] for p in pr])
    files.append("pr_curve.csv")

    curves = {c.name: delta_qcpn_curve(s, y, c) for c in scenarios}
    grid = [t for t, _ in curves[scenarios[0].name]]
    _write_csv(
        out / "delta_qcpn_curve.csv",
        ["threshold", *curves],
        [[_fmt(t), *(repr(curves[n][i][1]) for n in curves)] for i, t in enumerate(grid)],
    )
    files.append("delta_qcpn_curve.csv")

    rows, thresholds = [], {}
    for c in scenarios:
        t, d = optimal_threshold(s, y, c)
        rates, counts = confusion_rates(s, y, t)
        figs = delta_qcpn(c, rates)
        thresholds[c.name] = t
        rows.append([
            c.name, _fmt(t), repr(d), repr(rates.TPR), repr(rates.FPR), repr(rates.FNR),
            counts["TP"], counts["FP"], counts["FN"], counts["TN"],
            repr(figs.RPN), repr(figs.QCPN), repr(figs.QCPN_star), repr(none_detect_value(c)),
        ])
    _write_csv(
        out / "scenario_summary.csv",
        ["scenario", "threshold", "delta_QCPN", "TPR", "FPR", "FNR", "TP", "FP", "FN", "TN",
         "RPN", "QCPN", "QCPN_star", "none_detect_delta"],
        rows,
    )
    files.append("scenario_summary.csv")

    if svg:
        finite = [(p.recall, p.precision) for p in pr]
        (out / "pr_curve.svg").write_text(
            charts.line_chart([("attention index", [r for r, _ in finite], [p for _, p in finite])],
                              "Precision-recall (test split)", "recall", "precision", steps=True),
            encoding="utf-8",
        )
        xs = [t for t in grid if np.isfinite(t)]
        series = [(n, xs, [d for t, d in curves[n] if np.isfinite(t)]) for n in curves]
        (out / "delta_qcpn_curve.svg").write_text(
            charts.line_chart(series, "Expected cost reduction vs threshold", "threshold", "delta QCPN"),
            encoding="utf-8",
        )
        files += ["pr_curve.svg", "delta_qcpn_curve.svg"]
    return Evaluation(recs, y, scenarios, decision, thresholds, average_precision(s, y), files)


def write_project2d(path: Path, model: MonitorModel, fm: FeatureMatrix, labels: Sequence[CycleLabel]) -> None:
    proj = project2d(model, fm)
    health = {l.cycle_index: l.health for l in labels}
    train = set(model.train_cycles)
    _write_csv(
        path,
        ["cycle", "pc1", "pc2", "health", "train"],
        [[c, repr(float(a)), repr(float(b)), health.get(c, ""), int(c in train)]
         for c, (a, b) in zip(fm.cycles.tolist(), proj.tolist())],
    )


# -- detections and attributions ------------------------------------------------------


def write_detections(
    out: Path,
    store: Store,
    model: MonitorModel,
    evaluation: Evaluation,
    top_n: int = 3,
    lead_window: int = 0,
) -> list[EnrichedDetection]:
    """Enrich every test cycle detected at the decision threshold and write the CSVs."""
    t = evaluation.thresholds[evaluation.decision]
    recs = evaluation.scores
    flags = detect_cycles({r.cycle_index: r.attention_index for r in recs}, t)
    h = Hierarchy(store.all(SystemElement))
    fms, ivs = store.all(FailureMode), store.all(Intervention)
    se = sensor_elements(store)
    health = {l.cycle_index: l for l in load_labels(store)}
    enriched = []
    det_rows, attr_rows = [], []
    for r in recs:
        if not flags[r.cycle_index]:
            continue
        rep = attribute(model, r, se, top_n, h)
        e = enrich_detection(rep, h, fms, ivs)
        enriched.append(e)
        lab = health[r.cycle_index]
        det_rows.append([
            r.cycle_index, repr(r.attention_index), lab.health, ";".join(lab.failure_mode_ids),
            ";".join(el for el, _, _ in e.top),
            ";".join(c.failure_mode_id for c in e.candidates),
            ";".join(f"{c.failure_mode_id}:{'|'.join(i.id for i in c.interventions)}" for c in e.candidates),
        ])
        for rank, (el, share, path) in enumerate(e.top, 1):
            attr_rows.append([r.cycle_index, rank, el, repr(share), "/".join(path)])
    _write_csv(out / "detections.csv",
               ["cycle", "attention_index", "health", "true_failure_modes", "top_elements",
                "candidate_failure_modes", "interventions"], det_rows)
    _write_csv(out / "attributions.csv", ["cycle", "rank", "element", "share", "path"], attr_rows)

    test = set(r.cycle_index for r in recs)
    incidents = []
    for inc in store.all(FailureIncident):
        # clip incidents to the test split; training cycles are healthy by construction
        cyc = [c for c in range(inc.first, inc.last + 1) if c in test]
        if cyc:
            incidents.append(FailureIncident(inc.id, inc.asset_id, inc.failure_mode_id, (cyc[0], cyc[-1])))
    rec = reconcile({c: flags[c] for c in flags if health[c].health != "unstable"}, incidents, lead_window)
    _write_csv(out / "incidents.csv", ["incident", "failure_mode", "first", "last", "status"],
               [[i.id, i.failure_mode_id, i.first, i.last, i.status.value] for i in rec.incidents])
    evaluation.files += ["detections.csv", "attributions.csv", "incidents.csv"]
    return enriched


# -- full pipeline --------------------------------------------------------------------


@dataclass
class PipelineConfig:
    dataset_dir: str
    spec_path: str
    costs_path: str
    out_dir: str
    method_id: str | None = None
    k: int = DEFAULT_K
    ratio: float = DEFAULT_RATIO
    seed: int = 0
    top_n: int = 3
    lead_window: int = 0
    svg: bool = True
    keep_store: bool = False


def _stage(name: str, fn, *args, **kwargs):
    log.info("stage %s", name)
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (DeepFMEAError, OSError, ValueError, KeyError) as exc:
        raise StageError(name, exc) from exc


def run_pipeline(config: PipelineConfig) -> Path:
    """ingest -> features -> split/fit -> score -> evaluate -> enrich, into ``config.out_dir``.

    Work happens in a sibling temporary directory that replaces
    ``out_dir`` only on success, so a failed run leaves nothing behind.
    """
    out = Path(config.out_dir).resolve()
    out.parent.mkdir(parents=True, exist_ok=True)
    stage_dir = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        store = Store(stage_dir / "store")
        _stage("model", apply_model_spec, config.spec_path, store)
        _stage("ingest", ingest, store, config.dataset_dir)
        method = _stage("features", _method, store, config.method_id)
        _stage("features", lambda: load_features(store, method_sensor_ids(store, method)))
        model, split = _stage("fit", fit, store, method.id, config.k, config.ratio, config.seed)
        records = _stage("score", score, store, method.id, "test")
        report = stage_dir / "report"
        report.mkdir()
        write_scores(report / "scores.csv", records)
        ev = _stage("evaluate", evaluate, store, config.costs_path, report, method.id, config.svg, records)
        ev.files.insert(0, "scores.csv")
        _stage("enrich", write_detections, report, store, model, ev, config.top_n, config.lead_window)
        fm = load_features(store, model.feature_ids)
        _stage("project2d", write_project2d, report / "project2d.csv", model, fm, load_labels(store))
        ev.files.append("project2d.csv")

        manifest = {
            "spec_hash": stored_spec_hash(store),
            "method": method.id,
            "seed": config.seed,
            "k": config.k,
            "ratio": config.ratio,
            "top_n": config.top_n,
            "lead_window": config.lead_window,
            "decision_scenario": ev.decision,
            "thresholds": {n: _fmt(t) for n, t in sorted(ev.thresholds.items())},
            "average_precision": ev.average_precision,
            "n_train": len(split.train),
            "n_test": len(split.test),
            "features": len(model.feature_ids),
            "dropped_features": model.dropped,
            "files": {name: _sha256_file(report / name) for name in sorted(ev.files)},
        }
        (report / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        if config.keep_store:
            shutil.move(str(stage_dir / "store"), str(report / "store"))
        if out.exists():
            shutil.rmtree(out)
        os.replace(report, out)
        return out
    finally:
        shutil.rmtree(stage_dir, ignore_errors=True)


def read_manifest(run_dir: str | os.PathLike) -> dict:
    path = Path(run_dir) / MANIFEST
    if not path.exists():
        raise PreconditionError(f"no {MANIFEST} in {run_dir}")
    return json.loads(path.read_text(encoding="utf-8"))


def render_report(run_dir: str | os.PathLike, max_detections: int = 10) -> str:
    """Plain-text summary of a pipeline run for operators."""
    run = Path(run_dir)
    m = read_manifest(run)
    lines = [
        f"method {m['method']}  k={m['k']}  ratio={m['ratio']}  seed={m['seed']}",
        f"spec {m['spec_hash'][:12]}  train={m['n_train']}  test={m['n_test']}  features={m['features']}",
        f"average precision (test): {m['average_precision']:.4f}",
        "",
        "scenario  threshold  delta_QCPN  TPR  FPR",
    ]
    with open(run / "scenario_summary.csv", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            mark = " *" if row["scenario"] == m["decision_scenario"] else ""
            lines.append(
                f"{row['scenario']}  {float(row['threshold']):.4g}  {float(row['delta_QCPN']):.4g}  "
                f"{float(row['TPR']):.3f}  {float(row['FPR']):.3f}{mark}"
            )
    with open(run / "detections.csv", newline="", encoding="utf-8") as fh:
        dets = list(csv.DictReader(fh))
    lines += ["", f"{len(dets)} detection(s) at the {m['decision_scenario']} threshold"]
    for d in sorted(dets, key=lambda d: -float(d["attention_index"]))[:max_detections]:
        lines.append(
            f"  cycle {d['cycle']}: AI={float(d['attention_index']):.3g}  top={d['top_elements'].replace(';', ', ')}"
            f"  candidates={d['candidate_failure_modes'].replace(';', ', ') or '-'}"
        )
    return "\n".join(lines) + "\n"


def check_manifest(run_dir: str | os.PathLike) -> list[str]:
    """Files whose digest no longer matches the manifest."""
    run = Path(run_dir)
    m = read_manifest(run)
    return [n for n, d in m["files"].items() if not (run / n).exists() or _sha256_file(run / n) != d]


__all__ = [
    "Candidate", "EnrichedDetection", "Evaluation", "PipelineConfig", "attribute_cycle", "check_manifest",
    "compute_features", "enrich_detection", "evaluate", "fit", "ingest", "load_cost_file", "load_features",
    "load_fitted", "method_sensor_ids", "read_manifest", "render_report", "run_pipeline", "score",
    "write_detections", "write_project2d", "write_scores",
]
