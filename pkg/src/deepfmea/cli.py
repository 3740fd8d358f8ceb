"""Command-line front end.

Every subcommand works on a store directory (``--store`` or
``DEEPFMEA_STORE``).  Failures exit with status 1 and a diagnostic tagged
with the stage that failed, e.g. ``deepfmea: [fit] PreconditionError: ...``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

from . import pipeline, synthetic
from .detect import DEFAULT_K, DEFAULT_RATIO
from .errors import DeepFMEAError, StageError
from .modelspec import apply_model_spec, shipped_spec_path
from .risk import fmt_threshold
from .store import Store

log = logging.getLogger("deepfmea")


def _store(args, create: bool = False) -> Store:
    if not args.store:
        raise SystemExit("deepfmea: no store given (use --store or set DEEPFMEA_STORE)")
    return Store(args.store, create=create)


def _spec_arg(value: str | None) -> str:
    return str(shipped_spec_path()) if value in (None, "hydraulic") else value


def _costs_arg(value: str | None) -> str:
    return str(shipped_spec_path("costs.yaml")) if value in (None, "default") else value


def _out(path: str | None):
    if path is None or path == "-":
        return sys.stdout
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline="", encoding="utf-8")


def cmd_model_apply(args) -> None:
    spec = apply_model_spec(_spec_arg(args.model), _store(args, create=True))
    print(f"applied {spec.name}: {len(spec.entities())} entities, hash {spec.hash[:12]}")


def cmd_ingest(args) -> None:
    store = _store(args, create=True)
    counts = pipeline.ingest(store, args.dataset_dir, _spec_arg(args.model) if args.model else None)
    print(
        f"ingested {counts.cycles} cycles x {counts.signals} signals: "
        f"{counts.healthy} healthy, {counts.degraded} degraded, {counts.unstable} unstable; "
        f"{counts.incidents} incidents"
    )


def cmd_features(args) -> None:
    store = _store(args)
    ids = args.sensors.split(",") if args.sensors else None
    fm = pipeline.compute_features(store, ids)
    if args.out:
        fm.to_csv(args.out)
    print(f"{fm.values.shape[0]} cycles x {fm.values.shape[1]} features, {len(fm.errors)} failed cells")


def cmd_fit(args) -> None:
    model, split = pipeline.fit(_store(args), args.method, args.k, args.ratio, args.seed)
    print(
        f"fitted on {len(model.train_cycles)} healthy cycles, {len(model.feature_ids)} features "
        f"({len(model.dropped)} dropped); test split has {len(split.test)} cycles"
    )
    for w in model.warnings:
        print(f"warning: {w}", file=sys.stderr)


def cmd_score(args) -> None:
    recs = pipeline.score(_store(args), args.method, args.split)
    fh = _out(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cycle", "attention_index", "imputed_flag"])
        for r in recs:
            w.writerow([r.cycle_index, repr(r.attention_index), int(r.imputed)])
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_attribute(args) -> None:
    rep = pipeline.attribute_cycle(_store(args), args.cycle, args.method, args.top, args.rollup)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["element", "share"])
    for e, s in rep.top:
        w.writerow([e, f"{s:.6f}"])


def cmd_evaluate(args) -> None:
    ev = pipeline.evaluate(_store(args), _costs_arg(args.costs), args.out, args.method, not args.no_svg)
    print(f"average precision {ev.average_precision:.4f}; wrote {', '.join(ev.files)} to {args.out}")
    for name, t in ev.thresholds.items():
        mark = " (decision)" if name == ev.decision else ""
        print(f"  scenario {name}: optimal threshold {fmt_threshold(t)}{mark}")


def cmd_project2d(args) -> None:
    store = _store(args)
    _, model, _ = pipeline.load_fitted(store, args.method)
    fm = pipeline.load_features(store, model.feature_ids)
    pipeline.write_project2d(Path(args.out), model, fm, pipeline.load_labels(store))
    print(f"wrote {args.out}")


def cmd_run(args) -> None:
    cfg = pipeline.PipelineConfig(
        dataset_dir=args.dataset_dir,
        spec_path=_spec_arg(args.model),
        costs_path=_costs_arg(args.costs),
        out_dir=args.out,
        method_id=args.method,
        k=args.k,
        ratio=args.ratio,
        seed=args.seed,
        top_n=args.top,
        lead_window=args.lead_window,
        svg=not args.no_svg,
        keep_store=args.keep_store,
    )
    out = pipeline.run_pipeline(cfg)
    m = pipeline.read_manifest(out)
    print(f"report in {out}: AP={m['average_precision']:.4f}, {len(m['files'])} files")


def cmd_report(args) -> None:
    bad = pipeline.check_manifest(args.run_dir)
    sys.stdout.write(pipeline.render_report(args.run_dir, args.max))
    if bad:
        raise DeepFMEAError(f"files changed since the run: {', '.join(bad)}")


def cmd_synth(args) -> None:
    info = synthetic.generate(args.out, args.cycles, args.seed)
    print(f"wrote {info['cycles']} surrogate cycles ({info['healthy']} healthy) to {args.out}")


def build_parser() -> argparse.ArgumentParser:
    def globals_(suppress: bool) -> argparse.ArgumentParser:
        # subcommands repeat the global flags; SUPPRESS keeps them from
        # overwriting values given before the subcommand
        g = argparse.ArgumentParser(add_help=False)
        dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g.add_argument("--store", default=dflt(os.environ.get("DEEPFMEA_STORE")),
                       help="store directory (default: $DEEPFMEA_STORE)")
        g.add_argument("--seed", type=int, default=dflt(0), help="split / generator seed")
        g.add_argument("-v", "--verbose", action="count", default=dflt(0))
        return g

    common = globals_(True)
    p = argparse.ArgumentParser(prog="deepfmea", description=__doc__.splitlines()[0], parents=[globals_(False)])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, parent=sub):
        sp = parent.add_parser(name, help=help_, parents=[common])
        sp.set_defaults(fn=fn, stage=name)
        return sp

    model = sub.add_parser("model", help="model definition commands")
    msub = model.add_subparsers(dest="model_command", required=True)
    sp = add("apply", cmd_model_apply, "apply a model spec to the store", msub)
    sp.add_argument("model", nargs="?", help="spec file (default: shipped hydraulic spec)")
    sp.set_defaults(stage="model")

    sp = add("ingest", cmd_ingest, "load a dataset directory into the store")
    sp.add_argument("--dataset-dir", required=True)
    sp.add_argument("--model", help="apply this spec first ('hydraulic' for the shipped one)")

    feats = sub.add_parser("features", help="feature commands")
    fsub = feats.add_subparsers(dest="features_command", required=True)
    sp = add("compute", cmd_features, "evaluate virtual sensors for every cycle", fsub)
    sp.add_argument("--sensors", help="comma-separated virtual sensor ids (default: all)")
    sp.add_argument("--out", help="also write the feature CSV here")
    sp.set_defaults(stage="features")

    sp = add("fit", cmd_fit, "fit the monitoring model")
    sp.add_argument("--method")
    sp.add_argument("--k", type=int, default=DEFAULT_K)
    sp.add_argument("--ratio", type=float, default=DEFAULT_RATIO)

    sp = add("score", cmd_score, "attention index per cycle as CSV")
    sp.add_argument("--method")
    sp.add_argument("--split", choices=("test", "train", "all"), default="test")
    sp.add_argument("--out", help="CSV path (default: stdout)")

    sp = add("attribute", cmd_attribute, "ranked element shares of one cycle")
    sp.add_argument("--method")
    sp.add_argument("--cycle", type=int, required=True)
    sp.add_argument("--top", type=int, default=3)
    sp.add_argument("--rollup", action="store_true", help="credit each element with its subtree")

    sp = add("evaluate", cmd_evaluate, "PR curve, dQCPN curves and scenario summary")
    sp.add_argument("--method")
    sp.add_argument("--costs", help="cost scenario file (default: shipped costs.yaml)")
    sp.add_argument("--out", required=True)
    sp.add_argument("--no-svg", action="store_true")

    sp = add("project2d", cmd_project2d, "2-component projection of z-scored cycles")
    sp.add_argument("--method")
    sp.add_argument("--out", required=True)

    sp = add("run", cmd_run, "full pipeline into a report directory")
    sp.add_argument("--dataset-dir", required=True)
    sp.add_argument("--model", help="spec file (default: shipped hydraulic spec)")
    sp.add_argument("--costs", help="cost scenario file (default: shipped costs.yaml)")
    sp.add_argument("--out", required=True)
    sp.add_argument("--method")
    sp.add_argument("--k", type=int, default=DEFAULT_K)
    sp.add_argument("--ratio", type=float, default=DEFAULT_RATIO)
    sp.add_argument("--top", type=int, default=3)
    sp.add_argument("--lead-window", type=int, default=0)
    sp.add_argument("--no-svg", action="store_true")
    sp.add_argument("--keep-store", action="store_true", help="keep the working store inside the report")

    sp = add("report", cmd_report, "summarise a pipeline report directory")
    sp.add_argument("run_dir")
    sp.add_argument("--max", type=int, default=10, help="detections to list")

    sp = add("synth", cmd_synth, "write a surrogate dataset for offline runs")
    sp.add_argument("--out", required=True)
    sp.add_argument("--cycles", type=int, default=300)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.fn(args)
    except StageError as exc:
        print(f"deepfmea: {exc}", file=sys.stderr)
        return 1
    except (DeepFMEAError, OSError, ValueError) as exc:
        print(f"deepfmea: [{args.stage}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
