"""Command-line surface: synth, preprocess, featurize, evaluate, tune, scale.

Every flag can also come from a JSON config file (--config); explicit
command-line values win.  Reports embed the resolved config hash, the seed,
the metric-catalog version, and package/backend versions, so identical runs
produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

import palsy
from palsy import charts
from palsy import features as ft
from palsy.dataset_io import CLASS_LABELS, generate_synthetic_cohort, load_cohort, save_cohort
from palsy.errors import PalsyError
from palsy.evaluation import Trainer, loocv, render_confusion
from palsy.features import View, build_view, default_catalog, load_feature_matrix, save_feature_matrix
from palsy.preprocess import load_processed, run_pipeline, save_processed, save_report
from palsy.scaling import (
    build_schedule,
    fit_curve,
    fit_to_json,
    run_scaling,
    series_to_csv,
    solve_target_size,
)
from palsy.svm import Kernel, KernelSpec

ENV_SEED = "PALSY_BENCH_SEED"

# paper-run defaults, per view
VIEW_DEFAULTS = {
    View.LANDMARKS: {"depth": 10, "k": 5, "trees": 200, "degree": 4},
    View.NO_CHIN: {"depth": 10, "k": 5, "trees": 200, "degree": 4},
    View.METRICS: {"depth": 20, "k": 7, "trees": 100, "degree": 15},
}


def _default_seed() -> int:
    env = os.environ.get(ENV_SEED)
    return int(env) if env else 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file supplying any flag; command line overrides")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help=f"RNG seed (fallback: ${ENV_SEED}, then 0)")
    parser.add_argument("--threads", type=int, help="worker threads for LOOCV folds (default: all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="palsy", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic cohort")
    _add_common(p)
    p.add_argument("--n-p", type=int, default=50, help="peripheral count")
    p.add_argument("--n-c", type=int, default=20, help="central count")
    p.add_argument("--n-h", type=int, default=30, help="healthy count")
    p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("preprocess", help="run the five-step geometric pipeline")
    _add_common(p)
    p.add_argument("--data", help="raw cohort file")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--exclusion-threshold", type=int, default=20)

    p = sub.add_parser("featurize", help="write one feature view as CSV")
    _add_common(p)
    p.add_argument("--data", help="processed cohort file")
    p.add_argument("--view", choices=[v.value for v in View], default="landmarks")

    for name, for_help in (("evaluate", "full LOOCV for one model/view"),
                           ("tune", "LOOCV sweep over one hyperparameter"),
                           ("scale", "stratified-removal scaling study")):
        p = sub.add_parser(name, help=for_help)
        _add_common(p)
        p.add_argument("--data", help="processed cohort or feature-matrix file")
        p.add_argument("--view", choices=[v.value for v in View], default="landmarks")
        p.add_argument("--model", choices=["gnb", "tree", "knn", "forest", "svm"], default="gnb")
        p.add_argument("--depth", type=int, help="tree/forest max depth")
        p.add_argument("--k", type=int, help="KNN neighbour count")
        p.add_argument("--trees", type=int, help="forest estimator count")
        p.add_argument("--kernel", choices=[k.value for k in Kernel], default="poly")
        p.add_argument("--degree", type=int, help="polynomial kernel degree")
        p.add_argument("--c", type=float, default=1.0, help="SVM penalty C")
        p.add_argument("--balanced", action=argparse.BooleanOptionalAction, default=True,
                       help="inverse-frequency class weights for the SVM")
        if name == "tune":
            p.add_argument("--param", choices=["depth", "k", "trees", "degree"], required=True)
            p.add_argument("--range", required=True, help="sweep as LO:HI[:STEP], inclusive")
        if name == "scale":
            p.add_argument("--floor", type=int, default=40)
            p.add_argument("--stride", type=int, default=1)
            p.add_argument("--target", type=float, default=0.95)

    return parser


def _apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser, argv: list[str]) -> None:
    """File-supplied values fill in flags the command line left at default."""
    if not args.config:
        return
    with open(args.config) as fh:
        config = json.load(fh)
    given = set()
    for a in argv:
        if a.startswith("--"):
            name = a.lstrip("-").split("=")[0].replace("-", "_")
            given.add(name)
            if name.startswith("no_"):  # --no-X spellings of boolean flags
                given.add(name[3:])
    for key, value in config.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise PalsyError(f"config key {key!r} does not apply to this command")
        if attr not in given:
            setattr(args, attr, value)


def _resolved_config(args: argparse.Namespace) -> dict:
    d = {k: v for k, v in sorted(vars(args).items()) if k != "config"}
    return d


def _meta(args: argparse.Namespace) -> dict:
    config = _resolved_config(args)
    blob = json.dumps(config, sort_keys=True, default=str)
    return {
        "config": config,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
        "seed": args.seed,
        "catalog_version": default_catalog().version,
        "versions": {"package": palsy.__version__, "backend": palsy.backend_name},
    }


def _outdir(args: argparse.Namespace) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_view(args: argparse.Namespace) -> ft.FeatureMatrix:
    """Accept either a processed cohort or a ready feature matrix."""
    if not args.data:
        raise PalsyError("--data is required")
    path = Path(args.data)
    if not path.exists():
        raise PalsyError(f"input file not found: {path}")
    with open(path) as fh:
        head = fh.readline()
    if head.startswith("id,label,box_x1"):
        samples = load_processed(path)
        return build_view(samples, View(args.view))
    fm = load_feature_matrix(path)
    if fm.view is not View(args.view):
        raise PalsyError(f"feature file holds the {fm.view.value} view, but --view={args.view}")
    return fm


def _trainer(args: argparse.Namespace, view: View) -> Trainer:
    defaults = VIEW_DEFAULTS[view]
    if args.model == "gnb":
        return Trainer("gnb")
    if args.model == "tree":
        return Trainer("tree", {"max_depth": args.depth or defaults["depth"]})
    if args.model == "knn":
        return Trainer("knn", {"k": args.k or defaults["k"]})
    if args.model == "forest":
        return Trainer(
            "forest",
            {"n_estimators": args.trees or defaults["trees"], "max_depth": args.depth or defaults["depth"]},
        )
    spec = KernelSpec(kind=Kernel(args.kernel), degree=args.degree or defaults["degree"])
    return Trainer("svm", {"spec": spec, "C": args.c, "balanced": args.balanced})


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_synth(args) -> int:
    out = _outdir(args)
    cohort = generate_synthetic_cohort(args.n_p, args.n_c, args.n_h, seed=args.seed)
    save_cohort(cohort, out / f"cohort.{args.format}", format=args.format)
    print(f"wrote {out / f'cohort.{args.format}'} ({len(cohort)} samples)")
    return 0


def cmd_preprocess(args) -> int:
    if not args.data:
        raise PalsyError("--data is required")
    cohort = load_cohort(args.data, format=args.format)
    processed, report = run_pipeline(cohort, exclusion_threshold=args.exclusion_threshold)
    out = _outdir(args)
    save_processed(processed, out / "processed.csv")
    save_report(report, out / "pipeline_report.json", meta=_meta(args))
    print(f"processed {len(processed)} of {len(cohort)} samples ({len(report.excluded)} excluded)")
    return 0


def cmd_featurize(args) -> int:
    if not args.data:
        raise PalsyError("--data is required")
    samples = load_processed(args.data)
    fm = build_view(samples, View(args.view))
    out = _outdir(args)
    save_feature_matrix(fm, out / f"features_{args.view}.csv")
    _write_json(out / f"features_{args.view}.meta.json", {"meta": _meta(args), "shape": [fm.n, fm.f]})
    print(f"wrote {fm.n}x{fm.f} {args.view} view")
    return 0


def cmd_evaluate(args) -> int:
    fm = _load_view(args)
    trainer = _trainer(args, fm.view)
    result = loocv(fm, trainer, seed=args.seed, threads=args.threads or os.cpu_count() or 1)
    out = _outdir(args)
    stem = f"eval_{args.model}_{args.view}"
    with open(out / f"{stem}.json", "w") as fh:
        fh.write(result.to_json(meta=_meta(args)))
    with open(out / f"{stem}_confusion.txt", "w") as fh:
        fh.write(render_confusion(result.confusion))
    print(f"accuracy {result.accuracy:.1f}% over {fm.n} folds -> {out / (stem + '.json')}")
    return 0


def _parse_range(text: str) -> list[int]:
    parts = [int(p) for p in text.split(":")]
    if len(parts) == 2:
        lo, hi, step = parts[0], parts[1], 1
    elif len(parts) == 3:
        lo, hi, step = parts
    else:
        raise PalsyError(f"bad --range {text!r}; expected LO:HI[:STEP]")
    if step < 1 or hi < lo:
        raise PalsyError(f"bad --range {text!r}")
    return list(range(lo, hi + 1, step))


def cmd_tune(args) -> int:
    fm = _load_view(args)
    values = _parse_range(args.range)
    threads = args.threads or os.cpu_count() or 1
    rows = []
    for v in values:
        setattr(args, {"depth": "depth", "k": "k", "trees": "trees", "degree": "degree"}[args.param], v)
        trainer = _trainer(args, fm.view)
        result = loocv(fm, trainer, seed=args.seed, threads=threads)
        central = result.sensitivities[CLASS_LABELS[1]]
        rows.append((v, result.accuracy, central if central is not None else 0.0))
    out = _outdir(args)
    stem = f"tune_{args.model}_{args.param}_{args.view}"
    import csv as _csv

    with open(out / f"{stem}.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow([args.param, "accuracy", "central_sensitivity"])
        for v, acc, sens in rows:
            writer.writerow([v, format(acc, ".17g"), format(sens, ".17g")])
    charts.line_chart(
        out / f"{stem}.svg",
        [
            charts.Series("accuracy", tuple(r[0] for r in rows), tuple(r[1] for r in rows), charts.pick_color(0)),
            charts.Series("central sensitivity", tuple(r[0] for r in rows), tuple(r[2] for r in rows), charts.pick_color(1)),
        ],
        title=f"{args.model} LOOCV vs {args.param} ({args.view})",
        x_label=args.param,
        y_label="percent",
    )
    _write_json(out / f"{stem}.meta.json", {"meta": _meta(args)})
    print(f"swept {len(rows)} values -> {out / (stem + '.csv')}")
    return 0


def cmd_scale(args) -> int:
    fm = _load_view(args)
    counts = tuple(int((fm.labels == k).sum()) for k in range(3))
    schedule = build_schedule(counts, floor=args.floor, seed=args.seed)
    trainer = _trainer(args, fm.view)
    series = run_scaling(
        fm, trainer, schedule, stride=args.stride, seed=args.seed,
        threads=args.threads or os.cpu_count() or 1,
    )
    out = _outdir(args)
    series_to_csv(series, out / "scaling_series.csv")

    sizes = np.array(series.sizes(), dtype=np.float64)
    meta = _meta(args)
    curves = {}
    for key, idx in (("accuracy", 1), ("central_sensitivity", 2)):
        ys = np.array([p[idx] for p in series.points]) / 100.0
        ys = np.minimum(ys, 1.0 - 1e-9)  # LOOCV at 100% would break the log transform
        try:
            curve = fit_curve(sizes, ys)
            target_size = solve_target_size(curve, args.target) if curve.B < 0 else None
            fit_to_json(curve, out / f"fit_{key}.json", target=args.target, target_size=target_size, meta=meta)
            curves[key] = curve
        except PalsyError as e:
            _write_json(out / f"fit_{key}.json", {"error": str(e), "meta": meta})
    chart_series = [
        charts.Series("accuracy", tuple(series.sizes()), tuple(p[1] for p in series.points), charts.pick_color(0)),
        charts.Series("central sensitivity", tuple(series.sizes()), tuple(p[2] for p in series.points), charts.pick_color(1)),
    ]
    for i, (key, curve) in enumerate(sorted(curves.items())):
        fit_ys = tuple(float(curve.value(x)) * 100.0 for x in sizes)
        chart_series.append(charts.Series(f"{key} fit", tuple(series.sizes()), fit_ys, charts.pick_color(i), dashed=True))
    charts.line_chart(
        out / "scaling_chart.svg",
        chart_series,
        title=f"{args.model} on {args.view}: performance vs dataset size",
        x_label="dataset size",
        y_label="percent",
    )
    print(f"scaling series with {len(series.points)} points -> {out / 'scaling_series.csv'}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "featurize": cmd_featurize,
    "evaluate": cmd_evaluate,
    "tune": cmd_tune,
    "scale": cmd_scale,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args, parser, argv)
        if args.seed is None:
            args.seed = _default_seed()
        return COMMANDS[args.command](args)
    except PalsyError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
