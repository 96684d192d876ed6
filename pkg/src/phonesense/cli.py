"""Command-line experiment runner.

Commands: synth, extract, grid, evaluate, predict, compare, report.
Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
The PHONESENSE_SEED environment variable overrides any configured seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .classifiers import ModelSpec, model_from_dict, model_to_dict, predict_score, train_model
from .dimreduce import ReductionSpec, FittedReducer, fit_reducer, reduce_apply
from .errors import NoResults, PhonesenseError, SampleMismatch
from .evaluation import (
    EvaluationReport,
    PipelineConfig,
    mcnemar,
    run_loo,
    write_densities_csv,
    write_predictions_csv,
    write_roc_csv,
)
from .features import (
    fuse_matrix,
    read_feature_csv,
    write_feature_csv,
    zscore_apply,
    zscore_fit,
)
from .preprocess import SMOOTHING_GRID, SmoothingSpec, build_dataset, dump_windows_csv
from .session import SIGNAL_SETS, WindowPolicy, load_session
from .synthgen import generate_dataset, get_preset

USAGE_ERROR, DATA_ERROR, INTERNAL_ERROR = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # the spec'd exit code for usage errors is 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _env_seed(seed: int) -> int:
    env = os.environ.get("PHONESENSE_SEED")
    return int(env) if env else seed


def load_sessions(data_dir):
    """Load every session directory under data_dir (manifest-aware)."""
    data_dir = Path(data_dir)
    manifest = data_dir / "manifest.json"
    if manifest.exists():
        with open(manifest) as fh:
            names = json.load(fh)["sessions"]
        dirs = [data_dir / name for name in names]
    else:
        dirs = sorted(p for p in data_dir.iterdir() if (p / "participant.json").exists())
    if not dirs:
        raise NoResults(f"no session directories under {data_dir}")
    return [load_session(d) for d in dirs]


def _smoothing_spec(window_s: int, allow_custom: bool) -> SmoothingSpec:
    if window_s not in SMOOTHING_GRID and not allow_custom:
        raise PhonesenseError(
            f"smoothing window {window_s} not in {SMOOTHING_GRID}; "
            "pass --allow-custom-smoothing to override"
        )
    return SmoothingSpec(window_s, allow_custom=allow_custom)


def _build_samples(sessions, window_s: int, seed: int, allow_custom: bool = False):
    spec = _smoothing_spec(window_s, allow_custom)
    policy = WindowPolicy(seed=seed)
    return build_dataset(sessions, spec, policy)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    preset = get_preset(args.preset, seed=_env_seed(args.seed))
    manifest = generate_dataset(preset, args.phone, args.nophone, args.out)
    print(f"wrote {len(manifest['sessions'])} sessions to {args.out}")
    print(Path(args.out) / "manifest.json")
    return 0


def cmd_extract(args) -> int:
    seed = _env_seed(args.seed)
    sessions = load_sessions(args.data)
    samples = _build_samples(sessions, args.smoothing, seed, args.allow_custom_smoothing)
    channels = SIGNAL_SETS[args.signals]
    write_feature_csv(samples, channels, args.out)
    print(f"wrote {len(samples)} samples x {64 * len(channels) + 1} features to {args.out}")
    if args.dump_windows:
        dump_windows_csv(samples, args.dump_windows)
        print(f"wrote window dump to {args.dump_windows}")
    return 0


def _parse_grid_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise PhonesenseError(f"{path}:{exc.lineno}: {exc.msg}") from None
    except OSError as exc:
        raise PhonesenseError(f"cannot read config {path}: {exc}") from None

    for key in ("data_dir", "out_dir", "signal_sets", "smoothing", "reductions", "models"):
        if key not in cfg:
            raise PhonesenseError(f"config field {key!r} is required")
    for name in cfg["signal_sets"]:
        if name not in SIGNAL_SETS:
            raise PhonesenseError(f"config field 'signal_sets': unknown signal set {name!r}")
    allow_custom = bool(cfg.get("allow_custom_smoothing", False))
    for w in cfg["smoothing"]:
        if w not in SMOOTHING_GRID and not allow_custom:
            raise PhonesenseError(
                f"config field 'smoothing': {w} not in {SMOOTHING_GRID} "
                "(set allow_custom_smoothing to override)"
            )
    try:
        [ReductionSpec.parse(r) for r in cfg["reductions"]]
        [ModelSpec.parse(m) for m in cfg["models"]]
    except ValueError as exc:
        raise PhonesenseError(f"config: {exc}") from None
    cfg.setdefault("seed", 0)
    return cfg


def _grid_cells(cfg: dict, seed: int):
    cells = []
    for signal_set in cfg["signal_sets"]:
        for window_s in cfg["smoothing"]:
            for reduction in cfg["reductions"]:
                for model in cfg["models"]:
                    cells.append(
                        PipelineConfig(
                            signal_set=signal_set,
                            smoothing_s=window_s,
                            reduction=ReductionSpec.parse(reduction),
                            model=ModelSpec.parse(model, seed=seed),
                            seed=seed,
                        )
                    )
    return cells


def _run_cell(samples, config: PipelineConfig, out_path: Path) -> EvaluationReport:
    report = run_loo(samples, config)
    report.save(out_path)
    return report


def _run_cell_worker(payload):
    """Worker-pool entry: loads its own data so cells stay independent."""
    data_dir, cfg_dict, out_path, allow_custom = payload
    config = PipelineConfig(
        signal_set=cfg_dict["signal_set"],
        smoothing_s=cfg_dict["smoothing_s"],
        reduction=ReductionSpec.parse(cfg_dict["reduction"]),
        model=ModelSpec.parse(cfg_dict["model"], seed=cfg_dict["seed"]),
        seed=cfg_dict["seed"],
    )
    sessions = load_sessions(data_dir)
    samples = _build_samples(sessions, config.smoothing_s, config.seed, allow_custom)
    report = _run_cell(samples, config, Path(out_path))
    return config.cell_id(), report.accuracy


def _write_summary(out_dir: Path, reports: dict) -> Path:
    rows = sorted(
        reports.items(), key=lambda kv: (-kv[1].accuracy, kv[0])
    )
    path = out_dir / "summary.csv"
    with open(path, "w", newline="") as fh:
        fh.write("cell,signal_set,smoothing_s,reduction,model,accuracy,auc,kl_symmetric,n_samples\n")
        for cell_id, rep in rows:
            c = rep.config
            fh.write(
                f"{cell_id},{c['signal_set']},{c['smoothing_s']},{c['reduction']},{c['model']},"
                f"{repr(rep.accuracy)},{repr(rep.auc)},{repr(rep.kl['symmetric'])},{len(rep.records)}\n"
            )
    return path


def cmd_grid(args) -> int:
    cfg = _parse_grid_config(args.config)
    seed = _env_seed(cfg["seed"])
    allow_custom = bool(cfg.get("allow_custom_smoothing", False))
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = _grid_cells(cfg, seed)

    todo = []
    for config in cells:
        out_path = out_dir / f"{config.cell_id()}.json"
        if out_path.exists() and not args.force:
            print(f"skip {config.cell_id()} (report exists)")
        else:
            todo.append((config, out_path))

    failures = {}
    if args.workers > 1 and todo:
        payloads = [
            (cfg["data_dir"], {**c.fingerprint(), "seed": seed}, str(p), allow_custom)
            for c, p in todo
        ]
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            for (config, _), result in zip(todo, pool.map(_run_cell_worker, payloads)):
                print(f"done {result[0]}: accuracy {result[1]:.4f}")
    else:
        sessions = load_sessions(cfg["data_dir"]) if todo else []
        samples_cache = {}
        for config, out_path in todo:
            if config.smoothing_s not in samples_cache:
                samples_cache[config.smoothing_s] = _build_samples(
                    sessions, config.smoothing_s, seed, allow_custom
                )
            try:
                report = _run_cell(samples_cache[config.smoothing_s], config, out_path)
                print(f"done {config.cell_id()}: accuracy {report.accuracy:.4f}")
            except PhonesenseError as exc:
                failures[config.cell_id()] = str(exc)
                print(f"FAILED {config.cell_id()}: {exc}", file=sys.stderr)

    reports = {}
    for config in cells:
        path = out_dir / f"{config.cell_id()}.json"
        if path.exists():
            reports[config.cell_id()] = EvaluationReport.load(path)
    if failures:
        with open(out_dir / "failures.json", "w") as fh:
            json.dump(failures, fh, sort_keys=True, indent=2)
    summary = _write_summary(out_dir, reports)
    print(summary)
    return 0


def cmd_evaluate(args) -> int:
    seed = _env_seed(args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    sessions = load_sessions(args.data)
    samples = _build_samples(sessions, args.smoothing, seed, args.allow_custom_smoothing)
    config = PipelineConfig(
        signal_set=args.signals,
        smoothing_s=args.smoothing,
        reduction=ReductionSpec.parse(args.reduction),
        model=ModelSpec.parse(args.model, seed=seed),
        seed=seed,
    )
    report = run_loo(samples, config)
    report.save(out_dir / "report.json")
    write_predictions_csv(report, out_dir / "predictions.csv")
    write_roc_csv(report, out_dir / "roc.csv")
    write_densities_csv(report, out_dir / "densities.csv")

    # full-data artifact for the predict command
    X, y, _ = fuse_matrix(samples, config.channels())
    z = zscore_fit(X, fitted_on="full")
    xz = zscore_apply(z, X)
    reducer = fit_reducer(config.reduction, xz, y, fitted_on="full")
    model = train_model(reduce_apply(reducer, xz), y, config.model, fitted_on="full")
    artifact = {
        "format_version": 1,
        "config": config.fingerprint(),
        "zscore": {"means": z.means.tolist(), "stds": z.stds.tolist(), "fitted_on": z.fitted_on},
        "reducer": reducer.to_dict(),
        "model": model_to_dict(model),
    }
    with open(out_dir / "model.json", "w") as fh:
        json.dump(artifact, fh, sort_keys=True)
        fh.write("\n")

    print(f"accuracy {report.accuracy:.4f}  auc {report.auc:.4f}")
    print(out_dir / "report.json")
    return 0


def cmd_predict(args) -> int:
    with open(args.model) as fh:
        artifact = json.load(fh)
    from .features import ZScoreParams

    z = ZScoreParams(
        np.array(artifact["zscore"]["means"]),
        np.array(artifact["zscore"]["stds"]),
        artifact["zscore"].get("fitted_on", ""),
    )
    reducer = FittedReducer.from_dict(artifact["reducer"])
    model = model_from_dict(artifact["model"])

    X, _, pids = read_feature_csv(args.features)
    scores = predict_score(model, reduce_apply(reducer, zscore_apply(z, X)))
    with open(args.out, "w", newline="") as fh:
        fh.write("participant_id,score,label_hat\n")
        for pid, score in zip(pids, scores):
            fh.write(f"{pid},{repr(float(score))},{int(score >= 0.5)}\n")
    print(args.out)
    return 0


def cmd_compare(args) -> int:
    rep_a = EvaluationReport.load(args.report_a)
    rep_b = EvaluationReport.load(args.report_b)
    key_a = [(r["participant_id"], r["label"]) for r in rep_a.records]
    key_b = [(r["participant_id"], r["label"]) for r in rep_b.records]
    if key_a != key_b:
        raise SampleMismatch("reports cover different samples or orderings")
    correct_a = [r["correct"] for r in rep_a.records]
    correct_b = [r["correct"] for r in rep_b.records]
    chi2, p = mcnemar(correct_a, correct_b)
    rel = (rep_b.accuracy - rep_a.accuracy) / rep_a.accuracy * 100.0 if rep_a.accuracy else float("inf")
    print(f"accuracy A: {rep_a.accuracy:.4f}")
    print(f"accuracy B: {rep_b.accuracy:.4f}")
    print(f"relative improvement: {rel:+.2f}%")
    print(f"mcnemar chi2: {chi2:.4f}  p: {p:.4g}")
    return 0


def cmd_report(args) -> int:
    results_dir = Path(args.results)
    cell_paths = sorted(
        p
        for p in results_dir.glob("*.json")
        if p.name not in ("failures.json", "report.json", "model.json", "manifest.json")
    )
    reports = {}
    for path in cell_paths:
        try:
            reports[path.stem] = EvaluationReport.load(path)
        except (KeyError, json.JSONDecodeError):
            continue
    if not reports:
        raise NoResults(f"no cell reports in {results_dir}")

    if args.format == "json":
        merged = {cell: rep.to_dict() for cell, rep in sorted(reports.items())}
        out = results_dir / "report.json"
        with open(out, "w") as fh:
            json.dump(merged, fh, sort_keys=True, indent=1)
            fh.write("\n")
        print(out)
        return 0

    summary = _write_summary(results_dir, reports)
    for cell, rep in sorted(reports.items()):
        write_roc_csv(rep, results_dir / f"{cell}_roc.csv")
        write_densities_csv(rep, results_dir / f"{cell}_densities.csv")
    print(summary)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phonesense", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic session dataset")
    p.add_argument("--preset", choices=("strong", "weak", "null"), required=True)
    p.add_argument("--phone", type=int, default=33)
    p.add_argument("--nophone", type=int, default=33)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="extract windows and export the feature matrix")
    p.add_argument("--data", required=True)
    p.add_argument("--signals", choices=sorted(SIGNAL_SETS), default="all")
    p.add_argument("--smoothing", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-windows", default=None)
    p.add_argument("--allow-custom-smoothing", action="store_true")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("grid", help="run the LOO grid described by a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--force", action="store_true", help="recompute cells with existing reports")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("evaluate", help="run LOO for a single pipeline configuration")
    p.add_argument("--data", required=True)
    p.add_argument("--signals", choices=sorted(SIGNAL_SETS), default="all")
    p.add_argument("--smoothing", type=int, default=0)
    p.add_argument("--reduction", default="none")
    p.add_argument("--model", default="rf")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--allow-custom-smoothing", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="score a feature CSV with a saved model artifact")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("compare", help="compare two evaluation reports (McNemar)")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="emit summary and plot-ready CSVs from grid results")
    p.add_argument("--results", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_ERROR
    try:
        return args.func(args)
    except PhonesenseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
