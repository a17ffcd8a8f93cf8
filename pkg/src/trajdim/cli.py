"""Command-line surface: estimate dimensions, train/sweep, analyze records.

Exit codes: 0 success, 2 usage error, 3 format/schema error, 4 the run
produced only degenerate results.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .datasets import DATASET_NAMES, load_dataset
from .dimension import EstimatorConfig, estimate_dimension
from .metricspace import PRECOMPUTE_LIMIT, DistanceOracle, MetricKind
from .records import (
    HYPERPARAM_FIELDS,
    MEASURE_FIELDS,
    SchemaError,
    read_records,
    records_to_csv,
)
from .reports import (
    correlations_to_csv,
    correlations_to_json,
    estimate_to_csv,
    estimate_to_json,
    write_text_atomic,
)
from .stats import (
    CorrelationReport,
    DegenerateStatisticError,
    cmi_local_permutation_test,
    fisher_z_compare,
    granulated_kendall_detail,
    kendall_tau_b,
    partial_corr,
    spearman,
)
from .trainer import SweepConfig, grid_sweep
from .trj1 import TrjFormatError, read_loss_matrix, read_trajectory, write_matrix

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_DEGENERATE = 4

MANIFEST_SCHEMA_VERSION = 1


class UsageError(Exception):
    pass


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _parse_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def write_manifest(path, payload: dict) -> None:
    payload = {"schema_version": MANIFEST_SCHEMA_VERSION, **payload}
    write_text_atomic(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        payload = json.load(fh)
    version = payload.get("schema_version")
    if version != MANIFEST_SCHEMA_VERSION:
        raise SchemaError(f"unsupported manifest schema version {version!r}")
    base = os.path.dirname(os.fspath(path))
    for name, rel in payload.get("files", {}).items():
        target = os.path.join(base, rel)
        if not os.path.exists(target):
            raise SchemaError(f"manifest references missing file {rel!r} ({name})")
    return payload


def _figure_path(out_path: str) -> str:
    stem, _ = os.path.splitext(out_path)
    return stem + ".png"


# ----------------------------------------------------------------------
# estimate
# ----------------------------------------------------------------------
def cmd_estimate(args) -> int:
    if args.alpha <= 0:
        raise UsageError(f"--alpha must be positive, got {args.alpha}")
    metric = MetricKind(args.metric)
    trajectory = read_trajectory(args.traj)
    if metric is MetricKind.LOSS_BASED:
        if not args.losses:
            raise UsageError("--losses is required when --metric loss")
        losses = read_loss_matrix(args.losses)
        oracle = DistanceOracle.loss_based(
            losses,
            trajectory=trajectory,
            precompute=losses.iterates <= PRECOMPUTE_LIMIT,
        )
    else:
        oracle = DistanceOracle.euclidean(
            trajectory, precompute=trajectory.iterates <= PRECOMPUTE_LIMIT
        )

    sizes = _parse_ints(args.sizes) if args.sizes else None
    try:
        config = EstimatorConfig(
            alpha=args.alpha,
            sample_sizes=sizes,
            restarts_per_size=args.restarts,
            seed=args.seed,
        )
        est = estimate_dimension(oracle, config)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    text = estimate_to_json(est) if args.json else estimate_to_csv(est)
    if args.out:
        write_text_atomic(args.out, text)
        if not args.no_figures:
            from .figures import save_estimate_figure

            save_estimate_figure(est, _figure_path(args.out))
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    if est.degenerate:
        print(f"degenerate dimension estimate: {est.reason}", file=sys.stderr)
        return EXIT_DEGENERATE
    print(
        f"dimension={est.dimension:.6g} slope={est.slope:.6g} "
        f"r_squared={est.r_squared:.6g} metric={est.metric}",
        file=sys.stderr,
    )
    return EXIT_OK


# ----------------------------------------------------------------------
# analyze
# ----------------------------------------------------------------------
def _complete_rows(records, keys):
    """Records that carry a value for every requested column."""
    rows = []
    for rec in records:
        values = [rec.get(key) for key in keys]
        if all(v is not None for v in values):
            rows.append(values)
    return rows


def _require(args, *names):
    for name in names:
        if getattr(args, name.replace("-", "_"), None) is None:
            raise UsageError(f"--{name} is required for method {args.method!r}")


def _analyze_plain(args, records) -> list[CorrelationReport]:
    rows = _complete_rows(records, (args.measure, args.target))
    x = [r[0] for r in rows]
    y = [r[1] for r in rows]
    fn = spearman if args.method == "spearman" else kendall_tau_b
    try:
        value = fn(x, y)
        note = ""
    except (DegenerateStatisticError, ValueError) as exc:
        value = None
        note = f"degenerate: {exc}"
    return [
        CorrelationReport(
            method=args.method,
            measure=args.measure,
            target=args.target,
            value=value,
            sample_count=len(rows),
            note=note,
        )
    ]


def _analyze_granulated(args, records) -> list[CorrelationReport]:
    _require(args, "axes")
    axes = args.axes.split(",")
    try:
        detail = granulated_kendall_detail(records, args.measure, args.target, axes)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    reports = [
        CorrelationReport(
            method="granulated",
            measure=args.measure,
            target=args.target,
            value=detail.psi,
            sample_count=len(records) - detail.dropped_records,
            note=f"axes={','.join(axes)}",
        )
    ]
    for axis in axes:
        reports.append(
            CorrelationReport(
                method="granulated_axis",
                measure=args.measure,
                target=args.target,
                value=detail.axis_scores[axis],
                group=axis,
                note=(
                    f"cells={detail.cells_used[axis]},"
                    f"skipped={detail.cells_skipped[axis]}"
                ),
            )
        )
    return reports


def _analyze_fisher(args, records) -> list[CorrelationReport]:
    _require(args, "measure-b")
    rows_a = _complete_rows(records, (args.measure, args.target))
    rows_b = _complete_rows(records, (args.measure_b, args.target))
    try:
        r1 = spearman([r[0] for r in rows_a], [r[1] for r in rows_a])
        r2 = spearman([r[0] for r in rows_b], [r[1] for r in rows_b])
        z, p = fisher_z_compare(r1, len(rows_a), r2, len(rows_b))
        value, p_value, note = z, p, f"spearman_a={r1!r},spearman_b={r2!r}"
    except (DegenerateStatisticError, ValueError) as exc:
        value, p_value, note = None, None, f"degenerate: {exc}"
    return [
        CorrelationReport(
            method="fisher_z",
            measure=args.measure,
            measure_b=args.measure_b,
            target=args.target,
            value=value,
            p_value=p_value,
            sample_count=len(rows_a),
            sample_count_b=len(rows_b),
            note=note,
        )
    ]


def _grouped(records, group_by):
    if group_by is None:
        return [("", records)]
    groups = sorted({rec.get(group_by) for rec in records})
    return [
        (str(g), [rec for rec in records if rec.get(group_by) == g]) for g in groups
    ]


def _analyze_partial(args, records) -> list[CorrelationReport]:
    _require(args, "condition", "seed")
    reports = []
    for label, group in _grouped(records, args.group_by):
        rows = _complete_rows(group, (args.measure, args.target, args.condition))
        common = dict(
            measure=args.measure,
            target=args.target,
            conditioning=args.condition,
            group=label,
            sample_count=len(rows),
            permutations=args.permutations,
            seed=args.seed,
        )
        for kind in ("spearman", "kendall"):
            if len(rows) < 3:
                reports.append(
                    CorrelationReport(
                        method=f"partial_{kind}",
                        value=None,
                        note="too few complete records",
                        **common,
                    )
                )
                continue
            try:
                res = partial_corr(
                    [r[0] for r in rows],
                    [r[1] for r in rows],
                    [r[2] for r in rows],
                    kind=kind,
                    permutations=args.permutations,
                    seed=args.seed,
                )
                note = "degenerate residuals" if res.degenerate else ""
                reports.append(
                    CorrelationReport(
                        method=f"partial_{kind}",
                        value=res.value,
                        p_value=res.p_value,
                        note=note,
                        **common,
                    )
                )
            except ValueError as exc:
                reports.append(
                    CorrelationReport(
                        method=f"partial_{kind}",
                        value=None,
                        note=f"degenerate: {exc}",
                        **common,
                    )
                )
    return reports


def _analyze_cmi(args, records) -> list[CorrelationReport]:
    _require(args, "condition", "seed")
    reports = []
    for label, group in _grouped(records, args.group_by):
        rows = _complete_rows(group, (args.measure, args.target, args.condition))
        common = dict(
            method="cmi",
            measure=args.measure,
            target=args.target,
            conditioning=args.condition,
            group=label,
            sample_count=len(rows),
            permutations=args.permutations,
            bins=args.bins,
            seed=args.seed,
        )
        if len(rows) < 2:
            reports.append(
                CorrelationReport(value=None, note="too few complete records", **common)
            )
            continue
        try:
            res = cmi_local_permutation_test(
                [r[0] for r in rows],
                [r[1] for r in rows],
                [r[2] for r in rows],
                bins=args.bins,
                permutations=args.permutations,
                seed=args.seed,
            )
            note = f"small_strata={res.small_strata}" if res.small_strata else ""
            reports.append(
                CorrelationReport(value=res.value, p_value=res.p_value, note=note, **common)
            )
        except ValueError as exc:
            reports.append(
                CorrelationReport(value=None, note=f"degenerate: {exc}", **common)
            )
    return reports


def cmd_analyze(args) -> int:
    records = read_records(args.records)
    needed = [args.measure, args.target]
    if args.method == "fisher-z" and args.measure_b:
        needed.append(args.measure_b)
    for column in needed:
        if column not in HYPERPARAM_FIELDS and column not in MEASURE_FIELDS:
            raise SchemaError(f"unknown column {column!r}")

    if args.method in ("spearman", "kendall"):
        reports = _analyze_plain(args, records)
    elif args.method == "granulated":
        reports = _analyze_granulated(args, records)
    elif args.method == "fisher-z":
        reports = _analyze_fisher(args, records)
    elif args.method == "partial":
        reports = _analyze_partial(args, records)
    else:
        reports = _analyze_cmi(args, records)

    text = correlations_to_json(reports) if args.json else correlations_to_csv(reports)
    if args.out:
        write_text_atomic(args.out, text)
        if not args.no_figures:
            from .figures import save_correlation_figure

            save_correlation_figure(reports, _figure_path(args.out))
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    if all(rep.value is None for rep in reports):
        print("all rows degenerate", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


# ----------------------------------------------------------------------
# train / sweep
# ----------------------------------------------------------------------
def _write_cell_artifacts(outdir, dataset, sweep_cfg, record, cap, info) -> None:
    run_dir = os.path.join(outdir, record.run_id)
    os.makedirs(run_dir, exist_ok=True)
    write_matrix(
        os.path.join(run_dir, "trajectory.trj1"), cap.trajectory.values, kind=1
    )
    write_matrix(os.path.join(run_dir, "losses.trj1"), cap.loss_matrix.values, kind=2)
    estimates = info.pop("estimates", {})
    manifest = {
        "run_id": record.run_id,
        "files": {"trajectory": "trajectory.trj1", "losses": "losses.trj1"},
        "dataset": {"name": dataset.name, "task": dataset.task,
                    "train_size": int(len(dataset.x_train))},
        "config": {
            "learning_rate": record.learning_rate,
            "batch_size": record.batch_size,
            "width": record.width,
            "init": record.init,
            "capture_count": sweep_cfg.capture_count,
            "max_iterations": sweep_cfg.max_iterations,
            "hidden_widths": list(sweep_cfg.hidden_widths),
            "capture_window": "post-convergence iterates only",
        },
        "seeds": {"train": record.seed},
        "convergence": {
            "converged": True,
            "iterations": info.get("iterations_to_converge"),
        },
        "measures": dict(record.measures),
        "extras": {k: v for k, v in info.items() if k != "iterations_to_converge"},
        "estimates": {
            key: {"dimension": est.dimension, "slope": est.slope,
                  "r_squared": est.r_squared, "degenerate": est.degenerate,
                  "reason": est.reason, "seed": est.seed}
            for key, est in estimates.items()
        },
        "tool_version": __version__,
    }
    write_manifest(os.path.join(run_dir, "manifest.json"), manifest)


def _run_sweep(args, sweep_cfg) -> int:
    dataset = load_dataset(args.dataset, args.train_size, seed=args.data_seed)
    os.makedirs(args.outdir, exist_ok=True)

    def on_cell(record, cap, info):
        _write_cell_artifacts(args.outdir, dataset, sweep_cfg, record, cap, info)
        print(f"ok {record.run_id}: {len(record.measures)} measures")

    result = grid_sweep(dataset, sweep_cfg, on_cell=on_cell)
    records_path = os.path.join(args.outdir, "records.csv")
    merged = result.records
    if os.path.exists(records_path):
        fresh_ids = {rec.run_id for rec in merged}
        merged = [
            rec for rec in read_records(records_path) if rec.run_id not in fresh_ids
        ] + merged
    write_text_atomic(records_path, records_to_csv(merged))
    write_manifest(
        os.path.join(args.outdir, "sweep_manifest.json"),
        {
            "dataset": {"name": dataset.name, "train_size": args.train_size,
                        "data_seed": args.data_seed},
            "grids": {
                "learning_rates": list(sweep_cfg.learning_rates),
                "batch_sizes": list(sweep_cfg.batch_sizes),
                "width_multipliers": list(sweep_cfg.width_multipliers),
                "seeds": list(sweep_cfg.seeds),
            },
            "init": sweep_cfg.init,
            "label_noise": sweep_cfg.label_noise,
            "failures": result.failures,
            "tool_version": __version__,
        },
    )
    for run_id, reason in result.failures.items():
        print(f"failed {run_id}: {reason}")
    succeeded = sum(1 for rec in result.records if rec.measures)
    print(f"{succeeded}/{len(result.records)} cells succeeded -> {args.outdir}")
    if succeeded and not args.no_figures:
        from .figures import save_sweep_figure

        try:
            save_sweep_figure(result.records, os.path.join(args.outdir, "sweep.png"))
        except ValueError:
            pass
    return EXIT_OK if succeeded else EXIT_DEGENERATE


def cmd_train(args) -> int:
    sweep_cfg = SweepConfig(
        learning_rates=(args.lr,),
        batch_sizes=(args.batch,),
        seeds=(args.seed,),
        width_multipliers=(args.width,),
        hidden_widths=_parse_ints(args.hidden),
        init=args.init,
        max_iterations=args.max_iterations,
        capture_count=args.captures,
        restarts_per_size=args.restarts,
        sample_sizes=_parse_ints(args.sizes) if args.sizes else None,
    )
    return _run_sweep(args, sweep_cfg)


def cmd_sweep(args) -> int:
    sweep_cfg = SweepConfig(
        learning_rates=_parse_floats(args.lr_grid),
        batch_sizes=_parse_ints(args.batch_grid),
        seeds=_parse_ints(args.seeds),
        width_multipliers=_parse_ints(args.width_grid),
        hidden_widths=_parse_ints(args.hidden),
        init=args.init,
        max_iterations=args.max_iterations,
        capture_count=args.captures,
        restarts_per_size=args.restarts,
        sample_sizes=_parse_ints(args.sizes) if args.sizes else None,
        label_noise=args.label_noise,
    )
    return _run_sweep(args, sweep_cfg)


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajdim",
        description=(
            "Spanning-tree persistence dimension of optimization "
            "trajectories and a statistics battery over run records."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate dimension from TRJ1 files")
    est.add_argument("--traj", required=True, help="trajectory .trj1 file")
    est.add_argument("--metric", choices=["euclidean", "loss"], default="euclidean")
    est.add_argument("--losses", help="loss-matrix .trj1 file (loss metric)")
    est.add_argument("--alpha", type=float, default=1.0)
    est.add_argument("--sizes", help="comma-separated subsample sizes")
    est.add_argument("--restarts", type=int, default=5)
    est.add_argument("--seed", type=int, required=True)
    est.add_argument("--out", help="write report here (CSV, or JSON with --json)")
    est.add_argument("--json", action="store_true")
    est.add_argument("--no-figures", action="store_true")
    est.set_defaults(func=cmd_estimate)

    ana = sub.add_parser("analyze", help="correlation battery over a record table")
    ana.add_argument("--records", required=True, help="records.csv")
    ana.add_argument(
        "--method",
        required=True,
        choices=["spearman", "kendall", "granulated", "fisher-z", "partial", "cmi"],
    )
    ana.add_argument("--measure", required=True)
    ana.add_argument("--target", required=True)
    ana.add_argument("--measure-b", help="second measure (fisher-z)")
    ana.add_argument("--axes", help="comma-separated hyperparameter axes (granulated)")
    ana.add_argument("--condition", help="conditioning hyperparameter (partial/cmi)")
    ana.add_argument("--group-by", help="emit one row per value of this hyperparameter")
    ana.add_argument("--permutations", type=int, default=999)
    ana.add_argument("--bins", type=int, default=5)
    ana.add_argument("--seed", type=int)
    ana.add_argument("--out")
    ana.add_argument("--json", action="store_true")
    ana.add_argument("--no-figures", action="store_true")
    ana.set_defaults(func=cmd_analyze)

    def add_common_run_flags(p):
        p.add_argument("--dataset", choices=list(DATASET_NAMES), default="moons")
        p.add_argument("--train-size", type=int, default=200)
        p.add_argument("--data-seed", type=int, default=0)
        p.add_argument("--hidden", default="16", help="comma-separated hidden widths")
        p.add_argument("--init", choices=["standard", "adversarial"], default="standard")
        p.add_argument("--captures", type=int, default=400)
        p.add_argument("--max-iterations", type=int, default=40_000)
        p.add_argument("--restarts", type=int, default=3)
        p.add_argument("--sizes", help="comma-separated estimator subsample sizes")
        p.add_argument("--outdir", required=True)
        p.add_argument("--no-figures", action="store_true")

    tr = sub.add_parser("train", help="train and capture a single run")
    tr.add_argument("--lr", type=float, required=True)
    tr.add_argument("--batch", type=int, required=True)
    tr.add_argument("--width", type=int, default=1)
    tr.add_argument("--seed", type=int, required=True)
    add_common_run_flags(tr)
    tr.set_defaults(func=cmd_train)

    sw = sub.add_parser("sweep", help="grid sweep over lr x batch (x width) x seeds")
    sw.add_argument("--lr-grid", required=True)
    sw.add_argument("--batch-grid", required=True)
    sw.add_argument("--seeds", required=True)
    sw.add_argument("--width-grid", default="1")
    sw.add_argument("--label-noise", type=float, default=0.0)
    add_common_run_flags(sw)
    sw.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrjFormatError, SchemaError) as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
