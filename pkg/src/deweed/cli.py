"""Command-line entry point: ``deweed run | sweep | validate``."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml

from .detect import accuracy
from .errors import ValidationError
from .scenario import OUTPUT_DIR_ENV, SWEEP_AXES, Scenario, load_scenario, parse_override, with_axis_value

log = logging.getLogger("deweed")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3

SWEEP_METRICS = (
    "weed_kill_fraction", "killed_weeds", "missed_weeds", "underdosed_weeds", "crop_collateral",
    "total_time", "total_energy", "mismatch_events", "tp", "tn", "fp", "fn", "accuracy",
)


def _load(args) -> Scenario:
    overrides = [parse_override(item) for item in (args.set or [])]
    scenario = load_scenario(args.scenario, overrides)
    if getattr(args, "seed", None) is not None:
        scenario.seed = args.seed
    return scenario


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def cmd_run(args) -> int:
    scenario = _load(args)
    result = scenario.run()
    m = result.metrics
    out = scenario.output_dir
    written = [
        _write(out / "metrics.csv", m.to_csv()),
        _write(out / "metrics.json", m.to_json() + "\n"),
        _write(out / "plan.csv", result.plan.to_csv()),
        _write(out / "executed.csv", result.executed_csv()),
        _write(out / "detections.csv", result.report.to_csv()),
    ]
    if args.plot:
        from .plotting import lethality_heatmap

        out.mkdir(parents=True, exist_ok=True)
        written.append(
            lethality_heatmap(
                result.lethality, result.grid.truth, out / "lethality.png",
                reported=result.report.reported, target=scenario.target,
                title=f"{scenario.mode} mode, seed {m.seed}, kill fraction {m.weed_kill_fraction:.3f}",
            )
        )
    print(f"verdict: {m.verdict}")
    if result.plan.verdict is not None and result.plan.verdict.reason:
        print(f"  {result.plan.verdict.reason}")
    print(f"weed kill fraction: {m.weed_kill_fraction:.4f} ({m.killed_weeds}/{m.total_weeds})")
    print(f"missed: {m.missed_weeds}  under-dosed: {m.underdosed_weeds}  crop collateral: {m.crop_collateral}")
    print(f"time: {m.total_time:.2f} s  energy: {m.total_energy:.1f} J  mismatches: {m.mismatch_events}")
    print(f"activation steps: {len(result.plan.activation_steps)} (cap {scenario.layout.cap})")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def _run_seed(job):
    scenario, seed = job
    return scenario.run(seed).metrics


def aggregate(axis: str, value, metrics) -> dict:
    row = {"axis": axis, "value": value, "n_seeds": len(metrics)}
    row["feasible_fraction"] = sum(m.verdict == "Feasible" for m in metrics) / len(metrics)
    for name in SWEEP_METRICS:
        if name == "accuracy":
            xs = [accuracy(m.detection_tally) for m in metrics]
        else:
            xs = [float(m.as_row()[name]) for m in metrics]
        row[f"{name}_mean"] = statistics.fmean(xs)
        row[f"{name}_std"] = statistics.stdev(xs) if len(xs) > 1 else 0.0
    return row


def _parse_values(text: str) -> list:
    items = [t.strip() for t in text.split(",") if t.strip()]
    return [yaml.safe_load(t) for t in items]


def run_sweep(scenario: Scenario, axis: str, values, jobs: int = 1) -> list[dict]:
    if axis not in SWEEP_AXES:
        raise ValidationError(f"unknown sweep axis {axis!r}; sweepable axes: {', '.join(SWEEP_AXES)}")
    if not values:
        raise ValidationError("sweep needs at least one value")
    variants = [with_axis_value(scenario, axis, v) for v in values]
    seeds = [scenario.seed + i for i in range(scenario.seeds)]
    work = [(variant, s) for variant in variants for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_seed, work))
    else:
        results = [_run_seed(w) for w in work]
    rows = []
    for i, value in enumerate(values):
        chunk = results[i * len(seeds):(i + 1) * len(seeds)]
        rows.append(aggregate(axis, value, chunk))
    return rows


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def cmd_sweep(args) -> int:
    scenario = _load(args)
    values = _parse_values(args.values or "")
    if args.seeds is not None:
        scenario.seeds = args.seeds
    rows = run_sweep(scenario, args.axis, values, jobs=args.jobs)
    out = scenario.output_dir
    path = _write(out / f"sweep_{args.axis}.csv", sweep_csv(rows))
    print(f"{'value':>12}  {'feasible':>8}  {'kill mean':>9}  {'kill std':>8}  {'missed':>7}")
    for row in rows:
        print(
            f"{str(row['value']):>12}  {row['feasible_fraction']:8.3f}  {row['weed_kill_fraction_mean']:9.4f}"
            f"  {row['weed_kill_fraction_std']:8.4f}  {row['missed_weeds_mean']:7.3f}"
        )
    print(f"wrote {path}")
    if args.plot:
        from .plotting import sweep_plot

        fig = sweep_plot(
            [r["value"] for r in rows],
            [r["weed_kill_fraction_mean"] for r in rows],
            [r["weed_kill_fraction_std"] for r in rows],
            out / f"sweep_{args.axis}.png",
            xlabel=args.axis,
        )
        print(f"wrote {fig}")
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario = _load(args)
    effective = {
        "recipe": {
            "label": scenario.recipe.label,
            "e_near_ir_w_m2": scenario.recipe.e_near_ir,
            "e_uva_w_m2": scenario.recipe.e_uva,
            "k_near_ir": scenario.recipe.k_near_ir,
            "k_uva": scenario.recipe.k_uva,
        },
        "layout": {
            k: getattr(scenario.layout, k)
            for k in ("rows", "cols", "source_pitch", "per_source_power", "power_budget",
                      "max_simultaneous", "honor_paper_16", "source_height", "camera_lead")
        },
        "robot": {
            k: getattr(scenario.robot, k)
            for k in ("transit_speed", "wiggle_sigma", "course_correction", "speed")
        },
        "detector": scenario.detector.to_config(),
        "field": {k: v for k, v in scenario.field_spec.items() if v is not None},
        "mission": {
            "target": scenario.target,
            "mode": scenario.mode,
            "seed": scenario.seed,
            "seeds": scenario.seeds,
            "collateral_threshold": scenario.collateral_threshold,
        },
        "output_dir": str(scenario.output_dir),
        "derived": scenario.derived(),
    }
    print(yaml.safe_dump(effective, sort_keys=False), end="")
    d = scenario.derived()
    if isinstance(d["required_dwell_s"], float):
        print(f"# required dwell {d['required_dwell_s']:.2f} s, exposure window "
              f"{d['exposure_window_s']:.3f} s, effective cap {d['effective_cap']}")
    print("scenario OK")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deweed",
        description="Directed-energy weeding simulator and activation planner.",
        epilog=f"Set {OUTPUT_DIR_ENV} to override the scenario's output directory.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", type=Path, help="scenario YAML file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a dotted scenario key, e.g. layout.honor_paper_16=true")

    p = sub.add_parser("run", help="run one mission and write CSV reports")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--plot", action="store_true", help="also render a lethality heat map")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a seed batch per value of one parameter")
    common(p)
    p.add_argument("--axis", required=True, help=f"one of: {', '.join(SWEEP_AXES)}")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--seed", type=int, help="first seed of the batch")
    p.add_argument("--seeds", type=int, help="missions per value (default: mission.seeds)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check a scenario and print the effective configuration")
    common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
