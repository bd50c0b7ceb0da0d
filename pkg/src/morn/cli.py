"""Command-line entry point.

Subcommands:
  run    one episode (suite index or fixture), full step log + trace file
  bench  the multi-variant benchmark suite, Table-style CSV + summary
  sweep  metrics versus one controller threshold, plot-ready CSV

Exit codes: 0 success, 2 configuration error, 1 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import bench as bench_mod
from .bench import (
    ConfigKeyError,
    EpisodeSpec,
    GoalSpec,
    MethodVariant,
    build_world,
    compute_metrics,
    generate,
    load_fixture,
    run as run_episode,
    run_suite,
    sweep as run_sweep,
)
from .config import ConfigError, RunConfig, load_config
from .world import FREE, parse_grid

ALL_VARIANTS = [
    MethodVariant.FIXED_ORDER,
    MethodVariant.REACTIVE_ORDER,
    MethodVariant.MORN_ABORT_ONLY,
    MethodVariant.MORN_SWITCH_ONLY,
    MethodVariant.MORN_FULL,
]


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="morn", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=None, help="key=value config file")
        sp.add_argument("--seed", type=int, default=None, help="master seed override")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted-key config override (repeatable)")

    run_p = sub.add_parser("run", help="run a single episode")
    common(run_p)
    run_p.add_argument("--episode", type=int, default=None, help="suite episode index")
    run_p.add_argument("--fixture", default=None, help="fixture map name")
    run_p.add_argument("--variant", default="MORN_FULL",
                       choices=[v.value for v in ALL_VARIANTS])
    run_p.add_argument("--trace-ascii", action="store_true",
                       help="render text frames of the world and path")

    bench_p = sub.add_parser("bench", help="run the benchmark suite")
    common(bench_p)
    bench_p.add_argument("--variants", default=None,
                         help="comma-separated variant list (default: all five)")
    bench_p.add_argument("--episodes", type=int, default=None,
                         help="scale the suite down to N episodes total")
    bench_p.add_argument("--workers", type=int, default=0,
                         help="parallel episode workers (0 = available parallelism)")

    sweep_p = sub.add_parser("sweep", help="sweep one controller threshold")
    common(sweep_p)
    sweep_p.add_argument("--parameter", required=True,
                         help="tau_a | tau_s | tau_c | d_commit | t_grace")
    sweep_p.add_argument("--values", required=True,
                         help="comma-separated values")
    sweep_p.add_argument("--variant", default="MORN_FULL",
                         choices=[v.value for v in ALL_VARIANTS])
    sweep_p.add_argument("--episodes", type=int, default=None)
    sweep_p.add_argument("--workers", type=int, default=0)
    return p


def _load(args) -> RunConfig:
    path = args.config or os.environ.get("MORN_CONFIG")
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    config = load_config(path, overrides)
    if args.seed is not None:
        config.bench.master_seed = args.seed
    return config


def _suite(config: RunConfig, episodes: int | None):
    bp = config.bench
    k2, k3 = bp.count_k2, bp.count_k3
    if episodes is not None:
        total = max(1, episodes)
        frac = k2 / (k2 + k3) if (k2 + k3) else 0.6
        k2 = round(total * frac)
        k3 = total - k2
    return generate(k2, k3, bp.master_seed, config)


def _parse_variants(raw: str | None) -> list[MethodVariant]:
    if not raw:
        return list(ALL_VARIANTS)
    out = []
    for name in raw.split(","):
        name = name.strip()
        try:
            out.append(MethodVariant(name))
        except ValueError:
            raise ConfigError(f"unknown variant {name!r}") from None
    return out


def _fixture_spec(name: str, config: RunConfig) -> EpisodeSpec:
    gmap, digits = parse_grid(load_fixture(name), config.world.cell_size)
    ids = sorted(digits)
    k = len(ids)
    budget = config.bench.budget_k2 if k <= 2 else config.bench.budget_k3
    return EpisodeSpec(
        episode_id=0,
        seed=config.bench.master_seed,
        goal_count=k,
        budget_max=budget,
        goals=[GoalSpec(goal_id=g, category=f"goal{g}") for g in ids],
        fixture=name,
        world=replace(config.world),
    )


def ascii_frames(world, trace) -> str:
    """Text rendering of the map with the agent path per goal segment."""
    frames = []
    base = []
    for r in range(world.gmap.height):
        row = []
        for c in range(world.gmap.width):
            row.append("." if world.gmap.cells[r, c] == FREE else "#")
        base.append(row)
    for gid, goal in world.goals.items():
        r, c = goal.position
        base[r][c] = str(gid)
    segments: dict[int, list] = {}
    for rec in trace.steps:
        segments.setdefault(rec.goal_id, []).append(rec.pose)
    for gid, poses in segments.items():
        grid = [row[:] for row in base]
        for r, c in poses:
            if grid[r][c] == ".":
                grid[r][c] = "*"
        r, c = poses[-1]
        grid[r][c] = "@"
        frames.append(f"-- goal {gid} ({len(poses)} steps) --\n"
                      + "\n".join("".join(row) for row in grid))
    return "\n".join(frames) + "\n"


def cmd_run(args) -> int:
    config = _load(args)
    variant = MethodVariant(args.variant)
    if (args.episode is None) == (args.fixture is None):
        raise ConfigError("run needs exactly one of --episode or --fixture")
    if args.fixture is not None:
        spec = _fixture_spec(args.fixture, config)
    else:
        specs = _suite(config, None)
        if not (0 <= args.episode < len(specs)):
            raise ConfigError(f"episode index {args.episode} outside suite of {len(specs)}")
        spec = specs[args.episode]

    world = build_world(spec)
    trace = run_episode(spec, variant, config, world=world)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"episode_{spec.episode_id}_{variant.value.lower()}"
    trace_path = out / f"{stem}.jsonl"
    with trace_path.open("w") as fh:
        for rec in trace.steps:
            fh.write(json.dumps({
                "t": rec.t,
                "goal": rec.goal_id,
                "pose": list(rec.pose),
                "d": round(rec.distance, 4),
                "s": round(rec.evidence, 4),
                "pi": round(rec.potentiality, 4),
                "gamma": round(rec.persistence, 4),
                "sigma": round(rec.sufficiency, 4),
                "action": rec.action,
                "reason": rec.reason,
            }, separators=(",", ":")) + "\n")

    log_lines = [
        f"{'t':>4} {'goal':>4} {'d':>8} {'s':>6} {'pi':>6} {'gamma':>6} "
        f"{'sigma':>6} {'budget':>6}  action"
    ]
    budget_left = spec.budget_max
    for rec in trace.steps:
        budget_left = spec.budget_max - rec.t
        suffix = "" if rec.action == "PERSIST" else f" [{rec.reason}]"
        log_lines.append(
            f"{rec.t:>4} {rec.goal_id:>4} {_fmt(rec.distance):>8} {_fmt(rec.evidence):>6} "
            f"{_fmt(rec.potentiality):>6} {_fmt(rec.persistence):>6} "
            f"{_fmt(rec.sufficiency):>6} {budget_left:>6}  {rec.action}{suffix}"
        )
    for o in trace.outcomes.values():
        log_lines.append(
            f"goal {o.goal_id}: {o.state.value} found={o.found} spent={o.spent} "
            f"switches={o.switch_count}"
        )
    log = "\n".join(log_lines) + "\n"
    (out / f"{stem}.log").write_text(log)
    sys.stdout.write(log)
    if args.trace_ascii:
        frames = ascii_frames(world, trace)
        (out / f"{stem}.ascii").write_text(frames)
        sys.stdout.write(frames)
    return 0


BENCH_COLUMNS = [
    "variant",
    "k2_mgsr", "k2_cr", "k2_wsf",
    "k3_mgsr", "k3_cr", "k3_wsf",
    "mgsr", "ssr", "cr", "steps", "wsf", "utility",
    "no_detection", "aborted", "switched_unresolved", "false_commit",
]


def cmd_bench(args) -> int:
    config = _load(args)
    variants = _parse_variants(args.variants)
    specs = _suite(config, args.episodes)
    if not specs:
        raise ConfigError("empty benchmark suite")
    workers = args.workers if args.workers > 0 else (os.cpu_count() or 1)
    results = run_suite(specs, variants, config, workers=workers)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    summary = {}
    bp = config.bench
    for v in variants:
        traces = results[v]
        k2 = [t for t in traces if t.spec.goal_count == 2]
        k3 = [t for t in traces if t.spec.goal_count == 3]
        overall = compute_metrics(traces, bp.reward, bp.lambda_cost)
        row = {"variant": v.value}
        for label, group in (("k2", k2), ("k3", k3)):
            if group:
                m = compute_metrics(group, bp.reward, bp.lambda_cost)
                row[f"{label}_mgsr"] = _fmt(m.mgsr)
                row[f"{label}_cr"] = _fmt(m.cr)
                row[f"{label}_wsf"] = _fmt(m.wsf)
            else:
                row[f"{label}_mgsr"] = row[f"{label}_cr"] = row[f"{label}_wsf"] = ""
        row.update({
            "mgsr": _fmt(overall.mgsr),
            "ssr": _fmt(overall.ssr),
            "cr": _fmt(overall.cr),
            "steps": _fmt(overall.mean_steps),
            "wsf": _fmt(overall.wsf),
            "utility": _fmt(overall.utility_mean),
            "no_detection": str(overall.failure_counts["NO_DETECTION"]),
            "aborted": str(overall.failure_counts["ABORTED"]),
            "switched_unresolved": str(overall.failure_counts["SWITCHED_UNRESOLVED"]),
            "false_commit": str(overall.failure_counts["FALSE_COMMIT"]),
        })
        rows.append(row)
        summary[v.value] = {
            "mgsr": overall.mgsr, "ssr": overall.ssr, "cr": overall.cr,
            "steps": overall.mean_steps, "wsf": overall.wsf,
            "utility": overall.utility_mean,
            "failures": overall.failure_counts,
            "episodes": overall.episodes,
        }

    with (out / "bench.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    (out / "summary.json").write_text(
        json.dumps({"master_seed": bp.master_seed, "episodes": len(specs),
                    "variants": summary}, indent=2, sort_keys=True) + "\n")
    sys.stdout.write((out / "bench.csv").read_text())
    return 0


def cmd_sweep(args) -> int:
    config = _load(args)
    variant = MethodVariant(args.variant)
    values = [v for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("sweep needs a non-empty value list")
    try:
        values = [float(v) for v in values]
    except ValueError as exc:
        raise ConfigError(f"bad sweep value: {exc}") from None
    specs = _suite(config, args.episodes)
    workers = args.workers if args.workers > 0 else (os.cpu_count() or 1)
    try:
        table = run_sweep(specs, variant, args.parameter, values, config, workers=workers)
    except ConfigKeyError as exc:
        raise ConfigError(str(exc)) from None

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"sweep_{args.parameter}.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([args.parameter, "mgsr", "ssr", "cr", "steps", "wsf"])
        for value, m in table:
            writer.writerow([_fmt(value), _fmt(m.mgsr), _fmt(m.ssr), _fmt(m.cr),
                             _fmt(m.mean_steps), _fmt(m.wsf)])
    sys.stdout.write(path.read_text())
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "bench":
            return cmd_bench(args)
        return cmd_sweep(args)
    except (ConfigError, ConfigKeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
