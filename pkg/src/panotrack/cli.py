"""Command-line front end: ``gen``, ``track``, ``bench`` and ``report``.

Exit codes: 0 success, 2 usage or scenario-schema error, 3 a tracker never
initialized (a ``no_init.json`` report is written).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io
from .metrics import compare_methods, compute_ape
from .pipeline import NoInitError, benchmark, run_scenario
from .scenario import (
    EvalOptions,
    ScenarioError,
    bundled_path,
    bundled_scenarios,
    ground_truth,
    iter_scans,
    load_scenario,
)
from .tracker import TrackerMode

EXIT_OK, EXIT_USAGE, EXIT_NO_INIT = 0, 2, 3


class UsageError(Exception):
    pass


def _scenario_path(arg: str) -> Path:
    p = Path(arg)
    if p.exists():
        return p
    try:
        return bundled_path(arg)
    except FileNotFoundError:
        raise UsageError(
            f"scenario {arg!r} is neither a file nor a bundled scenario ({', '.join(bundled_scenarios())})"
        ) from None


def _modes(arg):
    if arg is None:
        return None
    out = []
    for m in arg.split(","):
        m = m.strip()
        try:
            out.append(TrackerMode(m))
        except ValueError:
            raise UsageError(f"unknown mode {m!r}; choose from {[x.value for x in TrackerMode]}") from None
    return out


def _load(args):
    sc = load_scenario(_scenario_path(args.scenario), args.override)
    if args.seed is not None:
        sc = sc.with_seed(args.seed)
    return sc


def _frames(args, minimum=1):
    if args.frames is None:
        return None
    if args.frames < minimum:
        raise UsageError(f"--frames must be >= {minimum}, got {args.frames}")
    return args.frames


def cmd_gen(args) -> int:
    sc = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = io.write_scans(iter_scans(sc, _frames(args)), out / "scans")
    io.write_ground_truth_csv(ground_truth(sc), out / "ground_truth.csv")
    print(f"wrote {n} scans to {out / 'scans'}")
    return EXIT_OK


def cmd_track(args) -> int:
    sc = _load(args)
    modes = _modes(args.modes)
    try:
        result = run_scenario(sc, args.out, _frames(args, 2), modes, args.dump_scans)
    except NoInitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_INIT
    if result.comparison is not None:
        sys.stdout.write(result.comparison.to_text())
    return EXIT_OK


def cmd_bench(args) -> int:
    sc = _load(args)
    n = 300 if args.frames is None else args.frames
    try:
        res = benchmark(sc, n, args.repetitions, _modes(args.modes))
    except NoInitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_INIT
    text = json.dumps(res, indent=2, sort_keys=True)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "bench.json").write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_report(args) -> int:
    out = Path(args.out)
    gt_path = out / "ground_truth.csv"
    if not gt_path.exists():
        raise UsageError(f"{gt_path} not found; run 'track' first")
    if args.scenario:
        e = _load(args).eval
    elif (out / "scenario.json").exists():
        e = load_scenario(out / "scenario.json").eval
    else:
        e = EvalOptions()
    gt = io.read_ground_truth_csv(gt_path)
    reports = {}
    for path in sorted(out.glob("trajectory_*.csv")):
        mode = path.stem[len("trajectory_"):]
        traj = io.read_trajectory_csv(path, {"mode": mode})
        if not traj.samples:
            continue
        reports[mode] = compute_ape(traj, gt, e.max_dt, e.loss_ape, e.loss_frames)
        io.write_json(reports[mode].to_dict(), out / f"report_{mode}.json")
    if not reports:
        raise UsageError(f"no non-empty trajectory CSVs in {out}")
    if len(reports) >= 2:
        cmp = compare_methods(reports)
        (out / "comparison.txt").write_text(cmp.to_text())
        sys.stdout.write(cmp.to_text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="panotrack", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario_required=True):
        sp.add_argument("--scenario", required=scenario_required, help="scenario JSON path or bundled name")
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted-path override, value parsed as JSON when possible")

    g = sub.add_parser("gen", help="render scans and ground truth only")
    common(g)
    g.add_argument("--out", required=True)
    g.add_argument("--frames", type=int)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("track", help="run trackers and write trajectories, reports, comparison")
    common(t)
    t.add_argument("--out", required=True)
    t.add_argument("--modes", help="comma-separated subset of fused,pcd_only,image_only")
    t.add_argument("--frames", type=int)
    t.add_argument("--dump-scans", action="store_true", help="also write per-frame scan dumps under scans/")
    t.set_defaults(func=cmd_track)

    b = sub.add_parser("bench", help="time tracker steps on pre-rendered scans")
    common(b)
    b.add_argument("--out")
    b.add_argument("--modes", help="default: fused")
    b.add_argument("--frames", type=int, help="default 300, minimum 100")
    b.add_argument("--repetitions", type=int, default=1)
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("report", help="recompute reports from CSVs in --out")
    common(r, scenario_required=False)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # remaining precondition failures (frame counts, repetitions, env caps)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
