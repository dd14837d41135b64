"""Scenario runs: render once, track in every requested mode, evaluate, write artifacts."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io
from .detect import Detector
from .geometry import PanoramicScan
from .metrics import Comparison, ErrorReport, compare_methods, compute_ape
from .scenario import Scenario, ground_truth, iter_scans, pose_at, scenario_to_dict
from .scene import GroundTruthSample
from .tracker import SequenceRunner, TrackerMode, Trajectory

MIN_BENCH_FRAMES = 100


class NoInitError(RuntimeError):
    """One or more trackers never initialized over the whole sequence."""

    def __init__(self, modes: Sequence[str]):
        super().__init__(f"tracker never initialized: {', '.join(modes)}")
        self.modes = list(modes)


def thread_count() -> int:
    """Worker cap from PANO_TRACK_THREADS (default 1)."""
    raw = os.environ.get("PANO_TRACK_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"PANO_TRACK_THREADS must be an integer, got {raw!r}") from None


def timing_summary(frame_ms: Sequence[float]) -> dict:
    ms = np.asarray(frame_ms, dtype=np.float64)
    if ms.size == 0:
        return {"mean_frame_ms": None, "p95_frame_ms": None, "effective_fps": None, "frames": 0}
    mean = float(ms.mean())
    return {
        "mean_frame_ms": mean,
        "p95_frame_ms": float(np.percentile(ms, 95)),
        "effective_fps": 1000.0 / mean if mean > 0 else None,
        "frames": int(ms.size),
    }


@dataclass
class RunResult:
    scenario: Scenario
    trajectories: dict[str, Trajectory]
    reports: dict[str, ErrorReport]
    comparison: Optional[Comparison]
    ground_truth: list[GroundTruthSample]
    timing: dict[str, dict] = field(default_factory=dict)
    no_init: list[str] = field(default_factory=list)


def _runners(sc: Scenario, modes, first_t: float) -> dict[str, SequenceRunner]:
    det = Detector(sc.detector, sc.seed)
    params = sc.tracker_params()
    start = pose_at(sc, first_t).position
    out = {}
    for m in modes:
        m = TrackerMode(m)
        init = start if m is TrackerMode.PCD_ONLY else None
        runner = SequenceRunner(m, det, params, init)
        runner.trajectory.meta.update(scenario=sc.name, seed=sc.seed)
        out[m.value] = runner
    return out


def track_modes(
    sc: Scenario,
    scans: Optional[Sequence[PanoramicScan]] = None,
    n_frames: Optional[int] = None,
    modes=None,
) -> dict[str, Trajectory]:
    """Run each mode over the same scans.

    With one worker the scans are rendered lazily and fed to every mode in
    lockstep; with more, the scans are buffered and modes run side by side.
    """
    modes = [TrackerMode(m).value for m in (modes or sc.modes)]
    workers = min(thread_count(), len(modes))
    if scans is None and workers > 1:
        scans = list(iter_scans(sc, n_frames))
    source = iter_scans(sc, n_frames) if scans is None else scans
    runners = None
    if workers <= 1:
        for scan in source:
            if runners is None:
                runners = _runners(sc, modes, scan.t)
            for r in runners.values():
                r.feed(scan)
    elif len(scans):
        runners = _runners(sc, modes, scans[0].t)

        def drive(r):
            for scan in scans:
                r.feed(scan)

        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(drive, runners.values()))
    if runners is None:
        return {m: Trajectory(meta={"mode": m, "scenario": sc.name, "seed": sc.seed}) for m in modes}
    return {m: r.trajectory for m, r in runners.items()}


def evaluate(
    sc: Scenario, trajectories: dict[str, Trajectory], gt: Optional[list] = None
) -> tuple[dict[str, ErrorReport], Optional[Comparison], list[str]]:
    gt = ground_truth(sc) if gt is None else gt
    e = sc.eval
    reports, missing = {}, []
    for mode, traj in trajectories.items():
        if not traj.samples:
            missing.append(mode)
            continue
        reports[mode] = compute_ape(traj, gt, e.max_dt, e.loss_ape, e.loss_frames)
    comparison = compare_methods(reports) if len(reports) >= 2 else None
    return reports, comparison, missing


def run_scenario(
    sc: Scenario,
    out_dir=None,
    n_frames: Optional[int] = None,
    modes=None,
    dump_scans: bool = False,
) -> RunResult:
    """Track, evaluate and (optionally) write every artifact into ``out_dir``.

    Raises :class:`NoInitError` after writing artifacts when some mode never
    started a track.
    """
    scans = None
    if dump_scans:
        scans = list(iter_scans(sc, n_frames))
    trajectories = track_modes(sc, scans, n_frames, modes)
    gt = ground_truth(sc)
    reports, comparison, missing = evaluate(sc, trajectories, gt)
    timing = {m: timing_summary(t.frame_ms) for m, t in trajectories.items()}
    result = RunResult(sc, trajectories, reports, comparison, gt, timing, missing)
    if out_dir is not None:
        write_artifacts(result, out_dir, scans)
    if missing:
        raise NoInitError(missing)
    return result


def write_artifacts(result: RunResult, out_dir, scans=None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(scenario_to_dict(result.scenario), out / "scenario.json")
    io.write_ground_truth_csv(result.ground_truth, out / "ground_truth.csv")
    for mode, traj in result.trajectories.items():
        io.write_trajectory_csv(traj, out / f"trajectory_{mode}.csv")
    for mode, rep in result.reports.items():
        io.write_json(rep.to_dict(), out / f"report_{mode}.json")
    if result.comparison is not None:
        (out / "comparison.txt").write_text(result.comparison.to_text())
    if result.no_init:
        n = max((len(t.frame_ms) for t in result.trajectories.values()), default=0)
        io.write_json(
            {"status": "no-init", "modes": result.no_init, "frames": n}, out / "no_init.json"
        )
    io.write_json(result.timing, out / "timing.json")
    if scans is not None:
        io.write_scans(scans, out / "scans")


def benchmark(
    sc: Scenario, n_frames: int = 300, repetitions: int = 1, modes=None
) -> dict:
    """Time tracker steps only, on scans rendered beforehand.

    Returns per-repetition records and an aggregate per mode.
    """
    if n_frames < MIN_BENCH_FRAMES:
        raise ValueError(f"benchmark needs at least {MIN_BENCH_FRAMES} frames, got {n_frames}")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    modes = [TrackerMode(m).value for m in (modes or (TrackerMode.FUSED,))]
    scans = _bench_scans(sc, n_frames)
    records = []
    for rep in range(repetitions):
        rec = {"repetition": rep}
        for mode in modes:
            runner = _runners(sc, [mode], scans[0].t)[mode]
            for scan in scans:
                runner.feed(scan)
            if not runner.trajectory.samples:
                raise NoInitError([mode])
            rec[mode] = timing_summary(runner.trajectory.frame_ms)
        records.append(rec)
    aggregate = {}
    for mode in modes:
        ms = [r[mode]["mean_frame_ms"] for r in records]
        p95 = [r[mode]["p95_frame_ms"] for r in records]
        mean = float(np.mean(ms))
        aggregate[mode] = {
            "mean_frame_ms": mean,
            "p95_frame_ms": float(np.max(p95)),
            "effective_fps": 1000.0 / mean,
            "frames": n_frames,
            "repetitions": repetitions,
        }
    return {
        "scenario": sc.name,
        "seed": sc.seed,
        "image": [sc.sensor.rows, sc.sensor.cols],
        "records": records,
        "aggregate": aggregate,
    }


def _bench_scans(sc: Scenario, n_frames: int) -> list[PanoramicScan]:
    """``n_frames`` scans, looping the trajectory with continuing timestamps if needed."""
    available = sc.n_frames
    if n_frames <= available:
        return list(iter_scans(sc, n_frames))
    longer = replace(sc, trajectory=replace(sc.trajectory, duration=n_frames / sc.sensor.frame_rate))
    return list(iter_scans(longer, n_frames))
