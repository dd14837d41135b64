"""Trajectory error metrics against ground truth and method comparison."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .scene import GroundTruthSample
from .tracker import Trajectory

AXES = ("x", "y", "z")
DEFAULT_MAX_DT = 0.06
LOSS_APE = 0.5
LOSS_FRAMES = 10


class NoPairsError(ValueError):
    """No estimate could be paired with a ground-truth sample."""


@dataclass(frozen=True)
class AxisStats:
    mean: float
    rmse: float
    max: float
    quartiles: tuple[float, float, float]

    @classmethod
    def of(cls, err: np.ndarray) -> "AxisStats":
        q = np.percentile(err, [25, 50, 75])
        return cls(
            float(err.mean()),
            float(np.sqrt(np.mean(err**2))),
            float(err.max()),
            tuple(float(v) for v in q),
        )


@dataclass(frozen=True)
class ErrorReport:
    per_axis: dict[str, AxisStats]
    total: AxisStats
    velocity_per_axis: dict[str, AxisStats]
    n_paired: int
    n_unpaired: int
    measured_fraction: float
    detectable_distance: float
    max_truth_range: float
    mode: str = ""
    fps: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def pair_nearest(est_t: np.ndarray, gt_t: np.ndarray, max_dt: float):
    """Index of the nearest-time ground-truth sample per estimate (-1 if none within max_dt).

    Ties resolve to the earlier ground-truth sample.
    """
    est_t = np.asarray(est_t, dtype=np.float64)
    gt_t = np.asarray(gt_t, dtype=np.float64)
    if gt_t.size == 0:
        return np.full(est_t.size, -1)
    right = np.clip(np.searchsorted(gt_t, est_t), 0, gt_t.size - 1)
    left = np.clip(right - 1, 0, gt_t.size - 1)
    d_left = np.abs(est_t - gt_t[left])
    d_right = np.abs(est_t - gt_t[right])
    idx = np.where(d_left <= d_right, left, right)
    best = np.minimum(d_left, d_right)
    return np.where(best <= max_dt, idx, -1)


def sustained_run_start(flags: Sequence[bool], length: int) -> Optional[int]:
    """Index where the first run of ``length`` consecutive true flags begins."""
    run = 0
    for i, f in enumerate(flags):
        run = run + 1 if f else 0
        if run >= length:
            return i - length + 1
    return None


def _distance_before(ranges: np.ndarray, onset: Optional[int]) -> float:
    if onset is None:
        return float(ranges.max()) if ranges.size else 0.0
    return float(ranges[:onset].max()) if onset > 0 else 0.0


def align_trajectory(est: Trajectory, transform: np.ndarray) -> Trajectory:
    """Apply a rigid 4x4 transform to positions and rotate velocities."""
    T = np.asarray(transform, dtype=np.float64)
    if T.shape != (4, 4):
        raise ValueError("transform must be a 4x4 homogeneous matrix")
    R, d = T[:3, :3], T[:3, 3]
    if (
        not np.allclose(T[3], [0, 0, 0, 1], atol=1e-12)
        or np.abs(R @ R.T - np.eye(3)).max() > 1e-9
        or abs(np.linalg.det(R) - 1.0) > 1e-9
    ):
        raise ValueError("transform is not a rigid motion")
    samples = [
        replace(s, position=R @ s.position + d, velocity=R @ s.velocity) for s in est.samples
    ]
    return Trajectory(samples, dict(est.meta), list(est.frame_ms))


def compute_ape(
    est: Trajectory,
    gt: Sequence[GroundTruthSample],
    max_dt: float = DEFAULT_MAX_DT,
    loss_ape: float = LOSS_APE,
    loss_frames: int = LOSS_FRAMES,
) -> ErrorReport:
    """Absolute position and velocity errors after nearest-time pairing."""
    if not max_dt > 0:
        raise ValueError("max_dt must be positive")
    gt_t = np.array([g.t for g in gt], dtype=np.float64)
    gt_p = np.array([g.position for g in gt], dtype=np.float64).reshape(-1, 3)
    gt_v = np.array([g.velocity for g in gt], dtype=np.float64).reshape(-1, 3)
    idx = pair_nearest(est.times, gt_t, max_dt)
    ok = idx >= 0
    if not ok.any():
        raise NoPairsError("no estimate lies within max_dt of a ground-truth sample")
    j = idx[ok]
    dp = est.positions[ok] - gt_p[j]
    dv = est.velocities[ok] - gt_v[j]
    ape = np.linalg.norm(dp, axis=1)
    ranges = np.linalg.norm(gt_p[j], axis=1)
    onset = sustained_run_start(ape > loss_ape, loss_frames)
    sources = [s for s, keep in zip(est.sources, ok) if keep]
    return ErrorReport(
        per_axis={a: AxisStats.of(np.abs(dp[:, k])) for k, a in enumerate(AXES)},
        total=AxisStats.of(ape),
        velocity_per_axis={a: AxisStats.of(np.abs(dv[:, k])) for k, a in enumerate(AXES)},
        n_paired=int(ok.sum()),
        n_unpaired=int((~ok).sum()),
        measured_fraction=sum(s == "measured" for s in sources) / len(sources),
        detectable_distance=_distance_before(ranges, onset),
        max_truth_range=float(ranges.max()),
        mode=str(est.meta.get("mode", "")),
    )


def declared_loss_range(
    est: Trajectory, gt: Sequence[GroundTruthSample], n_miss: int, max_dt: float = DEFAULT_MAX_DT
) -> Optional[float]:
    """Truth range when the first tracker-declared loss began, None if never lost.

    A loss is a run of ``n_miss`` consecutive predicted frames; it begins at
    the first predicted frame of that run.
    """
    onset = sustained_run_start([s == "predicted" for s in est.sources], n_miss)
    if onset is None:
        return None
    gt_t = np.array([g.t for g in gt])
    k = pair_nearest(est.times[onset : onset + 1], gt_t, max_dt)[0]
    if k < 0:
        raise NoPairsError("loss onset has no ground-truth partner")
    return float(np.linalg.norm(gt[k].position))


@dataclass(frozen=True)
class Verdict:
    baseline: str
    mean: str  # "better" | "tie" | "worse", from the reference's view
    rmse: str


@dataclass
class Comparison:
    reference: str
    rows: list[dict] = field(default_factory=list)
    verdicts: list[Verdict] = field(default_factory=list)
    best_mean: Optional[str] = None
    best_rmse: Optional[str] = None

    @property
    def reference_best(self) -> bool:
        return self.best_mean == self.reference and self.best_rmse == self.reference

    def summary(self) -> list[str]:
        """Verdict statements, weakest first."""
        ref = self.reference
        if self.best_mean is None:
            return ["tie on mean APE, no winner"]
        lines = [f"{self.best_mean} best mean APE"]
        if self.best_mean == ref and self.reference_best:
            lines.append(f"{ref} best on both mean and RMSE")
        return lines

    def to_text(self) -> str:
        head = f"{'mode':<12}{'distance_m':>12}{'mean_m':>10}{'rmse_m':>10}{'measured':>10}{'fps':>9}"
        lines = [head]
        for r in self.rows:
            fps = "-" if r["fps"] is None else f"{r['fps']:.1f}"
            lines.append(
                f"{r['mode']:<12}{r['detectable_distance']:>12.2f}{r['mean']:>10.3f}"
                f"{r['rmse']:>10.3f}{r['measured_fraction']:>10.2f}{fps:>9}"
            )
        for v in self.verdicts:
            lines.append(f"{self.reference} vs {v.baseline}: mean {v.mean}, rmse {v.rmse}")
        lines.extend(f"verdict: {v}" for v in self.summary())
        return "\n".join(lines) + "\n"


def _relation(a: float, b: float, tol: float) -> str:
    if abs(a - b) <= tol:
        return "tie"
    return "better" if a < b else "worse"


def _unique_best(values: dict[str, float], tol: float) -> Optional[str]:
    best = min(values.values())
    winners = [k for k, v in values.items() if v - best <= tol]
    return winners[0] if len(winners) == 1 else None


def compare_methods(
    reports: Mapping[str, ErrorReport], reference: str = "fused", tol: float = 1e-12
) -> Comparison:
    """Table rows plus reference-versus-baseline ordering verdicts."""
    if len(reports) < 2:
        raise ValueError("need at least two reports to compare")
    if reference not in reports:
        reference = next(iter(reports))
    cmp = Comparison(reference)
    for mode, rep in reports.items():
        cmp.rows.append(
            {
                "mode": mode,
                "detectable_distance": rep.detectable_distance,
                "mean": rep.total.mean,
                "rmse": rep.total.rmse,
                "measured_fraction": rep.measured_fraction,
                "fps": rep.fps,
            }
        )
    ref = reports[reference]
    for mode, rep in reports.items():
        if mode == reference:
            continue
        cmp.verdicts.append(
            Verdict(
                mode,
                _relation(ref.total.mean, rep.total.mean, tol),
                _relation(ref.total.rmse, rep.total.rmse, tol),
            )
        )
    cmp.best_mean = _unique_best({m: r.total.mean for m, r in reports.items()}, tol)
    cmp.best_rmse = _unique_best({m: r.total.rmse for m, r in reports.items()}, tol)
    return cmp
