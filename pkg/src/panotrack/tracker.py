"""Single-UAV tracking over panoramic scans in fused, image-only and point-cloud-only modes."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterable, Optional

import numpy as np

from . import kf
from .cluster import Cluster, ClusterParams, dbscan, extract_object, ground_mask
from .detect import Detection
from .geometry import ImageRoi, PanoramicScan, roi_to_points
from .kf import InvalidStateError, KfParams, TrackState

DetectorFn = Callable[[PanoramicScan], Optional[Detection]]


class TrackerMode(str, Enum):
    FUSED = "fused"
    IMAGE_ONLY = "image_only"
    PCD_ONLY = "pcd_only"


@dataclass(frozen=True)
class TrackerParams:
    cluster: ClusterParams = field(default_factory=ClusterParams)
    kf: KfParams = field(default_factory=KfParams)
    # consecutive predicted frames before the track is declared lost
    n_miss: int = 10
    init_pos_sigma: float = 0.2
    init_vel_sigma: float = 1.0

    def __post_init__(self):
        if self.n_miss < 1:
            raise ValueError("n_miss must be >= 1")


@dataclass(frozen=True)
class PoseEstimate:
    t: float
    position: np.ndarray
    velocity: np.ndarray
    source: str  # "measured" | "predicted"
    cluster_count: int = 0
    lost: bool = False


@dataclass(frozen=True)
class PrevCluster:
    count: int
    range: float


@dataclass(frozen=True)
class TrackerState:
    kf: TrackState
    prev_cluster: Optional[PrevCluster]
    mode: TrackerMode
    initialized: bool = True

    def is_lost(self, params: TrackerParams) -> bool:
        return self.kf.misses >= params.n_miss


@dataclass
class Trajectory:
    samples: list[PoseEstimate] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    frame_ms: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples], dtype=np.float64)

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self.samples], dtype=np.float64).reshape(-1, 3)

    @property
    def velocities(self) -> np.ndarray:
        return np.array([s.velocity for s in self.samples], dtype=np.float64).reshape(-1, 3)

    @property
    def sources(self) -> list[str]:
        return [s.source for s in self.samples]

    @property
    def measured_fraction(self) -> float:
        if not self.samples:
            return 0.0
        return sum(s.source == "measured" for s in self.samples) / len(self.samples)


def _coast_reference(prev: PrevCluster, position: np.ndarray) -> PrevCluster:
    """Reference for the next frame when the predicted pose stands in for the object.

    The range follows the prediction; the count follows the inverse-square
    falloff of returns from the last measured cluster.
    """
    r = float(np.linalg.norm(position))
    if not r > 0:
        return prev
    count = max(1, int(round(prev.count * (prev.range / r) ** 2)))
    return PrevCluster(count, r)


def _largest_cluster(points: np.ndarray, params: ClusterParams) -> Optional[Cluster]:
    kept = points[~ground_mask(points, params.ground)]
    clusters = dbscan(kept, params.eps, params.min_pts)
    if not clusters:
        return None
    # ties go to the earlier cluster
    return max(clusters, key=lambda c: (c.count, -int(c.indices[0])))


def _nearest_cluster(points, position, params: ClusterParams) -> Optional[Cluster]:
    kept = points[~ground_mask(points, params.ground)]
    clusters = dbscan(kept, params.eps, params.min_pts)
    if not clusters:
        return None
    best = min(clusters, key=lambda c: float(np.linalg.norm(c.centroid - position)))
    if np.linalg.norm(best.centroid - position) > params.assoc.max_range_dev:
        return None
    return best


def init_track(
    scan: PanoramicScan,
    detector: DetectorFn,
    params: TrackerParams,
    mode: TrackerMode = TrackerMode.FUSED,
) -> Optional[TrackerState]:
    """Detect the UAV and start a track at its cluster centroid, or None."""
    mode = TrackerMode(mode)
    if mode is TrackerMode.PCD_ONLY:
        raise ValueError("pcd_only tracks need init_track_manual")
    det = detector(scan)
    if det is None:
        return None
    cluster = _largest_cluster(roi_to_points(scan, det.roi).points, params.cluster)
    if cluster is None:
        return None
    state = kf.initial_state(cluster.centroid, scan.t, params.init_pos_sigma, params.init_vel_sigma)
    return TrackerState(state, PrevCluster(cluster.count, cluster.range), mode)


def init_track_manual(position, t: float, params: TrackerParams) -> TrackerState:
    """Start a point-cloud-only track from a known position."""
    position = np.asarray(position, dtype=np.float64)
    if position.shape != (3,) or not np.all(np.isfinite(position)):
        raise ValueError("initial position must be a finite 3-vector")
    state = kf.initial_state(position, t, params.init_pos_sigma, params.init_vel_sigma)
    return TrackerState(state, None, TrackerMode.PCD_ONLY)


def seed_reference(state: TrackerState, scan: PanoramicScan, params: TrackerParams) -> TrackerState:
    """Fill the previous-cluster summary from the cluster nearest the track position."""
    roi = kf.predicted_roi(state.kf, scan.intr, params.kf)
    cluster = _nearest_cluster(roi_to_points(scan, roi).points, state.kf.position, params.cluster)
    if cluster is None:
        return state
    return replace(state, prev_cluster=PrevCluster(cluster.count, cluster.range))


def _search_roi(state: TrackerState, pred: TrackState, scan, detector, params) -> Optional[ImageRoi]:
    if state.mode is not TrackerMode.PCD_ONLY:
        det = detector(scan) if detector is not None else None
        if det is not None:
            return det.roi
        if state.mode is TrackerMode.IMAGE_ONLY:
            return None
    return kf.predicted_roi(pred, scan.intr, params.kf)


def step(
    state: TrackerState,
    scan: PanoramicScan,
    detector: Optional[DetectorFn],
    params: TrackerParams,
) -> tuple[TrackerState, PoseEstimate]:
    """Advance the track by one scan."""
    if state is None or not state.initialized:
        raise InvalidStateError("tracker is not initialized")
    dt = scan.t - state.kf.t
    if not dt > 0:
        raise ValueError(f"scan time {scan.t} does not advance past {state.kf.t}")
    pred = kf.predict(state.kf, dt, params.kf)
    roi = _search_roi(state, pred, scan, detector, params)

    cluster = None
    if roi is not None:
        points = roi_to_points(scan, roi).points
        if state.prev_cluster is None:
            cluster = _nearest_cluster(points, pred.position, params.cluster)
        else:
            prev = state.prev_cluster
            cluster = extract_object(points, prev.count, prev.range, params.cluster).cluster

    if cluster is not None:
        new_kf = kf.update(pred, cluster.centroid, params.kf)
        new_state = replace(state, kf=new_kf, prev_cluster=PrevCluster(cluster.count, cluster.range))
        source, count = "measured", cluster.count
    else:
        new_kf = replace(pred, misses=pred.misses + 1)
        prev = state.prev_cluster
        if prev is not None:
            prev = _coast_reference(prev, pred.position)
        new_state = replace(state, kf=new_kf, prev_cluster=prev)
        source, count = "predicted", 0
    pose = PoseEstimate(
        scan.t,
        new_kf.position.copy(),
        new_kf.velocity.copy(),
        source,
        count,
        new_state.is_lost(params),
    )
    return new_state, pose


class SequenceRunner:
    """Incremental form of :func:`run_sequence`: feed scans one at a time."""

    def __init__(
        self,
        mode: TrackerMode,
        detector: Optional[DetectorFn],
        params: TrackerParams,
        initial_position=None,
    ):
        self.mode = TrackerMode(mode)
        if self.mode is TrackerMode.PCD_ONLY and initial_position is None:
            raise ValueError("pcd_only mode requires an initial position")
        self.detector = detector
        self.params = params
        self.initial_position = initial_position
        self.state: Optional[TrackerState] = None
        self.trajectory = Trajectory(meta={"mode": self.mode.value})

    def _initialize(self, scan: PanoramicScan) -> Optional[PoseEstimate]:
        if self.mode is TrackerMode.PCD_ONLY:
            state = init_track_manual(self.initial_position, scan.t, self.params)
            state = seed_reference(state, scan, self.params)
        else:
            state = init_track(scan, self.detector, self.params, self.mode)
        self.state = state
        if state is None:
            return None
        count = state.prev_cluster.count if state.prev_cluster else 0
        return PoseEstimate(
            scan.t, state.kf.position.copy(), state.kf.velocity.copy(), "measured", count
        )

    def feed(self, scan: PanoramicScan) -> Optional[PoseEstimate]:
        t0 = time.perf_counter()
        if self.state is None:
            pose = self._initialize(scan)
        else:
            self.state, pose = step(self.state, scan, self.detector, self.params)
        self.trajectory.frame_ms.append((time.perf_counter() - t0) * 1e3)
        if pose is not None:
            self.trajectory.samples.append(pose)
        return pose


def run_sequence(
    scans: Iterable[PanoramicScan],
    mode: TrackerMode,
    detector: Optional[DetectorFn],
    params: TrackerParams,
    initial_position=None,
) -> Trajectory:
    """Track through ``scans``; one pose per scan once the track exists.

    ``initial_position`` is required for point-cloud-only mode, which
    cannot find the UAV on its own. Per-scan processing time is kept in
    ``Trajectory.frame_ms``.
    """
    runner = SequenceRunner(mode, detector, params, initial_position)
    for scan in scans:
        runner.feed(scan)
    return runner.trajectory
