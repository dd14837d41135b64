"""Synthetic UAV trajectories and panoramic scan rendering."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal, Optional, Union

import numpy as np

from .geometry import (
    ImageRoi,
    PanoramicScan,
    ScanTruth,
    SensorIntrinsics,
    covering_interval,
    unit_directions,
)

GROUND_REFLECTIVITY = 0.25
UAV_REFLECTIVITY = 0.95
# signal halves at this range; keeps the UAV band above any background return
SIGNAL_HALF_RANGE = 10.0
SIGNAL_NOISE = 0.01


@dataclass(frozen=True)
class TrajectorySpec:
    kind: Literal["spiral", "elliptical"] = "spiral"
    center: tuple[float, float, float] = (4.25, 0.0, 0.0)
    radii: tuple[float, float] = (3.75, 3.75)
    angular_rate: float = 2 * np.pi / 32.7
    climb_rate: float = 0.0
    z0: float = 0.0
    duration: float = 32.7
    sample_rate: float = 100.0
    phase0: float = 0.0

    def __post_init__(self):
        if self.kind not in ("spiral", "elliptical"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.duration <= 0 or self.sample_rate <= 0:
            raise ValueError("duration and sample_rate must be positive")
        if len(self.radii) != 2 or min(self.radii) <= 0:
            raise ValueError("radii must be two positive lengths")
        if len(self.center) != 3:
            raise ValueError("center must be a 3-vector")
        if self.kind == "elliptical" and self.climb_rate != 0:
            raise ValueError("elliptical trajectories are planar; climb_rate must be 0")


@dataclass(frozen=True)
class GroundTruthSample:
    t: float
    position: np.ndarray
    velocity: np.ndarray

    @property
    def range(self) -> float:
        return float(np.linalg.norm(self.position))


@dataclass(frozen=True)
class UavShape:
    """Plus-configuration quadrotor: two crossed arm boxes and a body sphere."""

    arm_span: float = 0.5
    body_radius: float = 0.10
    arm_width: float = 0.04
    arm_height: float = 0.10

    def __post_init__(self):
        if min(self.arm_span, self.body_radius, self.arm_width, self.arm_height) <= 0:
            raise ValueError("UAV dimensions must be positive")

    @property
    def bounding_radius(self) -> float:
        half = np.array([self.arm_span, self.arm_width, self.arm_height]) / 2
        return float(max(np.linalg.norm(half), self.body_radius))


@dataclass(frozen=True)
class Box:
    min: tuple[float, float, float]
    max: tuple[float, float, float]
    reflectivity: float = 0.3
    kind: Literal["box"] = "box"

    def __post_init__(self):
        if any(a >= b for a, b in zip(self.min, self.max)):
            raise ValueError("box min must be below max on every axis")


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float
    reflectivity: float = 0.3
    kind: Literal["sphere"] = "sphere"

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")


Clutter = Union[Box, Sphere]


@dataclass(frozen=True)
class NoiseSpec:
    range_sigma: float = 0.02
    dropout_prob: float = 0.05

    def __post_init__(self):
        if self.range_sigma < 0:
            raise ValueError("range_sigma must be non-negative")
        if not 0 <= self.dropout_prob < 1:
            raise ValueError("dropout_prob must lie in [0, 1)")


@dataclass(frozen=True)
class SceneSpec:
    ground_z: Optional[float] = -1.0
    uav: UavShape = field(default_factory=UavShape)
    clutter: tuple[Clutter, ...] = ()
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    point_budget_k: float = 300.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.point_budget_k <= 0:
            raise ValueError("point_budget_k must be positive")
        if self.ground_z is not None and self.ground_z >= 0:
            raise ValueError("ground plane must lie below the sensor")


# -- trajectories -----------------------------------------------------------


def trajectory_state(spec: TrajectorySpec, t):
    """Analytic position and velocity at time(s) ``t``; shapes (..., 3)."""
    t = np.asarray(t, dtype=np.float64)
    a, b = spec.radii
    w = spec.angular_rate
    phase = spec.phase0 + w * t
    cx, cy, cz = spec.center
    climb = spec.climb_rate if spec.kind == "spiral" else 0.0
    pos = np.stack(
        [
            cx + a * np.cos(phase),
            cy + b * np.sin(phase),
            cz + spec.z0 + climb * t,
        ],
        axis=-1,
    )
    vel = np.stack(
        [-a * w * np.sin(phase), b * w * np.cos(phase), np.full_like(t, climb)],
        axis=-1,
    )
    return pos, vel


def make_trajectory(spec: TrajectorySpec) -> list[GroundTruthSample]:
    n = int(np.floor(spec.duration * spec.sample_rate + 1e-9)) + 1
    ts = np.arange(n) / spec.sample_rate
    pos, vel = trajectory_state(spec, ts)
    return [GroundTruthSample(float(t), p, v) for t, p, v in zip(ts, pos, vel)]


def uav_point_count_model(range_m: float, k: float = 300.0) -> int:
    """Expected number of UAV returns at ``range_m``: inverse-square falloff."""
    if range_m <= 0:
        raise ValueError("range must be positive")
    return max(0, int(np.floor(k / range_m**2 + 0.5)))


# -- ray casting ------------------------------------------------------------


def _ray_box(dirs: np.ndarray, bmin, bmax) -> np.ndarray:
    """Entry distance of rays from the origin into an AABB (inf on miss)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t1 = np.asarray(bmin) * inv
        t2 = np.asarray(bmax) * inv
    tnear = np.nanmax(np.minimum(t1, t2), axis=-1)
    tfar = np.nanmin(np.maximum(t1, t2), axis=-1)
    hit = (tnear <= tfar) & (tfar > 0)
    return np.where(hit, np.where(tnear > 0, tnear, tfar), np.inf)


def _ray_sphere(dirs: np.ndarray, center, radius: float) -> np.ndarray:
    c = np.asarray(center, dtype=np.float64)
    b = dirs @ c
    disc = b * b - (c @ c - radius * radius)
    with np.errstate(invalid="ignore"):
        root = np.sqrt(disc)
    t = b - root
    t = np.where(t > 0, t, b + root)
    return np.where((disc >= 0) & (t > 0), t, np.inf)


def _ray_clutter(dirs: np.ndarray, obj: Clutter) -> np.ndarray:
    if isinstance(obj, Box):
        return _ray_box(dirs, obj.min, obj.max)
    return _ray_sphere(dirs, obj.center, obj.radius)


@lru_cache(maxsize=4)
def _static_background(ground_z, clutter: tuple, intr: SensorIntrinsics):
    """Noise-free range and reflectivity of the static scene (inf = no hit)."""
    dirs = unit_directions(intr).astype(np.float64)
    dist = np.full(dirs.shape[:2], np.inf)
    refl = np.zeros(dirs.shape[:2])
    if ground_z is not None:
        dz = dirs[..., 2]
        with np.errstate(divide="ignore"):
            tg = np.where(dz < 0, ground_z / dz, np.inf)
        dist = tg
        refl = np.where(np.isfinite(tg), GROUND_REFLECTIVITY, 0.0)
    for obj in clutter:
        tc = _ray_clutter(dirs, obj)
        closer = tc < dist
        dist = np.where(closer, tc, dist)
        refl = np.where(closer, obj.reflectivity, refl)
    dist.flags.writeable = False
    refl.flags.writeable = False
    return dist, refl


def _uav_window(center: np.ndarray, radius: float, intr: SensorIntrinsics):
    """Rows and columns whose rays may hit a sphere of ``radius`` at ``center``."""
    d = float(np.linalg.norm(center))
    d_xy = float(np.hypot(center[0], center[1]))
    if d <= radius * 1.01 or d_xy <= radius * 1.01:
        return np.arange(intr.rows), np.arange(intr.cols)
    ang = np.arcsin(radius / d)
    elev = np.arcsin(center[2] / d)
    half = intr.fov_vertical / 2
    r_lo = int(np.floor((half - (elev + ang)) / intr.row_res)) - 1
    r_hi = int(np.floor((half - (elev - ang)) / intr.row_res)) + 1
    rows = np.arange(max(r_lo, 0), min(r_hi, intr.rows - 1) + 1)
    az = np.arctan2(center[1], center[0])
    az_half = np.arcsin(min(1.0, radius / d_xy))
    c_lo = int(np.floor((az - az_half) / intr.col_res)) - 1
    c_hi = int(np.floor((az + az_half) / intr.col_res)) + 1
    n = min(c_hi - c_lo + 1, intr.cols)
    cols = (c_lo + np.arange(n)) % intr.cols
    return rows, cols


def _ray_uav(dirs: np.ndarray, center: np.ndarray, uav: UavShape) -> np.ndarray:
    s, w, h = uav.arm_span / 2, uav.arm_width / 2, uav.arm_height / 2
    arm_x = _ray_box(dirs, center - (s, w, h), center + (s, w, h))
    arm_y = _ray_box(dirs, center - (w, s, h), center + (w, s, h))
    body = _ray_sphere(dirs, center, uav.body_radius)
    return np.minimum(np.minimum(arm_x, arm_y), body)


def frame_rng(seed: int, frame_index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator per (seed, frame, stream) so frames render in any order."""
    return np.random.default_rng([int(seed), int(frame_index), int(stream)])


def render_scan(
    scene: SceneSpec,
    uav_pose: Optional[GroundTruthSample],
    intr: SensorIntrinsics,
    rng: np.random.Generator,
    frame_index: int = 0,
    t: Optional[float] = None,
) -> PanoramicScan:
    """Render one revolution with the UAV at ``uav_pose`` (None = absent).

    The UAV contributes about ``uav_point_count_model(range)`` returns drawn
    from its ray-cast silhouette; silhouette pixels not drawn report no return.
    """
    if t is None:
        t = uav_pose.t if uav_pose is not None else 0.0
    dist, refl = _static_background(scene.ground_z, scene.clutter, intr)
    dist = dist.copy()
    refl = refl.copy()
    noise = scene.noise

    keep = rng.random(dist.shape, dtype=np.float32) >= noise.dropout_prob
    jitter = rng.standard_normal(dist.shape, dtype=np.float32) * noise.range_sigma

    truth = None
    if uav_pose is not None:
        center = np.asarray(uav_pose.position, dtype=np.float64)
        rows, cols = _uav_window(center, scene.uav.bounding_radius, intr)
        dirs = unit_directions(intr)[np.ix_(rows, cols)].astype(np.float64)
        t_uav = _ray_uav(dirs, center, scene.uav)
        hit = np.isfinite(t_uav) & (t_uav < dist[np.ix_(rows, cols)])
        hr, hc = np.nonzero(hit)
        roi = None
        if hr.size:
            g_rows, g_cols = rows[hr], cols[hc]
            start, length = covering_interval(g_cols, intr.cols)
            roi = ImageRoi(int(g_rows.min()), int(g_rows.max()), start, length)
            n_target = uav_point_count_model(float(np.linalg.norm(center)), scene.point_budget_k)
            n_pick = min(n_target, hr.size)
            pick = np.zeros(hr.size, dtype=bool)
            pick[rng.choice(hr.size, size=n_pick, replace=False)] = True
            # unpicked silhouette pixels are occluded by the UAV but return nothing
            dist[g_rows, g_cols] = np.where(pick, t_uav[hr, hc], np.inf)
            refl[g_rows, g_cols] = np.where(pick, UAV_REFLECTIVITY, 0.0)
        truth = ScanTruth(center.copy(), float(np.linalg.norm(center)), roi)

    measured = dist + jitter
    valid = (
        np.isfinite(dist)
        & keep
        & (measured >= intr.min_range)
        & (measured <= intr.max_range)
    )
    range_image = np.where(valid, measured, 0.0).astype(np.float32)
    signal = np.zeros(dist.shape, dtype=np.float32)
    r_valid = range_image[valid]
    sig = refl[valid] / (1.0 + r_valid / SIGNAL_HALF_RANGE)
    sig += rng.standard_normal(sig.shape, dtype=np.float32) * SIGNAL_NOISE
    signal[valid] = np.clip(sig, 0.0, 1.0)
    for arr in (range_image, signal, valid):
        arr.flags.writeable = False
    return PanoramicScan(range_image, signal, valid, float(t), int(frame_index), intr, truth)
