"""Constant-velocity Kalman filter over 3D position and velocity."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import ImageRoi, SensorIntrinsics, project

# scales the projected position standard deviation into ROI half-extent
ROI_SIGMA_SCALE = 3.0


class InvalidStateError(RuntimeError):
    """Raised when a filter or tracker state cannot be advanced."""


@dataclass(frozen=True)
class KfParams:
    q_accel: float = 2.0
    r_pos: float = 0.05
    roi_base_margin_px: float = 8.0
    roi_growth_per_miss: float = 1.5
    # maximum ROI extent as a fraction of (image width, image height)
    roi_max_fraction: tuple[float, float] = (0.25, 0.5)

    def __post_init__(self):
        if self.q_accel <= 0 or self.r_pos <= 0:
            raise ValueError("q_accel and r_pos must be positive")
        if self.roi_growth_per_miss < 1 or self.roi_base_margin_px <= 0:
            raise ValueError("roi_growth_per_miss >= 1 and positive base margin required")
        if not all(0 < f <= 1 for f in self.roi_max_fraction):
            raise ValueError("roi_max_fraction entries must lie in (0, 1]")


@dataclass(frozen=True)
class TrackState:
    """State ``x = (px, py, pz, vx, vy, vz)`` with covariance ``P`` valid at ``t``."""

    x: np.ndarray
    P: np.ndarray
    t: float
    misses: int = 0

    @property
    def position(self) -> np.ndarray:
        return self.x[:3]

    @property
    def velocity(self) -> np.ndarray:
        return self.x[3:]


def initial_state(
    position, t: float, pos_sigma: float = 0.2, vel_sigma: float = 1.0, velocity=None
) -> TrackState:
    x = np.zeros(6)
    x[:3] = position
    if velocity is not None:
        x[3:] = velocity
    P = np.diag([pos_sigma**2] * 3 + [vel_sigma**2] * 3)
    return TrackState(x, P, float(t), 0)


def transition(dt: float) -> np.ndarray:
    F = np.eye(6)
    F[:3, 3:] = dt * np.eye(3)
    return F


def process_noise(dt: float, q_accel: float) -> np.ndarray:
    """Piecewise-constant white acceleration with std ``q_accel`` per axis."""
    g = np.array([[dt**4 / 4, dt**3 / 2], [dt**3 / 2, dt**2]]) * q_accel**2
    return np.kron(g, np.eye(3))


def predict(s: TrackState, dt: float, params: KfParams) -> TrackState:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not (np.all(np.isfinite(s.x)) and np.all(np.isfinite(s.P))):
        raise InvalidStateError("non-finite filter state")
    F = transition(dt)
    P = F @ s.P @ F.T + process_noise(dt, params.q_accel)
    return replace(s, x=F @ s.x, P=0.5 * (P + P.T), t=s.t + dt)


def update(s: TrackState, z, params: KfParams) -> TrackState:
    """Position measurement update (Joseph form); resets the miss counter."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (3,) or not np.all(np.isfinite(z)):
        raise ValueError("measurement must be a finite 3-vector")
    H = np.hstack([np.eye(3), np.zeros((3, 3))])
    R = params.r_pos**2 * np.eye(3)
    S = H @ s.P @ H.T + R
    K = np.linalg.solve(S, H @ s.P).T
    x = s.x + K @ (z - H @ s.x)
    A = np.eye(6) - K @ H
    P = A @ s.P @ A.T + K @ R @ K.T
    return replace(s, x=x, P=0.5 * (P + P.T), misses=0)


def _angular_sigma(pos: np.ndarray, P_pos: np.ndarray) -> tuple[float, float]:
    """Std of (azimuth, elevation) from the position covariance, first order."""
    x, y, z = pos
    rho2 = x * x + y * y
    r2 = rho2 + z * z
    rho = np.sqrt(rho2)
    J = np.array(
        [
            [-y / rho2, x / rho2, 0.0],
            [-x * z / (r2 * rho), -y * z / (r2 * rho), rho / r2],
        ]
    )
    C = J @ P_pos @ J.T
    return float(np.sqrt(max(C[0, 0], 0.0))), float(np.sqrt(max(C[1, 1], 0.0)))


def roi_half_extents(s: TrackState, intr: SensorIntrinsics, params: KfParams):
    """(row, col) half-extents in pixels before clamping."""
    base = params.roi_base_margin_px * params.roi_growth_per_miss**s.misses
    sig_az, sig_el = _angular_sigma(s.position, s.P[:3, :3])
    half_col = base + ROI_SIGMA_SCALE * sig_az / intr.col_res
    half_row = base + ROI_SIGMA_SCALE * sig_el / intr.row_res
    return half_row, half_col


def predicted_roi(s: TrackState, intr: SensorIntrinsics, params: KfParams) -> ImageRoi:
    """Search window around the projected position; full image if off-sensor."""
    px = project(s.position, intr)
    if px is None or np.hypot(s.position[0], s.position[1]) < 1e-9:
        return ImageRoi.full(intr)
    half_row, half_col = roi_half_extents(s, intr, params)
    frac_c, frac_r = params.roi_max_fraction
    half_col = min(half_col, frac_c * intr.cols / 2)
    half_row = min(half_row, frac_r * intr.rows / 2)
    hc = int(np.ceil(half_col))
    hr = int(np.ceil(half_row))
    length = min(2 * hc + 1, intr.cols)
    start = (px.col - hc) % intr.cols if length < intr.cols else 0
    return ImageRoi(max(px.row - hr, 0), min(px.row + hr, intr.rows - 1), start, length)
