"""Spherical projection linking panoramic image pixels to 3D points.

Sensor frame is x forward, y left, z up. Columns sweep azimuth
counter-clockwise from +x; row 0 is the top beam.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SensorIntrinsics:
    rows: int = 128
    cols: int = 1024
    fov_vertical: float = np.pi / 2
    frame_rate: float = 10.0
    max_range: float = 50.0
    min_range: float = 0.3

    def __post_init__(self):
        if self.rows < 2 or self.cols < 4:
            raise ValueError(f"image must be at least 2x4, got {self.rows}x{self.cols}")
        if not 0.0 < self.fov_vertical < np.pi:
            raise ValueError(f"fov_vertical must lie in (0, pi), got {self.fov_vertical}")
        if not 0.0 <= self.min_range < self.max_range:
            raise ValueError("min_range must be non-negative and below max_range")
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be positive")

    @property
    def col_res(self) -> float:
        """Azimuth width of one column in radians."""
        return TWO_PI / self.cols

    @property
    def row_res(self) -> float:
        """Elevation height of one row in radians."""
        return self.fov_vertical / self.rows


class PixelCoord(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True)
class ImageRoi:
    """Rectangular image region; the column span may wrap past the seam.

    Columns covered are ``(col_start + k) % cols`` for ``k < col_len``.
    """

    row_min: int
    row_max: int
    col_start: int
    col_len: int

    def validate(self, intr: SensorIntrinsics) -> None:
        if not 0 <= self.row_min <= self.row_max < intr.rows:
            raise ValueError(f"bad row interval [{self.row_min}, {self.row_max}]")
        if not 1 <= self.col_len <= intr.cols or not 0 <= self.col_start < intr.cols:
            raise ValueError(f"bad column span start={self.col_start} len={self.col_len}")

    @classmethod
    def full(cls, intr: SensorIntrinsics) -> "ImageRoi":
        return cls(0, intr.rows - 1, 0, intr.cols)

    @property
    def n_rows(self) -> int:
        return self.row_max - self.row_min + 1

    def column_indices(self, n_cols: int) -> np.ndarray:
        return (self.col_start + np.arange(self.col_len)) % n_cols

    def wraps(self, n_cols: int) -> bool:
        return self.col_start + self.col_len > n_cols

    def contains(self, row, col, n_cols: int):
        """Vectorised membership test for pixel coordinates."""
        row = np.asarray(row)
        col = np.asarray(col)
        in_rows = (row >= self.row_min) & (row <= self.row_max)
        in_cols = (col - self.col_start) % n_cols < self.col_len
        return in_rows & in_cols


@dataclass(frozen=True)
class ScanTruth:
    """Ground-truth side channel attached by the simulator."""

    position: np.ndarray
    range: float
    roi: Optional[ImageRoi]


@dataclass(frozen=True, eq=False)
class PanoramicScan:
    """One sensor revolution as organized images.

    ``range_image`` holds the measured range per pixel (0 where no return),
    ``signal`` the return strength and ``valid`` the return mask. The 3D
    point of a valid pixel lies along that pixel's bin-center ray.
    """

    range_image: np.ndarray
    signal: np.ndarray
    valid: np.ndarray
    t: float
    frame_index: int
    intr: SensorIntrinsics
    truth: Optional[ScanTruth] = field(default=None, compare=False)

    @property
    def points(self) -> np.ndarray:
        """Organized (rows, cols, 3) point image; invalid pixels are zero."""
        return self.range_image[..., None] * unit_directions(self.intr)


@dataclass(frozen=True)
class RoiPoints:
    points: np.ndarray  # (n, 3)
    pixels: np.ndarray  # (n, 2) row, col

    def __len__(self) -> int:
        return len(self.points)


@lru_cache(maxsize=8)
def unit_directions(intr: SensorIntrinsics) -> np.ndarray:
    """Bin-center unit ray for every pixel, shape (rows, cols, 3), float32."""
    elev = intr.fov_vertical / 2 - (np.arange(intr.rows) + 0.5) * intr.row_res
    azim = (np.arange(intr.cols) + 0.5) * intr.col_res
    ce = np.cos(elev)[:, None]
    dirs = np.empty((intr.rows, intr.cols, 3))
    dirs[..., 0] = ce * np.cos(azim)[None, :]
    dirs[..., 1] = ce * np.sin(azim)[None, :]
    dirs[..., 2] = np.sin(elev)[:, None]
    out = dirs.astype(np.float32)
    out.flags.writeable = False
    return out


def project_points(points: np.ndarray, intr: SensorIntrinsics):
    """Vectorised projection.

    Returns ``(rows, cols, ok)`` where ``ok`` marks points inside the range
    and vertical-FOV envelope; rows/cols of rejected points are meaningless.
    """
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    rng = np.linalg.norm(p, axis=1)
    half = intr.fov_vertical / 2
    with np.errstate(invalid="ignore", divide="ignore"):
        elev = np.arcsin(np.clip(p[:, 2] / rng, -1.0, 1.0))
    ok = (rng >= intr.min_range) & (rng <= intr.max_range) & (np.abs(elev) <= half)
    azim = np.mod(np.arctan2(p[:, 1], p[:, 0]), TWO_PI)
    cols = np.floor(azim / TWO_PI * intr.cols).astype(np.int64) % intr.cols
    rows = np.floor((half - elev) / intr.fov_vertical * intr.rows)
    rows = np.clip(np.nan_to_num(rows), 0, intr.rows - 1).astype(np.int64)
    return rows, cols, ok


def project(p, intr: SensorIntrinsics) -> Optional[PixelCoord]:
    """Pixel whose angular bin contains ``p``, or None outside the envelope."""
    rows, cols, ok = project_points(np.asarray(p, dtype=np.float64)[None, :], intr)
    if not ok[0]:
        return None
    return PixelCoord(int(rows[0]), int(cols[0]))


def pixel_angles(row, col, intr: SensorIntrinsics):
    """Bin-center (elevation, azimuth) of pixel(s)."""
    elev = intr.fov_vertical / 2 - (np.asarray(row) + 0.5) * intr.row_res
    azim = (np.asarray(col) + 0.5) * intr.col_res
    return elev, azim


def unproject(px: PixelCoord, range_m: float, intr: SensorIntrinsics) -> np.ndarray:
    row, col = px
    if not (0 <= row < intr.rows and 0 <= col < intr.cols):
        raise ValueError(f"pixel {tuple(px)} outside {intr.rows}x{intr.cols} image")
    if not range_m > 0:
        raise ValueError(f"range must be positive, got {range_m}")
    elev, azim = pixel_angles(row, col, intr)
    ce = np.cos(elev)
    return range_m * np.array([ce * np.cos(azim), ce * np.sin(azim), np.sin(elev)])


def covering_interval(cols, n_cols: int) -> tuple[int, int]:
    """Shortest circular column span ``(start, length)`` covering ``cols``."""
    u = np.unique(np.asarray(cols) % n_cols)
    if u.size == 0:
        raise ValueError("no columns to cover")
    if u.size == 1:
        return int(u[0]), 1
    gaps = np.diff(np.append(u, u[0] + n_cols))
    k = int(np.argmax(gaps))
    # the span starts right after the widest empty gap
    start = int(u[(k + 1) % u.size])
    return start, int(n_cols - gaps[k] + 1)


def roi_to_points(scan: PanoramicScan, roi: ImageRoi) -> RoiPoints:
    """Valid points whose pixel lies inside ``roi`` (seam-aware)."""
    intr = scan.intr
    rows = np.arange(roi.row_min, roi.row_max + 1)
    r0, r1 = roi.row_min, roi.row_max + 1
    c0 = roi.col_start
    c1 = c0 + roi.col_len
    if c1 <= intr.cols:
        col_slices = [np.arange(c0, c1)]
        rng_blocks = [scan.range_image[r0:r1, c0:c1]]
        val_blocks = [scan.valid[r0:r1, c0:c1]]
    else:
        wrap = c1 - intr.cols
        col_slices = [np.arange(c0, intr.cols), np.arange(0, wrap)]
        rng_blocks = [scan.range_image[r0:r1, c0:], scan.range_image[r0:r1, :wrap]]
        val_blocks = [scan.valid[r0:r1, c0:], scan.valid[r0:r1, :wrap]]
    dirs = unit_directions(intr)
    pts, pix = [], []
    for cols, rng_b, val_b in zip(col_slices, rng_blocks, val_blocks):
        rr, cc = np.nonzero(val_b)
        gr, gc = rows[rr], cols[cc]
        pts.append(dirs[gr, gc].astype(np.float64) * rng_b[rr, cc, None])
        pix.append(np.stack([gr, gc], axis=1))
    return RoiPoints(np.concatenate(pts), np.concatenate(pix).astype(np.int64))
