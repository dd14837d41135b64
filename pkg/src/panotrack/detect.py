"""Image-space UAV detection on the panoramic signal image.

Two stand-ins for a learned detector: an intensity blob detector that
works on the image alone, and a simulated detector that reads the
simulator's ground truth and misses with a range-dependent probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from scipy import ndimage

from .geometry import ImageRoi, PanoramicScan, ScanTruth, SensorIntrinsics, covering_interval


@dataclass(frozen=True)
class Detection:
    roi: ImageRoi
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class BlobParams:
    intensity_threshold: float = 0.45
    min_area_px: int = 3
    max_area_px: int = 20000
    dilation_px: int = 1

    def __post_init__(self):
        if self.intensity_threshold <= 0 or self.min_area_px < 1:
            raise ValueError("blob threshold and min area must be positive")
        if self.max_area_px < self.min_area_px or self.dilation_px < 0:
            raise ValueError("need max_area_px >= min_area_px and dilation_px >= 0")


@dataclass(frozen=True)
class SimulatedParams:
    max_reliable_range: float = 2.4
    # (range, miss probability) knots, linearly interpolated; None = default cliff
    miss_curve: Optional[tuple[tuple[float, float], ...]] = None
    bbox_jitter_px: int = 1

    def __post_init__(self):
        if self.max_reliable_range <= 0 or self.bbox_jitter_px < 0:
            raise ValueError("max_reliable_range must be positive, jitter non-negative")
        r, p = self.knots()
        if np.any(np.diff(r) <= 0):
            raise ValueError("miss_curve ranges must be strictly increasing")
        if np.any(np.diff(p) < 0) or p.min() < 0 or p.max() > 1:
            raise ValueError("miss_curve must be non-decreasing within [0, 1]")

    def knots(self) -> tuple[np.ndarray, np.ndarray]:
        if self.miss_curve is None:
            r = self.max_reliable_range
            return np.array([r, 1.5 * r]), np.array([0.0, 1.0])
        arr = np.asarray(self.miss_curve, dtype=np.float64).reshape(-1, 2)
        return arr[:, 0], arr[:, 1]

    def miss_probability(self, range_m: float) -> float:
        r, p = self.knots()
        return float(np.interp(range_m, r, p))


@dataclass(frozen=True)
class DetectorConfig:
    mode: Literal["blob", "simulated"] = "simulated"
    blob: BlobParams = field(default_factory=BlobParams)
    simulated: SimulatedParams = field(default_factory=SimulatedParams)
    # extra detector-independent miss rate
    dropout_prob: float = 0.0

    def __post_init__(self):
        if self.mode not in ("blob", "simulated"):
            raise ValueError(f"unknown detector mode {self.mode!r}")
        if not 0.0 <= self.dropout_prob < 1.0:
            raise ValueError("dropout_prob must lie in [0, 1)")


def label_wrapped(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected component labels where the first and last columns touch."""
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return labels, 0
    parent = np.arange(n + 1)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    left, right = labels[:, 0], labels[:, -1]
    rows = mask.shape[0]
    for r in np.nonzero(left)[0]:
        for rr in range(max(r - 1, 0), min(r + 2, rows)):
            if right[rr]:
                a, b = find(left[r]), find(right[rr])
                if a != b:
                    parent[max(a, b)] = min(a, b)
    roots = np.array([find(i) for i in range(n + 1)])
    uniq, relabeled = np.unique(roots, return_inverse=True)
    # label 0 stays background because root(0) == 0 is the smallest value
    return relabeled[labels], len(uniq) - 1


def _dilate_wrapped(mask: np.ndarray, d: int) -> np.ndarray:
    """Square dilation of radius ``d``; columns wrap, rows do not."""
    if d == 0:
        return mask
    d_col = min(d, mask.shape[1])
    padded = np.concatenate([mask[:, -d_col:], mask, mask[:, :d_col]], axis=1)
    grown = ndimage.binary_dilation(padded, structure=np.ones((2 * d + 1, 2 * d + 1), dtype=bool))
    return grown[:, d_col : d_col + mask.shape[1]]


def _detect_blob(signal: np.ndarray, params: BlobParams) -> Optional[Detection]:
    """Bright pixels grouped within ``dilation_px`` of each other form one blob.

    Sparse returns break a target into speckle, so grouping runs on the
    dilated mask; area, score and box use only the bright pixels themselves.
    """
    rows, cols = signal.shape
    bright = signal >= params.intensity_threshold
    if not bright.any():
        return None
    labels, n = label_wrapped(_dilate_wrapped(bright, params.dilation_px))
    rr_all, cc_all = np.nonzero(bright)
    lab_all = labels[rr_all, cc_all]
    order = np.argsort(lab_all, kind="stable")
    bounds = np.searchsorted(lab_all[order], np.arange(1, n + 2))
    best_key, best = None, None
    for lab in range(1, n + 1):
        sel = order[bounds[lab - 1] : bounds[lab]]
        area = sel.size
        if not params.min_area_px <= area <= params.max_area_px:
            continue
        rr, cc = rr_all[sel], cc_all[sel]
        mean = float(signal[rr, cc].mean())
        start, length = covering_interval(cc, cols)
        roi = ImageRoi(int(rr.min()), int(rr.max()), start, length)
        key = (-mean, -int(area), roi.row_min, roi.col_start)
        if best_key is None or key < best_key:
            best_key, best = key, (roi, mean)
    if best is None:
        return None
    roi, mean = best
    return Detection(roi, float(np.clip(mean, 0.0, 1.0)))


def _detect_simulated(
    truth: Optional[ScanTruth],
    params: SimulatedParams,
    intr: SensorIntrinsics,
    rng: np.random.Generator,
) -> Optional[Detection]:
    u = rng.random()
    jitter = rng.integers(-params.bbox_jitter_px, params.bbox_jitter_px + 1, size=4)
    if truth is None or truth.roi is None:
        return None
    p_miss = params.miss_probability(truth.range)
    if u < p_miss:
        return None
    roi = truth.roi
    # padding by the jitter amplitude keeps the box around the whole silhouette
    grow = jitter + params.bbox_jitter_px  # each edge moves outward by 0..2*jitter
    r0 = max(roi.row_min - int(grow[0]), 0)
    r1 = min(roi.row_max + int(grow[1]), intr.rows - 1)
    length = min(roi.col_len + int(grow[2] + grow[3]), intr.cols)
    start = (roi.col_start - int(grow[2])) % intr.cols if length < intr.cols else 0
    return Detection(ImageRoi(r0, r1, int(start), length), 1.0 - p_miss)


def detect(
    signal: np.ndarray,
    config: DetectorConfig,
    intr: SensorIntrinsics,
    truth: Optional[ScanTruth] = None,
    rng: Optional[np.random.Generator] = None,
) -> Optional[Detection]:
    """Best single UAV detection in ``signal`` or None."""
    if signal.shape != (intr.rows, intr.cols):
        raise ValueError(f"signal image {signal.shape} does not match {intr.rows}x{intr.cols}")
    if rng is None:
        rng = np.random.default_rng(0)
    dropped = rng.random() < config.dropout_prob
    if config.mode == "blob":
        det = _detect_blob(signal, config.blob)
    else:
        det = _detect_simulated(truth, config.simulated, intr, rng)
    return None if dropped else det


class Detector:
    """Per-frame callable around :func:`detect` with a frame-derived RNG.

    Randomness depends only on (seed, frame index), so every tracker mode
    sees the same detections on the same scan.
    """

    STREAM = 0xD7

    def __init__(self, config: DetectorConfig, seed: int = 0):
        self.config = config
        self.seed = seed

    def __call__(self, scan: PanoramicScan) -> Optional[Detection]:
        rng = np.random.default_rng([self.seed, scan.frame_index, self.STREAM])
        return detect(scan.signal, self.config, scan.intr, scan.truth, rng)
