"""Artifact files: trajectory and ground-truth CSVs, JSON reports, binary scan dumps."""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .geometry import PanoramicScan, SensorIntrinsics
from .metrics import AxisStats, ErrorReport
from .scene import GroundTruthSample
from .tracker import PoseEstimate, Trajectory

TRAJECTORY_HEADER = "t,x,y,z,vx,vy,vz,source,cluster_count"
GROUND_TRUTH_HEADER = "t,x,y,z,vx,vy,vz"

SCAN_MAGIC = b"PANO"
SCAN_VERSION = 1
# magic, version, rows, cols, frame index: 16 bytes
_SCAN_HEADER = struct.Struct("<4sHHII")
_PIXEL = np.dtype([("range", "<f4"), ("signal", "<f4"), ("valid", "u1")])


def _f(v: float) -> str:
    s = f"{float(v):.6f}"
    return "0.000000" if s == "-0.000000" else s


def _write_lines(path, lines: Iterable[str]) -> None:
    with open(path, "w", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")


def write_trajectory_csv(traj: Trajectory, path) -> None:
    rows = [TRAJECTORY_HEADER]
    for s in traj.samples:
        nums = [s.t, *s.position, *s.velocity]
        rows.append(",".join(_f(v) for v in nums) + f",{s.source},{int(s.cluster_count)}")
    _write_lines(path, rows)


def read_trajectory_csv(path, meta: dict | None = None) -> Trajectory:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != TRAJECTORY_HEADER:
        raise ValueError(f"{path}: expected header {TRAJECTORY_HEADER!r}")
    samples = []
    for k, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 9:
            raise ValueError(f"{path}:{k}: expected 9 fields, got {len(parts)}")
        v = [float(x) for x in parts[:7]]
        samples.append(
            PoseEstimate(v[0], np.array(v[1:4]), np.array(v[4:7]), parts[7], int(parts[8]))
        )
    return Trajectory(samples, dict(meta or {}))


def write_ground_truth_csv(gt: Sequence[GroundTruthSample], path) -> None:
    rows = [GROUND_TRUTH_HEADER]
    for g in gt:
        rows.append(",".join(_f(v) for v in (g.t, *g.position, *g.velocity)))
    _write_lines(path, rows)


def read_ground_truth_csv(path) -> list[GroundTruthSample]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != GROUND_TRUTH_HEADER:
        raise ValueError(f"{path}: expected header {GROUND_TRUTH_HEADER!r}")
    data = np.array([[float(x) for x in line.split(",")] for line in lines[1:]]).reshape(-1, 7)
    return [GroundTruthSample(float(r[0]), r[1:4].copy(), r[4:7].copy()) for r in data]


def write_json(obj, path) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n")


def report_from_dict(d: dict) -> ErrorReport:
    def stats(x):
        return AxisStats(x["mean"], x["rmse"], x["max"], tuple(x["quartiles"]))

    return ErrorReport(
        per_axis={k: stats(v) for k, v in d["per_axis"].items()},
        total=stats(d["total"]),
        velocity_per_axis={k: stats(v) for k, v in d["velocity_per_axis"].items()},
        n_paired=d["n_paired"],
        n_unpaired=d["n_unpaired"],
        measured_fraction=d["measured_fraction"],
        detectable_distance=d["detectable_distance"],
        max_truth_range=d["max_truth_range"],
        mode=d.get("mode", ""),
        fps=d.get("fps"),
    )


def scan_filename(frame_index: int) -> str:
    return f"scan_{frame_index:06d}.bin"


def write_scan(scan: PanoramicScan, path) -> None:
    """One frame: 16-byte header, then row-major (range f32, signal f32, valid u8) pixels."""
    rows, cols = scan.range_image.shape
    px = np.empty(rows * cols, dtype=_PIXEL)
    px["range"] = scan.range_image.ravel()
    px["signal"] = scan.signal.ravel()
    px["valid"] = scan.valid.ravel()
    with open(path, "wb") as fh:
        fh.write(_SCAN_HEADER.pack(SCAN_MAGIC, SCAN_VERSION, rows, cols, scan.frame_index))
        fh.write(px.tobytes())


def write_scans(scans: Iterable[PanoramicScan], out_dir) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = 0
    for scan in scans:
        write_scan(scan, out / scan_filename(scan.frame_index))
        n += 1
    return n


def read_scan(path, intr: SensorIntrinsics) -> PanoramicScan:
    """Inverse of :func:`write_scan`; the timestamp is ``frame_index / frame_rate``."""
    buf = Path(path).read_bytes()
    if len(buf) < _SCAN_HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, rows, cols, frame = _SCAN_HEADER.unpack_from(buf)
    if magic != SCAN_MAGIC or version != SCAN_VERSION:
        raise ValueError(f"{path}: not a version {SCAN_VERSION} scan dump")
    if (rows, cols) != (intr.rows, intr.cols):
        raise ValueError(f"{path}: frame is {rows}x{cols}, sensor is {intr.rows}x{intr.cols}")
    body = buf[_SCAN_HEADER.size:]
    if len(body) != rows * cols * _PIXEL.itemsize:
        raise ValueError(f"{path}: expected {rows * cols} pixels")
    px = np.frombuffer(body, dtype=_PIXEL).reshape(rows, cols)
    return PanoramicScan(
        px["range"].copy(),
        px["signal"].copy(),
        px["valid"].astype(bool),
        frame / intr.frame_rate,
        int(frame),
        intr,
    )


def read_scans(scan_dir, intr: SensorIntrinsics) -> Iterator[PanoramicScan]:
    for path in sorted(Path(scan_dir).glob("scan_*.bin")):
        yield read_scan(path, intr)
