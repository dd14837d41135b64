from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import roi_pixels_brute
from panotrack.geometry import (
    ImageRoi,
    PanoramicScan,
    PixelCoord,
    SensorIntrinsics,
    covering_interval,
    project,
    project_points,
    roi_to_points,
    unproject,
)
from panotrack.scene import (
    GroundTruthSample,
    NoiseSpec,
    SceneSpec,
    frame_rng,
    render_scan,
    uav_point_count_model,
)

INTR = SensorIntrinsics()


def random_envelope_points(rng, n, intr=INTR):
    half = intr.fov_vertical / 2
    elev = rng.uniform(-half * 0.999, half * 0.999, n)
    azim = rng.uniform(0, 2 * np.pi, n)
    r = rng.uniform(intr.min_range + 0.01, intr.max_range - 0.01, n)
    ce = np.cos(elev)
    return np.stack([r * ce * np.cos(azim), r * ce * np.sin(azim), r * np.sin(elev)], axis=1)


def random_scan(seed, valid_frac=0.3, intr=INTR):
    rng = np.random.default_rng(seed)
    valid = rng.random((intr.rows, intr.cols)) < valid_frac
    rng_img = np.where(valid, rng.uniform(1, 20, valid.shape), 0).astype(np.float32)
    return PanoramicScan(rng_img, np.zeros_like(rng_img), valid, 0.0, 0, intr)


def test_forward_and_quarter_turn_pixels():
    assert project((1, 0, 0), INTR) == PixelCoord(64, 0)
    assert project((0, 1, 0), INTR) == PixelCoord(64, 256)


def test_zenith_is_outside_the_vertical_fov():
    assert project((0, 0, 1), INTR) is None


def test_range_envelope():
    assert project((0.1, 0, 0), INTR) is None
    assert project((60, 0, 0), INTR) is None


def test_unproject_forward_bin():
    p = unproject(PixelCoord(64, 0), 5.0, INTR)
    # bin center sits half a bin off the axis in both angles
    assert np.linalg.norm(p - [5, 0, 0]) < 5 * max(INTR.col_res, INTR.row_res)
    assert p[0] > 4.99


def test_unproject_top_left_bin_center():
    p = unproject(PixelCoord(0, 0), 2.0, INTR)
    elev = np.arcsin(p[2] / 2.0)
    azim = np.arctan2(p[1], p[0])
    assert elev == pytest.approx(INTR.fov_vertical / 2 - INTR.row_res / 2, abs=1e-12)
    assert azim == pytest.approx(INTR.col_res / 2, abs=1e-12)
    assert np.linalg.norm(p) == pytest.approx(2.0)


@pytest.mark.parametrize("px,r", [((128, 0), 1.0), ((0, 1024), 1.0), ((-1, 0), 1.0), ((5, 5), 0.0)])
def test_unproject_rejects_bad_arguments(px, r):
    with pytest.raises(ValueError):
        unproject(PixelCoord(*px), r, INTR)


def test_round_trip_10k_points():
    rng = np.random.default_rng(7)
    pts = random_envelope_points(rng, 10_000)
    rows, cols, ok = project_points(pts, INTR)
    assert ok.all()
    for p, r, c in zip(pts[:10_000], rows, cols):
        q = unproject(PixelCoord(int(r), int(c)), float(np.linalg.norm(p)), INTR)
        assert project(q, INTR) == (r, c)
        # angular deviation bounded by half a bin per axis
        d_az = np.angle(np.exp(1j * (np.arctan2(q[1], q[0]) - np.arctan2(p[1], p[0]))))
        d_el = np.arcsin(q[2] / np.linalg.norm(q)) - np.arcsin(p[2] / np.linalg.norm(p))
        assert abs(d_az) <= INTR.col_res / 2 + 1e-12
        assert abs(d_el) <= INTR.row_res / 2 + 1e-12


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-1.0, 1.0),
    st.floats(0, 2 * np.pi, exclude_max=True),
    st.floats(0.5, 40.0),
)
def test_project_is_deterministic_and_in_bounds(el_frac, azim, r):
    elev = el_frac * INTR.fov_vertical / 2 * 0.999
    p = r * np.array([np.cos(elev) * np.cos(azim), np.cos(elev) * np.sin(azim), np.sin(elev)])
    a, b = project(p, INTR), project(p.copy(), INTR)
    assert a == b
    assert 0 <= a.row < INTR.rows and 0 <= a.col < INTR.cols


def test_full_roi_returns_every_valid_point():
    scan = random_scan(0)
    sub = roi_to_points(scan, ImageRoi.full(INTR))
    assert len(sub) == int(scan.valid.sum())


def test_roi_over_invalid_pixels_is_empty():
    scan = random_scan(1)
    valid = scan.valid.copy()
    valid[10:20, 100:150] = False
    scan = PanoramicScan(scan.range_image, scan.signal, valid, 0.0, 0, INTR)
    sub = roi_to_points(scan, ImageRoi(10, 19, 100, 50))
    assert len(sub) == 0 and sub.points.shape == (0, 3)


def test_roi_to_points_matches_brute_force_on_50_rois():
    scan = random_scan(2, valid_frac=0.2)
    rng = np.random.default_rng(3)
    n_wrap = 0
    for k in range(50):
        r0 = int(rng.integers(0, INTR.rows))
        r1 = int(rng.integers(r0, INTR.rows))
        length = int(rng.integers(1, 200))
        # every other ROI is forced across the seam
        start = int(rng.integers(INTR.cols - length + 1, INTR.cols)) if k % 2 and length > 1 else int(
            rng.integers(0, INTR.cols)
        )
        roi = ImageRoi(r0, r1, start, length)
        n_wrap += roi.wraps(INTR.cols)
        sub = roi_to_points(scan, roi)
        got = {tuple(p) for p in sub.pixels.tolist()}
        assert got == roi_pixels_brute(scan, r0, r1, start, length)
        assert len(got) == len(sub)
        # each point is the stored range along its own pixel ray
        for (r, c), p in zip(sub.pixels[:20], sub.points[:20]):
            assert np.linalg.norm(p) == pytest.approx(scan.range_image[r, c], rel=1e-6)
    assert n_wrap >= 10


def test_seam_roi_keeps_target_near_column_five():
    scene = SceneSpec(ground_z=-1.0, noise=NoiseSpec(0.0, 0.0))
    az = 5.5 * INTR.col_res
    pos = np.array([3 * np.cos(az), 3 * np.sin(az), 0.0])
    scan = render_scan(scene, GroundTruthSample(0.0, pos, np.zeros(3)), INTR, frame_rng(0, 0))
    roi = ImageRoi(0, INTR.rows - 1, 1000, 65)  # cols 1000..1023 and 0..40
    sub = roi_to_points(scan, roi)
    expected = roi_pixels_brute(scan, 0, INTR.rows - 1, 1000, 65)
    assert {tuple(p) for p in sub.pixels.tolist()} == expected
    near = np.linalg.norm(sub.points - pos, axis=1) < 0.4
    target = scan.truth.roi
    # the silhouette itself straddles the seam
    assert target is not None and target.wraps(INTR.cols)
    # no noise: every UAV return is kept and sits inside the silhouette box
    assert near.sum() == uav_point_count_model(3.0)
    assert target.contains(sub.pixels[near, 0], sub.pixels[near, 1], INTR.cols).all()


def test_covering_interval_prefers_the_short_way_round():
    assert covering_interval([1022, 1023, 0, 1], 1024) == (1022, 4)
    assert covering_interval([5], 1024) == (5, 1)
    assert covering_interval([10, 20], 1024) == (10, 11)


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        SensorIntrinsics(fov_vertical=4.0)
    with pytest.raises(ValueError):
        SensorIntrinsics(min_range=10, max_range=5)
    with pytest.raises(ValueError):
        ImageRoi(0, 200, 0, 4).validate(INTR)
