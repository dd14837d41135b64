from __future__ import annotations

import numpy as np
import pytest

from oracles import ape_brute, nearest_pairs
from panotrack.metrics import (
    AxisStats,
    ErrorReport,
    NoPairsError,
    align_trajectory,
    compare_methods,
    compute_ape,
    declared_loss_range,
    pair_nearest,
)
from panotrack.scene import GroundTruthSample
from panotrack.tracker import PoseEstimate, Trajectory


def truth(n=101, rate=100.0, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(n) / rate
    p = np.cumsum(rng.normal(0, 0.01, (n, 3)), axis=0) + [2, 0, 0]
    v = rng.normal(0, 0.5, (n, 3))
    return [GroundTruthSample(float(a), b, c) for a, b, c in zip(t, p, v)]


def traj(ts, ps, vs=None, sources=None, mode="fused"):
    vs = np.zeros((len(ts), 3)) if vs is None else vs
    sources = sources or ["measured"] * len(ts)
    samples = [
        PoseEstimate(float(t), np.asarray(p, float), np.asarray(v, float), s)
        for t, p, v, s in zip(ts, ps, vs, sources)
    ]
    return Trajectory(samples, {"mode": mode})


def report(mean, rmse, dist, mode):
    s = AxisStats(mean, rmse, rmse, (mean, mean, mean))
    return ErrorReport({a: s for a in "xyz"}, s, {a: s for a in "xyz"}, 10, 0, 1.0, dist, 8.0, mode)


def test_subsampled_truth_has_zero_error():
    gt = truth()
    sub = gt[::10]
    rep = compute_ape(traj([g.t for g in sub], [g.position for g in sub], [g.velocity for g in sub]), gt)
    assert rep.total.mean == 0 and rep.total.rmse == 0
    assert all(rep.velocity_per_axis[a].max == 0 for a in "xyz")
    assert rep.n_paired == len(sub)


def test_constant_offset():
    gt = truth()
    sub = gt[::10]
    rep = compute_ape(traj([g.t for g in sub], [g.position + [0.1, 0, 0] for g in sub]), gt)
    assert rep.per_axis["x"].mean == pytest.approx(0.1, abs=1e-12)
    assert rep.per_axis["x"].rmse == pytest.approx(0.1, abs=1e-12)
    assert rep.per_axis["y"].mean == 0 and rep.per_axis["z"].rmse == 0
    assert rep.total.mean == pytest.approx(0.1, abs=1e-12)


def test_three_four_five():
    gt = [GroundTruthSample(0.0, np.zeros(3), np.zeros(3))]
    rep = compute_ape(traj([0.0], [[0.03, 0.04, 0.0]]), gt)
    assert rep.total.mean == 0.05


def test_no_pairs_is_an_error():
    gt = truth()
    with pytest.raises(NoPairsError):
        compute_ape(traj([50.0], [[0, 0, 0]]), gt)


def test_pairing_matches_exhaustive_search():
    rng = np.random.default_rng(1)
    for _ in range(50):
        gt_t = np.sort(rng.choice(np.arange(0, 10, 0.01), 300, replace=False))
        est_t = rng.uniform(-0.5, 10.5, 100)
        assert pair_nearest(est_t, gt_t, 0.06).tolist() == nearest_pairs(est_t, gt_t, 0.06)


def test_pairing_tie_goes_to_earlier_sample():
    assert pair_nearest([0.5], [0.0, 1.0], 0.6).tolist() == [0]


def test_compute_ape_matches_brute_force_on_100_pairs():
    rng = np.random.default_rng(2)
    for k in range(100):
        gt = truth(int(rng.integers(20, 500)), seed=k)
        gt_t = [g.t for g in gt]
        gt_p = [g.position for g in gt]
        n = int(rng.integers(1, 200))
        est_t = np.sort(rng.uniform(-0.05, gt_t[-1] + 0.2, n))
        est_p = rng.normal(2, 1, (n, 3))
        try:
            rep = compute_ape(traj(est_t, est_p), gt)
        except NoPairsError:
            assert ape_brute(est_t, est_p, gt_t, gt_p, 0.06)["n_paired"] == 0
            continue
        ref = ape_brute(est_t, est_p, gt_t, gt_p, 0.06)
        assert rep.n_paired == ref["n_paired"] and rep.n_unpaired == ref["n_unpaired"]
        for key in ("mean", "rmse", "max"):
            assert abs(getattr(rep.total, key) - ref["total"][key]) <= 1e-12
            for a, axis in enumerate("xyz"):
                assert abs(getattr(rep.per_axis[axis], key) - ref["axes"][a][key]) <= 1e-12


def test_translation_covariance():
    gt = truth()
    rng = np.random.default_rng(3)
    for _ in range(20):
        d = rng.normal(0, 1, 3)
        rep = compute_ape(traj([g.t for g in gt], [g.position + d for g in gt]), gt)
        assert rep.total.mean == pytest.approx(np.linalg.norm(d), abs=1e-12)


def test_detectable_distance_and_measured_fraction():
    gt = [GroundTruthSample(i / 10, np.array([1 + i / 10, 0, 0]), np.zeros(3)) for i in range(40)]
    est_p = [g.position + ([0.0, 0, 0] if i < 20 else [1.0, 0, 0]) for i, g in enumerate(gt)]
    sources = ["measured"] * 20 + ["predicted"] * 20
    rep = compute_ape(traj([g.t for g in gt], est_p, sources=sources), gt)
    assert rep.detectable_distance == pytest.approx(2.9)
    assert rep.measured_fraction == 0.5
    assert rep.max_truth_range == pytest.approx(4.9)
    assert declared_loss_range(traj([g.t for g in gt], est_p, sources=sources), gt, 10) == pytest.approx(3.0)


def test_align_identity_translation_and_yaw():
    t = traj([0.0, 0.1], [[1, 0, 0], [2, 1, 0]], [[1, 0, 0], [0, 1, 0]])
    same = align_trajectory(t, np.eye(4))
    np.testing.assert_array_equal(same.positions, t.positions)
    T = np.eye(4)
    T[:3, 3] = [1, 0, 0]
    moved = align_trajectory(t, T)
    np.testing.assert_allclose(moved.positions, t.positions + [1, 0, 0])
    np.testing.assert_array_equal(moved.velocities, t.velocities)
    Rz = np.eye(4)
    Rz[:2, :2] = [[0, -1], [1, 0]]
    rot = align_trajectory(t, Rz)
    np.testing.assert_allclose(rot.positions[0], [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(rot.velocities[0], [0, 1, 0], atol=1e-15)


def test_align_is_rigid_and_rejects_non_rigid():
    rng = np.random.default_rng(4)
    p = rng.normal(0, 3, (50, 3))
    t = traj(np.arange(50) / 10, p)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.linalg.det(q))
    T = np.eye(4)
    T[:3, :3], T[:3, 3] = q, rng.normal(size=3)
    out = align_trajectory(t, T).positions
    d0 = np.linalg.norm(p[:, None] - p[None], axis=-1)
    d1 = np.linalg.norm(out[:, None] - out[None], axis=-1)
    assert np.abs(d0 - d1).max() <= 1e-9
    S = np.eye(4)
    S[0, 0] = 2
    with pytest.raises(ValueError):
        align_trajectory(t, S)
    M = np.eye(4)
    M[0, 0] = -1
    with pytest.raises(ValueError):
        align_trajectory(t, M)


def test_reference_rows_give_fused_best_on_both():
    reports = {
        "pcd_only": report(0.104, 0.142, 8.0, "pcd_only"),
        "image_only": report(0.078, 0.088, 2.4, "image_only"),
        "fused": report(0.061, 0.067, 8.0, "fused"),
    }
    cmp = compare_methods(reports)
    assert cmp.best_mean == cmp.best_rmse == "fused"
    assert "fused best on both mean and RMSE" in cmp.summary()
    assert "verdict: fused best on both mean and RMSE" in cmp.to_text()
    assert [(v.baseline, v.mean, v.rmse) for v in cmp.verdicts] == [
        ("pcd_only", "better", "better"),
        ("image_only", "better", "better"),
    ]


def test_identical_reports_tie():
    r = report(0.1, 0.12, 8.0, "x")
    cmp = compare_methods({"fused": r, "pcd_only": r, "image_only": r})
    assert cmp.best_mean is None and cmp.best_rmse is None
    assert all(v.mean == v.rmse == "tie" for v in cmp.verdicts)
    assert cmp.summary() == ["tie on mean APE, no winner"]


def test_two_reports_give_one_verdict():
    cmp = compare_methods({"fused": report(0.06, 0.07, 8, "fused"), "pcd_only": report(0.1, 0.14, 8, "pcd_only")})
    assert len(cmp.verdicts) == 1
    with pytest.raises(ValueError):
        compare_methods({"fused": report(0.06, 0.07, 8, "fused")})
