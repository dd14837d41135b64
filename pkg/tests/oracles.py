"""Brute-force reference implementations used as test oracles.

Each one is written for clarity, not speed, and shares no code with the
library beyond plain data types.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np


def dbscan_bfs(points, eps: float, min_pts: int) -> list[set[int]]:
    """Textbook DBSCAN: O(n^2) neighbor lists, BFS over core points in index order.

    A border point joins the first cluster that reaches it, and clusters are
    started from unvisited core points in ascending index order.
    """
    pts = [tuple(float(v) for v in p) for p in np.asarray(points).reshape(-1, 3)]
    n = len(pts)
    nbrs = []
    for a in range(n):
        row = [b for b in range(n) if b != a and math.dist(pts[a], pts[b]) <= eps]
        nbrs.append(row)
    core = [len(nbrs[a]) + 1 >= min_pts for a in range(n)]
    label = [-1] * n
    clusters: list[set[int]] = []
    for seed in range(n):
        if not core[seed] or label[seed] != -1:
            continue
        cid = len(clusters)
        members = {seed}
        label[seed] = cid
        queue = deque([seed])
        while queue:
            a = queue.popleft()
            for b in nbrs[a]:
                if label[b] != -1:
                    continue
                label[b] = cid
                members.add(b)
                if core[b]:
                    queue.append(b)
        clusters.append(members)
    return clusters


def nearest_pairs(est_t, gt_t, max_dt: float) -> list[int]:
    """Exhaustive nearest-time search; ties go to the earlier truth sample."""
    out = []
    for te in est_t:
        best, best_d = -1, math.inf
        for k, tg in enumerate(gt_t):
            d = abs(te - tg)
            if d < best_d:
                best, best_d = k, d
        out.append(best if best_d <= max_dt else -1)
    return out


def ape_brute(est_t, est_p, gt_t, gt_p, max_dt: float) -> dict:
    """Per-axis absolute error and total norm statistics from explicit loops."""
    idx = nearest_pairs(est_t, gt_t, max_dt)
    axis_err = [[], [], []]
    total = []
    for i, k in enumerate(idx):
        if k < 0:
            continue
        d = [est_p[i][a] - gt_p[k][a] for a in range(3)]
        for a in range(3):
            axis_err[a].append(abs(d[a]))
        total.append(math.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2))

    def stats(v):
        return {
            "mean": sum(v) / len(v),
            "rmse": math.sqrt(sum(e * e for e in v) / len(v)),
            "max": max(v),
        }

    return {
        "axes": [stats(v) for v in axis_err],
        "total": stats(total),
        "n_paired": len(total),
        "n_unpaired": len(idx) - len(total),
    }


def roi_pixels_brute(scan, row_min, row_max, col_start, col_len) -> set[tuple[int, int]]:
    """Valid pixels inside the (possibly wrapping) ROI, by scanning every pixel."""
    rows, cols = scan.valid.shape
    covered = {(col_start + k) % cols for k in range(col_len)}
    out = set()
    for r in range(rows):
        if not row_min <= r <= row_max:
            continue
        for c in range(cols):
            if c in covered and scan.valid[r, c]:
                out.add((r, c))
    return out


def components_wrapped(mask) -> list[set[tuple[int, int]]]:
    """8-connected components on a cylinder (columns wrap), by flood fill."""
    mask = np.asarray(mask, dtype=bool)
    rows, cols = mask.shape
    seen = np.zeros_like(mask)
    comps = []
    for r0 in range(rows):
        for c0 in range(cols):
            if not mask[r0, c0] or seen[r0, c0]:
                continue
            comp = set()
            stack = [(r0, c0)]
            seen[r0, c0] = True
            while stack:
                r, c = stack.pop()
                comp.add((r, c))
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        rr, cc = r + dr, (c + dc) % cols
                        if 0 <= rr < rows and mask[rr, cc] and not seen[rr, cc]:
                            seen[rr, cc] = True
                            stack.append((rr, cc))
            comps.append(comp)
    return comps


def kf_scalar_update(prior_mean: float, prior_var: float, z: float, meas_var: float):
    """One-dimensional Kalman update: (gain, posterior mean, posterior variance)."""
    k = prior_var / (prior_var + meas_var)
    return k, prior_mean + k * (z - prior_mean), (1 - k) * prior_var


def cv_predict_dense(x, P, dt: float, q: float):
    """Constant-velocity prediction with explicitly written F and Q."""
    F = [[1.0 if i == j else 0.0 for j in range(6)] for i in range(6)]
    for i in range(3):
        F[i][i + 3] = dt
    Q = [[0.0] * 6 for _ in range(6)]
    for i in range(3):
        Q[i][i] = dt**4 / 4 * q * q
        Q[i][i + 3] = Q[i + 3][i] = dt**3 / 2 * q * q
        Q[i + 3][i + 3] = dt**2 * q * q
    F = np.array(F)
    return F @ np.asarray(x), F @ np.asarray(P) @ F.T + np.array(Q)


def dilate_wrapped(mask, d: int):
    """Square dilation by explicit neighborhood scan (columns wrap)."""
    mask = np.asarray(mask, dtype=bool)
    rows, cols = mask.shape
    out = np.zeros_like(mask)
    for r, c in zip(*np.nonzero(mask)):
        for dr in range(-d, d + 1):
            for dc in range(-d, d + 1):
                if 0 <= r + dr < rows:
                    out[r + dr, (c + dc) % cols] = True
    return out
