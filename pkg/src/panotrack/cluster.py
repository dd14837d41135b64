"""Ground removal, DBSCAN clustering and UAV cluster selection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree


@dataclass(frozen=True)
class GroundParams:
    method: Literal["z_threshold", "plane_ransac"] = "z_threshold"
    z_cut: float = -0.85
    ransac_iters: int = 100
    inlier_tol: float = 0.05
    max_tilt_deg: float = 20.0
    min_inliers: int = 10

    def __post_init__(self):
        if self.method not in ("z_threshold", "plane_ransac"):
            raise ValueError(f"unknown ground method {self.method!r}")
        if self.ransac_iters < 1 or self.inlier_tol <= 0 or self.min_inliers < 3:
            raise ValueError("ransac_iters >= 1, inlier_tol > 0 and min_inliers >= 3 required")


@dataclass(frozen=True)
class AssocParams:
    max_count_ratio_dev: float = 0.6
    max_range_dev: float = 0.8

    def __post_init__(self):
        if self.max_count_ratio_dev <= 0 or self.max_range_dev <= 0:
            raise ValueError("association tolerances must be positive")


@dataclass(frozen=True)
class ClusterParams:
    eps: float = 0.35
    min_pts: int = 3
    ground: GroundParams = field(default_factory=GroundParams)
    assoc: AssocParams = field(default_factory=AssocParams)

    def __post_init__(self):
        if self.eps <= 0 or self.min_pts < 1:
            raise ValueError("eps must be positive and min_pts >= 1")


@dataclass(frozen=True)
class Cluster:
    indices: np.ndarray
    centroid: np.ndarray
    count: int
    range: float

    @classmethod
    def from_members(cls, points: np.ndarray, indices: np.ndarray) -> "Cluster":
        centroid = points[indices].mean(axis=0)
        return cls(indices, centroid, int(indices.size), float(np.linalg.norm(centroid)))


@dataclass(frozen=True)
class SelectionOutcome:
    cluster: Optional[Cluster]

    @property
    def flag(self) -> int:
        return int(self.cluster is not None)


def _ransac_plane_inliers(points: np.ndarray, g: GroundParams) -> np.ndarray:
    n = len(points)
    best = np.zeros(n, dtype=bool)
    if n < 3:
        return best
    rng = np.random.default_rng(0)
    cos_tilt = np.cos(np.deg2rad(g.max_tilt_deg))
    for _ in range(g.ransac_iters):
        a, b, c = points[rng.choice(n, 3, replace=False)]
        normal = np.cross(b - a, c - a)
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            continue
        normal /= norm
        if abs(normal[2]) < cos_tilt:
            continue
        inl = np.abs((points - a) @ normal) <= g.inlier_tol
        if inl.sum() > best.sum():
            best = inl
    if best.sum() < g.min_inliers:
        return np.zeros(n, dtype=bool)
    return best


def ground_mask(points: np.ndarray, g: GroundParams) -> np.ndarray:
    """True for points classified as ground."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if g.method == "z_threshold":
        return points[:, 2] <= g.z_cut
    return _ransac_plane_inliers(points, g)


def ground_removal(points: np.ndarray, params: ClusterParams) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return points[~ground_mask(points, params.ground)]


def _voxel_cells(points: np.ndarray, eps: float) -> np.ndarray:
    """Voxel id per point; any two points sharing a voxel lie within eps."""
    side = eps / np.sqrt(3.0) * (1.0 - 1e-9)
    _, cell = np.unique(np.floor(points / side).astype(np.int64), axis=0, return_inverse=True)
    return cell.ravel()


def _core_components(cell, core, i, j) -> np.ndarray:
    """Component id per point of the core-core eps graph (non-core entries arbitrary).

    Core points sharing a voxel are always neighbors, so edges collapse to
    voxel pairs before the graph search.
    """
    n_cell = int(cell.max()) + 1
    if core.all():
        ci, cj = cell[i], cell[j]
    else:
        both = core[i] & core[j]
        ci, cj = cell[i[both]], cell[j[both]]
    link = ci * n_cell + cj
    if n_cell * n_cell <= 1 << 22:
        seen = np.zeros(n_cell * n_cell, dtype=bool)
        seen[link] = True
        link = np.flatnonzero(seen)
    else:
        link = np.unique(link)
    # self links (same voxel) are harmless for the component search
    graph = coo_matrix(
        (np.ones(link.size), (link // n_cell, link % n_cell)), shape=(n_cell, n_cell)
    )
    _, cell_comp = connected_components(graph, directed=False)
    return cell_comp[cell]


def dbscan(points: np.ndarray, eps: float, min_pts: int) -> list[Cluster]:
    """Density clustering; noise is dropped.

    Clusters are ordered by their lowest-index core point, and a border
    point reachable from several clusters joins the earliest of them, which
    is what a sequential index-order scan produces.
    """
    if eps <= 0 or min_pts < 1:
        raise ValueError("eps must be positive and min_pts >= 1")
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(points)
    if n == 0:
        return []
    tree = cKDTree(points)
    pairs = tree.query_pairs(eps, output_type="ndarray")
    i, j = (pairs[:, 0], pairs[:, 1]) if len(pairs) else (np.empty(0, int), np.empty(0, int))
    cell = _voxel_cells(points, eps)
    # a voxel holding min_pts points makes all of them core; count the rest
    core = np.bincount(cell)[cell] >= min_pts
    sparse = np.flatnonzero(~core)
    if sparse.size:
        degree = tree.query_ball_point(points[sparse], eps, return_length=True)
        core[sparse] = degree >= min_pts
    if not core.any():
        return []

    comp = _core_components(cell, core, i, j)
    core_idx = np.nonzero(core)[0]
    # rank components by their first core point (core_idx is ascending)
    comps, first = np.unique(comp[core_idx], return_index=True)
    order = comps[np.argsort(first, kind="stable")]
    rank = np.full(comp.max() + 1, -1)
    rank[order] = np.arange(len(order))

    label = np.full(n, -1)
    label[core_idx] = rank[comp[core_idx]]
    if sparse.size:
        big = len(order)
        border_rank = np.full(n, big)
        for a, b in ((i, j), (j, i)):
            m = core[a] & ~core[b]
            np.minimum.at(border_rank, b[m], rank[comp[a[m]]])
        border = ~core & (border_rank < big)
        label[border] = border_rank[border]

    clusters = []
    for r in range(len(order)):
        members = np.nonzero(label == r)[0]
        clusters.append(Cluster.from_members(points, members))
    return clusters


def select_cluster(
    clusters: list[Cluster], prev_count: int, prev_range: float, assoc: AssocParams
) -> SelectionOutcome:
    """Pick the cluster matching the previous UAV by point count, then range."""
    if prev_count < 1 or prev_range <= 0:
        raise ValueError("previous cluster summary must have count >= 1 and range > 0")
    gated = [
        c for c in clusters
        if abs(c.count - prev_count) / prev_count <= assoc.max_count_ratio_dev
    ]
    if not gated:
        return SelectionOutcome(None)
    best = min(
        gated,
        key=lambda c: (abs(c.range - prev_range), abs(c.count - prev_count), int(c.indices[0])),
    )
    if abs(best.range - prev_range) <= assoc.max_range_dev:
        return SelectionOutcome(best)
    return SelectionOutcome(None)


def extract_object(
    points: np.ndarray, prev_count: int, prev_range: float, params: ClusterParams
) -> SelectionOutcome:
    """Ground removal, clustering and selection on an ROI crop."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    keep = ~ground_mask(points, params.ground)
    clusters = dbscan(points[keep], params.eps, params.min_pts)
    outcome = select_cluster(clusters, prev_count, prev_range, params.assoc)
    if outcome.cluster is None:
        return outcome
    # re-express member indices against the caller's point array
    orig = np.nonzero(keep)[0]
    c = outcome.cluster
    return SelectionOutcome(Cluster(orig[c.indices], c.centroid, c.count, c.range))
