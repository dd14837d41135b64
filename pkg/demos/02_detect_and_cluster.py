"""
From a box to a point cluster
=============================

A detection gives an image box.  The box selects a frustum of points,
the floor is removed, and DBSCAN plus a simple gate pick the UAV.
"""

from __future__ import annotations

import numpy as np

from panotrack.detect import Detector
from panotrack.scenario import iter_scans, load_bundled
from panotrack.tracker import init_track

sc = load_bundled("spiral_8m")
scan = next(iter_scans(sc, 1))
det = Detector(sc.detector, sc.seed)

detection = det(scan)
print("detection:", detection)

state = init_track(scan, det, sc.tracker_params())
err = np.linalg.norm(state.kf.position - scan.truth.position)
print("initial estimate:", np.round(state.kf.position, 3))
print("error vs truth: %.3f m" % err)
print("cluster size:", state.prev_cluster.count)
