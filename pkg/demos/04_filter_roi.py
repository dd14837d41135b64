"""
How the search window grows
===========================

The constant-velocity filter predicts where the UAV should appear.  Each
missed frame inflates the search window until it hits a clamp.
"""

from __future__ import annotations

import numpy as np

from panotrack.geometry import SensorIntrinsics
from panotrack.kf import KfParams, TrackState, predict, predicted_roi

intr = SensorIntrinsics()
params = KfParams()
s = TrackState(np.array([3.0, 0.5, 0.2, 0.6, 0.0, 0.0]), np.eye(6) * 0.01, 0.0)

for misses in range(8):
    s = predict(s, 0.1, params)
    s = TrackState(s.x, s.P, s.t, misses)
    roi = predicted_roi(s, intr, params)
    print("misses %d  rows %3d  cols %4d" % (misses, roi.n_rows, roi.col_len))
