"""
A single panoramic scan
=======================

Render one frame of the bundled spiral scenario and look at what the
sensor sees: an organized range image, a signal image and a validity mask.
"""

from __future__ import annotations

import numpy as np

from panotrack.geometry import project, unproject
from panotrack.scenario import iter_scans, load_bundled

sc = load_bundled("spiral_8m")
# frame 100 puts the UAV a few meters out
scan = list(iter_scans(sc, 101))[-1]
print("image shape:", scan.range_image.shape)
print("valid returns:", int(scan.valid.sum()))

# where the UAV sits in the image
truth = scan.truth
print("UAV center:", np.round(truth.position, 3), "range %.2f m" % truth.range)
print("truth ROI:", truth.roi)

# project then unproject at the same range lands on the bin center,
# so the round trip is off by at most half a pixel's angular width
px = project(truth.position, sc.sensor)
back = unproject(px, truth.range, sc.sensor)
print("pixel:", tuple(px), " bin-center offset %.3f m" % np.linalg.norm(back - truth.position))

# the brightest rows: the UAV is a small patch of strong returns
rows = scan.signal.max(axis=1)
print("row with strongest signal:", int(rows.argmax()))
