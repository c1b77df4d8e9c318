"""
Spider chart of the five properties
===================================

Renders precision and recall of D, U, B, T and R as two polygons on a
pentagon grid, written as a standalone SVG.
"""

import tempfile
from pathlib import Path

import numpy as np

from mme_eval import LabelVolume, evaluate_pair
from mme_eval.chart import SpiderChartSpec, write_svg

gt = np.zeros((40, 12, 1), dtype=int)
gt[2:6, 3:7] = 1
gt[12:16, 3:7] = 1
gt[24:36, 1:11] = 1
pred = gt.copy()
pred[6:12, 4:6] = 1
pred[16:24, 4:6] = 1

result = evaluate_pair(LabelVolume(gt), LabelVolume(pred), 1)
spec = SpiderChartSpec.from_result(result, title="three spots, one prediction")

out = Path(tempfile.mkdtemp()) / "chart.svg"
write_svg(spec, out)
print("wrote", out)

# the U precision vertex sits at a third of the radius
print("precision:", [f"{v:.3f}" for v in spec.precision])
print("recall:   ", [f"{v:.3f}" for v in spec.recall])
