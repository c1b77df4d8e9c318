"""
Batch evaluation from files
===========================

Writes a few label volumes to disk, evaluates them with the command line
front end and reads back the aggregate block.
"""

import json
import tempfile
from pathlib import Path

import numpy as np
from scipy import ndimage

from mme_eval import LabelVolume, Spacing
from mme_eval.cli import main
from mme_eval.io import write_fixture

rng = np.random.default_rng(0)
work = Path(tempfile.mkdtemp())
(work / "gt").mkdir()
(work / "pred").mkdir()

x, y, z = np.ogrid[:32, :32, :12]
for i in range(3):
    labels = np.zeros((32, 32, 12), dtype=int)
    for _ in range(3):
        c = rng.uniform([6, 6, 3], [26, 26, 9])
        labels[((x - c[0]) / 4) ** 2 + ((y - c[1]) / 4) ** 2 + ((z - c[2]) / 2) ** 2 <= 1] = 1
    # predictions: a dilated copy with one segment dropped
    pred = ndimage.binary_dilation(labels == 1)
    first = ndimage.label(pred)[0] == 1
    pred[first] = False
    spacing = Spacing(0.7, 0.7, 3.0)
    write_fixture(LabelVolume(labels, spacing), work / "gt" / f"case{i}.txt")
    write_fixture(LabelVolume(pred.astype(int), spacing), work / "pred" / f"case{i}.txt")

# same as: mme-eval evaluate --gt gt/ --pred pred/ --out report.json
code = main(["evaluate", "--gt", str(work / "gt"), "--pred", str(work / "pred"),
             "--tau", "1,5", "--out", str(work / "report.json")])
print("exit code", code)

report = json.loads((work / "report.json").read_text())
block = report["aggregate"]["classes"]["1"]
print("images:", block["n"])
for prop, stats in block["mme"].items():
    r = stats["recall"]
    print(f"  {prop} recall {r['mean']:.3f} +/- {r['std']:.3f}")
print("  dice", block["baseline"]["dice"]["mean"])

# a CSV table of the same run
main(["evaluate", "--gt", str(work / "gt"), "--pred", str(work / "pred"), "--out", str(work / "report.csv")])
print((work / "report.csv").read_text().splitlines()[0])
