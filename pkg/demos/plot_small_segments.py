"""
Why voxel overlap hides missed small lesions
============================================

A large segment is predicted perfectly and a tiny one is missed.  Dice
barely moves; the relative-volume recall halves.
"""

import numpy as np

from mme_eval import LabelVolume, Spacing, class_baselines, evaluate_pair

spacing = Spacing(0.8, 0.8, 2.5)
gt = np.zeros((30, 30, 10), dtype=int)
gt[2:12, 2:12, :] = 1        # 1000 voxels
gt[25:27, 25:30, 4] = 1      # 10 voxels
pred = np.zeros_like(gt)
pred[2:12, 2:12, :] = 1

gt, pred = LabelVolume(gt, spacing), LabelVolume(pred, spacing)
mme = evaluate_pair(gt, pred, 1)
base = class_baselines(gt, pred, 1, taus=(1.0, 5.0))

print(f"dice                    {base.dice:.4f}")
print(f"hausdorff max (mm)      {base.hd_max:.2f}")
print(f"nsd at 1 mm / 5 mm      {base.nsd[1.0]:.3f} / {base.nsd[5.0]:.3f}")
print(f"total volume recall     {mme['T'].prf.recall:.4f}")
print(f"relative volume recall  {mme['R'].prf.recall:.4f}")
print(f"detection recall        {mme['D'].prf.recall:.4f}")

# Hausdorff does notice the miss, but only as one large distance; it does
# not say how many segments were lost
