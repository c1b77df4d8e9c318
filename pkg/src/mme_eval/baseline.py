"""Voxel-wise overlap scores and surface distances used for comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .geometry import _bits, _spacing, hausdorff_from, nsd_from, surface_distances
from .mme import PRF, PropertyCounts, prf
from .volume import BinaryMask, IncompatibleGridsError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(G, S) -> ConfusionCounts:
    g, s = _bits(G), _bits(S)
    if g.shape != s.shape:
        raise IncompatibleGridsError(f"grid dims differ: {g.shape} vs {s.shape}")
    tp = int(np.count_nonzero(g & s))
    fp = int(np.count_nonzero(~g & s))
    fn = int(np.count_nonzero(g & ~s))
    return ConfusionCounts(tp, fp, fn, g.size - tp - fp - fn)


def dice(c: ConfusionCounts) -> float:
    den = 2 * c.tp + c.fp + c.fn
    return 2 * c.tp / den if den else 1.0


def iou(c: ConfusionCounts) -> float:
    den = c.tp + c.fp + c.fn
    return c.tp / den if den else 1.0


def accuracy(c: ConfusionCounts) -> float:
    return (c.tp + c.tn) / c.total if c.total else 1.0


def prf_voxel(c: ConfusionCounts, beta: float = 1.0) -> PRF:
    return prf(PropertyCounts(c.tp, c.fp, c.fn), beta)


def volume_similarity(c: ConfusionCounts) -> float:
    """``1 - |fn - fp| / (2 tp + fp + fn)``; compares sizes only, not placement."""
    den = 2 * c.tp + c.fp + c.fn
    return 1.0 - abs(c.fn - c.fp) / den if den else 1.0


def miou(per_class_iou: Sequence[float]) -> float:
    values = list(per_class_iou)
    if not values:
        raise ValueError("miou of an empty sequence")
    return math.fsum(values) / len(values)


def fwiou(per_class_iou: Sequence[float], class_frequencies: Sequence[float]) -> float:
    values, weights = list(per_class_iou), list(class_frequencies)
    if not values or len(values) != len(weights):
        raise ValueError("need one frequency per class and at least one class")
    if not math.isclose(math.fsum(weights), 1.0, abs_tol=1e-9):
        raise ValueError("class frequencies must sum to 1")
    return math.fsum(v * w for v, w in zip(values, weights))


@dataclass(frozen=True)
class BaselineReport:
    accuracy: float
    precision: float
    recall: float
    fbeta: float
    dice: float
    iou: float
    volume_similarity: float
    hd_avg: Optional[float] = None
    hd_p95: Optional[float] = None
    hd_max: Optional[float] = None
    nsd: Mapping[float, Optional[float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in SCALAR_FIELDS}
        out["nsd"] = {_tau_key(t): v for t, v in self.nsd.items()}
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "BaselineReport":
        kwargs = {k: data.get(k) for k in SCALAR_FIELDS}
        kwargs["nsd"] = {float(t): v for t, v in data.get("nsd", {}).items()}
        return cls(**kwargs)


SCALAR_FIELDS = (
    "accuracy", "precision", "recall", "fbeta", "dice", "iou", "volume_similarity",
    "hd_avg", "hd_p95", "hd_max",
)


def _tau_key(tau: float) -> str:
    return format(float(tau), "g")


def baseline_report(G, S, taus: Sequence[float] = (1.0, 5.0), beta: float = 1.0, spacing=None) -> BaselineReport:
    """Every comparison metric for one binary mask pair.

    Hausdorff and NSD entries are ``None`` when either mask is empty.
    """
    spacing = _spacing(G, spacing)
    c = confusion(G, S)
    p = prf_voxel(c, beta)
    dists = surface_distances(G, S, spacing)
    hd = hausdorff_from(dists) if dists is not None else None
    return BaselineReport(
        accuracy=accuracy(c),
        precision=p.precision,
        recall=p.recall,
        fbeta=p.fbeta,
        dice=dice(c),
        iou=iou(c),
        volume_similarity=volume_similarity(c),
        hd_avg=hd.avg if hd else None,
        hd_p95=hd.p95 if hd else None,
        hd_max=hd.max if hd else None,
        nsd={float(t): nsd_from(dists, t) if dists is not None else None for t in taus},
    )


def class_baselines(gt, pred, class_id: int, taus=(1.0, 5.0), beta: float = 1.0) -> BaselineReport:
    """One-vs-rest baselines for ``class_id`` of two label volumes."""
    g = BinaryMask(gt.labels == class_id, gt.spacing)
    s = BinaryMask(pred.labels == class_id, pred.spacing)
    return baseline_report(g, s, taus, beta, gt.spacing)
