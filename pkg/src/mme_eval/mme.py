"""Multi-property segment-level evaluation.

Ground-truth segments are paired with the predictions that overlap them
(clusters); predictions touching no ground truth are orphans.  Five
properties are then scored as fractional tp/fp/fn counts:

* ``D`` detection: is each segment hit at all?
* ``U`` uniformity: is it hit by one prediction that covers only it?
* ``B`` boundary alignment: misclassified voxels weighted by a
  shape-normalised distance.
* ``T`` total volume: plain physical overlap.
* ``R`` relative volume: overlap normalised per segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

from .geometry import NormalizedDistanceField, normalized_distance, skeletonize
from .volume import (
    LabelVolume,
    Segment,
    SegmentSet,
    Spacing,
    check_same_grid,
    exact_volume,
    segments_of,
    structuring_element,
)

PROPERTIES = ("D", "U", "B", "T", "R")
PROPERTY_NAMES = {
    "D": "detection",
    "U": "uniformity",
    "B": "boundary alignment",
    "T": "total volume",
    "R": "relative volume",
}
PRF_FIELDS = ("precision", "recall", "fbeta")


@dataclass(frozen=True)
class PropertyCounts:
    """Fractional tp/fp/fn of one property.

    Volume-based properties keep exact :class:`~fractions.Fraction` values so
    that conservation identities such as ``tp + fn == V(GS)`` hold exactly.
    """

    tp: float = 0.0
    fp: float = 0.0
    fn: float = 0.0

    def __post_init__(self):
        for name in ("tp", "fp", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    fbeta: float
    beta: float = 1.0


def _ratio(num: float, den: float, other_error: float) -> float:
    if den > 0:
        return num / den
    return 1.0 if other_error == 0 else 0.0


def prf(counts: PropertyCounts, beta: float = 1.0) -> PRF:
    """Precision, recall and F-beta from fractional counts.

    A 0/0 ratio scores 1 when the complementary error is also zero (nothing
    to find and nothing predicted) and 0 otherwise.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    precision = float(_ratio(tp, tp + fp, fn))
    recall = float(_ratio(tp, tp + fn, fp))
    b2 = beta * beta
    den = b2 * precision + recall
    fbeta = (1 + b2) * recall * precision / den if den > 0 else 0.0
    return PRF(precision, recall, fbeta, beta)


# -- clustering ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Fragment:
    """The part of one prediction assigned to one cluster."""

    prediction_id: int
    indices: np.ndarray
    overlap_count: int

    @property
    def size(self) -> int:
        return int(self.indices.size)


@dataclass(frozen=True, eq=False)
class Cluster:
    ground_truth: Segment
    fragments: tuple = ()

    @property
    def detected(self) -> bool:
        return bool(self.fragments)

    @property
    def overlap_count(self) -> int:
        return sum(f.overlap_count for f in self.fragments)

    @property
    def prediction_count(self) -> int:
        return sum(f.size for f in self.fragments)

    @property
    def prediction_ids(self) -> tuple:
        return tuple(sorted({f.prediction_id for f in self.fragments}))

    def prediction_indices(self) -> np.ndarray:
        if not self.fragments:
            return np.empty(0, dtype=np.int64)
        return np.sort(np.concatenate([f.indices for f in self.fragments]))


@dataclass(frozen=True, eq=False)
class ClusterSet:
    """Clusters (one per ground-truth segment, in id order) and orphans.

    ``correlations`` maps each original prediction id to the ids of the
    ground-truth segments it overlaps.
    """

    clusters: tuple
    orphans: tuple
    correlations: Mapping[int, tuple]
    spacing: Spacing

    def __len__(self):
        return len(self.clusters)

    @property
    def detected(self) -> list:
        return [c for c in self.clusters if c.detected]


def _nearest_ground_truth(residual, gt_ids, GS: SegmentSet, pred: Segment) -> np.ndarray:
    """Index into ``gt_ids`` of the nearest ground truth for each residual voxel."""
    segs = [GS[g] for g in gt_ids]
    idx = np.concatenate([pred.indices] + [s.indices for s in segs])
    coords = np.unravel_index(idx, GS.dims)
    lo = [int(c.min()) for c in coords]
    hi = [int(c.max()) + 1 for c in coords]
    box = tuple(slice(a, b) for a, b in zip(lo, hi))
    # uniform spacing changes must not flip ties, so distances use spacing / min(spacing)
    rel = np.array(GS.spacing.as_tuple()) / min(GS.spacing.as_tuple())
    local = tuple(c - a for c, a in zip(np.unravel_index(residual, GS.dims), lo))
    dists = []
    for seg in segs:
        bits = np.zeros(GS.dims, dtype=bool)
        bits.flat[seg.indices] = True
        field_ = ndimage.distance_transform_edt(~bits[box], sampling=rel)
        dists.append(field_[local])
    # argmin picks the first minimum, i.e. the smallest ground-truth id on ties
    return np.argmin(np.vstack(dists), axis=0)


def cluster(GS: SegmentSet, SS: SegmentSet) -> ClusterSet:
    """Pair every ground-truth segment with the predictions overlapping it.

    A prediction overlapping several ground truths is split: each overlap goes
    to its own cluster and every other voxel to the nearest overlapped ground
    truth (ties to the smallest id).
    """
    check_same_grid(GS, SS)
    gt_flat = GS.label_map.ravel()
    parts: dict[int, list] = {g.id: [] for g in GS}
    orphans = []
    correlations = {}
    for pred in SS:
        hit = gt_flat[pred.indices]
        gt_ids = tuple(int(g) for g in np.unique(hit) if g)
        correlations[pred.id] = gt_ids
        if not gt_ids:
            orphans.append(pred)
            continue
        if len(gt_ids) == 1:
            g = gt_ids[0]
            parts[g].append(Fragment(pred.id, pred.indices, int(np.count_nonzero(hit))))
            continue
        residual = pred.indices[hit == 0]
        owner = _nearest_ground_truth(residual, gt_ids, GS, pred) if residual.size else np.empty(0, int)
        for k, g in enumerate(gt_ids):
            inside = pred.indices[hit == g]
            extra = residual[owner == k]
            parts[g].append(Fragment(pred.id, np.sort(np.concatenate([inside, extra])), int(inside.size)))
    clusters = tuple(Cluster(g, tuple(parts[g.id])) for g in GS)
    return ClusterSet(clusters, tuple(orphans), correlations, GS.spacing)


# -- properties ---------------------------------------------------------------


def detection(clusters: ClusterSet, theta_tp: float = 0.0, theta_fp: float = 1.0) -> PropertyCounts:
    """Segment hit/miss counts with overlap thresholds (strict inequalities)."""
    if theta_tp < 0 or theta_fp < 0:
        raise ValueError("thresholds must be non-negative")
    tp = fp = 0
    for c in clusters.clusters:
        g = c.ground_truth.size
        if Fraction(c.overlap_count, g) > theta_tp:
            tp += 1
        if Fraction(c.prediction_count - c.overlap_count, g) > theta_fp:
            fp += 1
    return PropertyCounts(float(tp), float(fp + len(clusters.orphans)), float(len(clusters) - tp))


def uniformity(clusters: ClusterSet) -> PropertyCounts:
    """Fragmentation (fn) and merging (fp) over detected clusters."""
    tp = fn = fp = 0
    for c in clusters.detected:
        preds = c.prediction_ids
        tp += 1
        fn += len(preds) - 1
        covered = set()
        for p in preds:
            covered.update(clusters.correlations[p])
        fp += len(covered) - 1
    return PropertyCounts(float(tp), float(fp), float(fn))


def boundary_alignment(clusters: ClusterSet, dn_fields: Mapping[int, NormalizedDistanceField]) -> PropertyCounts:
    """Shape-normalised boundary credit, summed over detected clusters.

    ``dn_fields`` maps ground-truth segment id to its normalised distance field.
    """
    tp = fn = fp = 0.0
    for c in clusters.detected:
        gid = c.ground_truth.id
        try:
            dn = dn_fields[gid]
        except KeyError:
            raise RuntimeError(f"no normalized distance field for detected segment {gid}") from None
        g_idx = c.ground_truth.indices
        p_idx = c.prediction_indices()
        hit = np.isin(g_idx, p_idx, assume_unique=True)
        g_vals = dn.values_at(g_idx)
        total = math.fsum(g_vals)
        tp_c = math.fsum(g_vals[hit])
        tp += tp_c / total
        fn += math.fsum(g_vals[~hit]) / total
        false = p_idx[~np.isin(p_idx, g_idx, assume_unique=True)]
        if false.size:
            fp += math.fsum(dn.values_at(false)) / total
    return PropertyCounts(tp, fp, fn)


def total_volume(clusters: ClusterSet, GS: SegmentSet, SS: SegmentSet) -> PropertyCounts:
    """Physical overlap volumes in mm^3 (exact rationals)."""
    spacing = clusters.spacing
    tp = exact_volume(sum(c.overlap_count for c in clusters.clusters), spacing)
    return PropertyCounts(
        tp, exact_volume(SS.total_voxels, spacing) - tp, exact_volume(GS.total_voxels, spacing) - tp
    )


def relative_volume(clusters: ClusterSet) -> PropertyCounts:
    """Overlap normalised per segment; each cluster's fp is capped at 1."""
    tp = fp = Fraction(0)
    for c in clusters.clusters:
        g = c.ground_truth.size
        tp += Fraction(c.overlap_count, g)
        fp += min(Fraction(1), Fraction(c.prediction_count - c.overlap_count, g))
    return PropertyCounts(tp, fp, len(clusters) - tp)


# -- whole-image evaluation ---------------------------------------------------


@dataclass(frozen=True)
class MMEParams:
    theta_tp: float = 0.0
    theta_fp: float = 1.0
    beta: float = 1.0
    connectivity: int = 26

    def __post_init__(self):
        if self.theta_tp < 0 or self.theta_fp < 0:
            raise ValueError("theta_tp and theta_fp must be >= 0")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        structuring_element(self.connectivity)


@dataclass(frozen=True)
class PropertyResult:
    counts: PropertyCounts
    prf: PRF


@dataclass(frozen=True)
class MMEResult:
    properties: Mapping[str, PropertyResult]
    params: MMEParams = field(default_factory=MMEParams)

    def __getitem__(self, prop: str) -> PropertyResult:
        return self.properties[prop]

    def to_dict(self) -> dict:
        return {
            "params": {
                "theta_tp": self.params.theta_tp,
                "theta_fp": self.params.theta_fp,
                "beta": self.params.beta,
                "connectivity": self.params.connectivity,
            },
            "properties": {
                p: {
                    "tp": float(r.counts.tp),
                    "fp": float(r.counts.fp),
                    "fn": float(r.counts.fn),
                    "precision": r.prf.precision,
                    "recall": r.prf.recall,
                    "fbeta": r.prf.fbeta,
                }
                for p, r in self.properties.items()
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "MMEResult":
        params = MMEParams(**data["params"])
        props = {
            p: PropertyResult(
                PropertyCounts(v["tp"], v["fp"], v["fn"]),
                PRF(v["precision"], v["recall"], v["fbeta"], params.beta),
            )
            for p, v in data["properties"].items()
        }
        return cls(props, params)


def dn_fields_for(clusters: ClusterSet) -> dict:
    """Normalised distance fields for every detected ground truth.

    Each field is computed on a box covering the segment and its cluster's
    predictions; distances there equal the full-grid ones because every seed
    lies inside the segment.
    """
    fields = {}
    for c in clusters.detected:
        G = c.ground_truth
        idx = np.concatenate([G.indices, c.prediction_indices()])
        coords = np.unravel_index(idx, G.dims)
        region = tuple(
            slice(max(int(x.min()) - 1, 0), min(int(x.max()) + 2, n)) for x, n in zip(coords, G.dims)
        )
        fields[G.id] = normalized_distance(G, skeletonize(G, clusters.spacing), clusters.spacing, region)
    return fields


def score_clusters(clusters: ClusterSet, GS: SegmentSet, SS: SegmentSet, params: MMEParams) -> MMEResult:
    counts = {
        "D": detection(clusters, params.theta_tp, params.theta_fp),
        "U": uniformity(clusters),
        "B": boundary_alignment(clusters, dn_fields_for(clusters)),
        "T": total_volume(clusters, GS, SS),
        "R": relative_volume(clusters),
    }
    return MMEResult({p: PropertyResult(c, prf(c, params.beta)) for p, c in counts.items()}, params)


def evaluate_pair(gt: LabelVolume, pred: LabelVolume, class_id: int, params: MMEParams = MMEParams()) -> MMEResult:
    """All five properties for one class of one image pair."""
    check_same_grid(gt, pred)
    GS = segments_of(gt, class_id, params.connectivity)
    SS = segments_of(pred, class_id, params.connectivity)
    return score_clusters(cluster(GS, SS), GS, SS, params)


# -- aggregation --------------------------------------------------------------


@dataclass(frozen=True)
class Summary:
    mean: float
    std: float


def summarize(values: Sequence[float]) -> Summary:
    """Mean and population std; exact-rounded sums make it order-insensitive."""
    values = [float(v) for v in values]
    if not values:
        raise ValueError("cannot summarize an empty sequence")
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    return Summary(mean, math.sqrt(var))


@dataclass(frozen=True)
class Aggregate:
    """Image-wise mean and std of each property's precision/recall/F-beta."""

    n: int
    properties: Mapping[str, Mapping[str, Summary]]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "properties": {
                p: {m: {"mean": s.mean, "std": s.std} for m, s in stats.items()}
                for p, stats in self.properties.items()
            },
        }


def aggregate(results: Sequence[MMEResult]) -> Aggregate:
    results = list(results)
    if not results:
        raise ValueError("cannot aggregate an empty result list")
    params = results[0].params
    if any(r.params != params for r in results):
        raise ValueError("results were computed with different parameters")
    props = {
        p: {m: summarize([getattr(r[p].prf, m) for r in results]) for m in PRF_FIELDS}
        for p in PROPERTIES
    }
    return Aggregate(len(results), props)


def macro_average(per_class: Mapping[int, Aggregate]) -> dict:
    """Unweighted mean over classes of each class's image-wise means."""
    if not per_class:
        raise ValueError("no classes to average")
    aggs = list(per_class.values())
    return {
        p: {m: math.fsum(a.properties[p][m].mean for a in aggs) / len(aggs) for m in PRF_FIELDS}
        for p in PROPERTIES
    }
