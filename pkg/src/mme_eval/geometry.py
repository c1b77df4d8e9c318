"""Distance fields, boundaries, medial axes and surface-distance metrics.

All distances are physical (mm) and honour anisotropic voxel spacing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import ndimage
from skimage.morphology import skeletonize as _sk_skeletonize

from .volume import BinaryMask, Segment, Spacing, check_same_grid

#: slack for "distance <= tau" membership tests
TOLERANCE_SLACK = 1e-9


class EmptySeedError(ValueError):
    """Raised when a distance transform is requested for an empty seed set."""


def _bits(mask) -> np.ndarray:
    if isinstance(mask, BinaryMask):
        return mask.bits
    if isinstance(mask, Segment):
        return mask.mask()
    bits = np.asarray(mask, dtype=bool)
    return bits[:, :, np.newaxis] if bits.ndim == 2 else bits


def _spacing(mask, spacing) -> Spacing:
    if spacing is not None:
        return Spacing.coerce(spacing)
    if isinstance(mask, (BinaryMask, Segment)):
        return mask.spacing
    return Spacing()


def distance_to(seeds: np.ndarray, spacing: Spacing) -> np.ndarray:
    """Exact Euclidean distance (mm) from every voxel to the nearest seed voxel."""
    if not seeds.any():
        raise EmptySeedError("distance field undefined for an empty seed set")
    return ndimage.distance_transform_edt(~seeds, sampling=spacing.as_tuple())


@dataclass(frozen=True, eq=False)
class DistanceField:
    values: np.ndarray
    spacing: Spacing

    @property
    def dims(self):
        return self.values.shape


def edt(seeds, spacing=None) -> DistanceField:
    """Exact anisotropic Euclidean distance transform to ``seeds``.

    Raises :class:`EmptySeedError` when ``seeds`` has no true voxel.
    """
    spacing = _spacing(seeds, spacing)
    return DistanceField(distance_to(_bits(seeds), spacing), spacing)


_FACE_3D = ndimage.generate_binary_structure(3, 1)
_FACE_2D = _FACE_3D.copy()
_FACE_2D[1, 1, 0] = _FACE_2D[1, 1, 2] = False


def boundary_bits(bits: np.ndarray) -> np.ndarray:
    # depth-one images are planar: the missing z neighbours are not background
    structure = _FACE_2D if bits.shape[2] == 1 else _FACE_3D
    interior = ndimage.binary_erosion(bits, structure=structure, border_value=0)
    return bits & ~interior


def boundary(mask) -> BinaryMask:
    """Foreground voxels with at least one background face neighbour.

    The grid edge counts as background.  Volumes of depth one use the in-plane
    4-neighbourhood.
    """
    return BinaryMask(boundary_bits(_bits(mask)), _spacing(mask, None))


@dataclass(frozen=True, eq=False)
class Skeleton:
    indices: np.ndarray
    parent_segment_id: int
    dims: tuple

    @property
    def size(self) -> int:
        return int(self.indices.size)

    @property
    def voxels(self) -> frozenset:
        coords = np.column_stack(np.unravel_index(self.indices, self.dims))
        return frozenset(map(tuple, coords.tolist()))

    def mask(self) -> np.ndarray:
        bits = np.zeros(self.dims, dtype=bool)
        bits.flat[self.indices] = True
        return bits


def skeletonize(segment: Segment, spacing=None) -> Skeleton:
    """Medial axis of a segment by topology-preserving thinning.

    Depth-one grids are thinned in 2D; otherwise Lee's 3D thinning is used.
    When thinning erases a blob entirely (e.g. a 2x2x2 cube) the deepest voxel
    stands in, so the result is never empty.
    """
    spacing = _spacing(segment, spacing)
    if segment.size == 0:
        raise ValueError("cannot skeletonize an empty segment")
    box = segment.bbox(pad=1)
    local = segment.mask()[box]
    if segment.dims[2] == 1:
        thin = _sk_skeletonize(local[:, :, 0])[:, :, np.newaxis]
    else:
        thin = _sk_skeletonize(local, method="lee")
    thin = np.asarray(thin, dtype=bool) & local
    if not thin.any():
        depth = ndimage.distance_transform_edt(local, sampling=spacing.as_tuple())
        # argmax returns the first maximum in C order, i.e. lexicographically smallest
        thin = np.zeros_like(local)
        thin.flat[int(np.argmax(depth))] = True
    full = np.zeros(segment.dims, dtype=bool)
    full[box] = thin
    return Skeleton(np.flatnonzero(full), segment.id, segment.dims)


@dataclass(frozen=True, eq=False)
class NormalizedDistanceField:
    """Shape-normalised distances around one ground-truth segment.

    Arrays cover ``region`` (a tuple of slices into the full grid).  Inside
    the segment ``dn_in`` holds the normalised depth in [0, 1] and ``dn_out``
    is zero; outside it is the other way round.
    """

    region: tuple
    inside: np.ndarray
    dn_in: np.ndarray
    dn_out: np.ndarray
    dims: tuple
    segment_id: int

    @property
    def total_in(self) -> float:
        return float(self.dn_in[self.inside].sum())

    def values_at(self, flat_indices: np.ndarray) -> np.ndarray:
        """Normalised distance at full-grid flat indices (must lie in ``region``)."""
        coords = np.unravel_index(np.asarray(flat_indices, dtype=np.int64), self.dims)
        local = tuple(c - s.start for c, s in zip(coords, self.region))
        return np.where(self.inside[local], self.dn_in[local], self.dn_out[local])


def full_region(dims) -> tuple:
    return tuple(slice(0, int(n)) for n in dims)


def normalized_distance(G: Segment, skeleton: Skeleton, spacing=None, region=None) -> NormalizedDistanceField:
    """Normalised distance of every voxel in ``region`` relative to ``G``.

    ``DB`` is the distance to the boundary of ``G`` and ``DK`` the distance to
    its skeleton.  Inside: ``DB / (DK + DB)``, taken as 1 on skeleton voxels.
    Outside: ``DB / max(DK - DB, eps)`` with ``eps`` the smallest voxel edge.
    ``region`` must contain ``G``; it defaults to the whole grid.
    """
    spacing = _spacing(G, spacing)
    if skeleton.parent_segment_id != G.id or not np.isin(skeleton.indices, G.indices).all():
        raise ValueError("skeleton does not belong to the segment")
    region = full_region(G.dims) if region is None else tuple(region)
    full = G.mask()
    inside = full[region]
    if inside.sum() != G.size:
        raise ValueError("region does not contain the whole segment")
    # boundary on a padded box so that crop edges are not mistaken for background
    edge = np.zeros_like(full)
    box = G.bbox(pad=1)
    edge[box] = boundary_bits(full[box])
    db = distance_to(edge[region], spacing)
    dk = distance_to(skeleton.mask()[region], spacing)
    eps = min(spacing.as_tuple())

    denom_in = dk + db
    with np.errstate(invalid="ignore", divide="ignore"):
        dn_in = np.where(denom_in > 0, db / np.where(denom_in > 0, denom_in, 1.0), 1.0)
    dn_in = np.where(inside, dn_in, 0.0)
    dn_out = np.where(inside, 0.0, db / np.maximum(dk - db, eps))
    return NormalizedDistanceField(region, inside, dn_in, dn_out, G.dims, G.id)


class HausdorffResult(NamedTuple):
    avg: float
    p95: float
    max: float


def _union_box(*bit_arrays) -> tuple:
    union = np.logical_or.reduce(bit_arrays)
    idx = np.argwhere(union)
    lo, hi = idx.min(axis=0), idx.max(axis=0) + 1
    return tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))


def surface_distances(G, S, spacing=None) -> Optional[tuple[np.ndarray, np.ndarray]]:
    """Distances from each boundary voxel of G to the boundary of S, and back.

    Returns ``None`` if either mask is empty.
    """
    spacing = _spacing(G, spacing)
    g, s = _bits(G), _bits(S)
    if g.shape != s.shape:
        check_same_grid(BinaryMask(g), BinaryMask(s))
    if not g.any() or not s.any():
        return None
    bg, bs = boundary_bits(g), boundary_bits(s)
    # all seeds and queries sit inside the union box, so cropping is exact
    box = _union_box(bg, bs)
    bg, bs = bg[box], bs[box]
    g_to_s = distance_to(bs, spacing)[bg]
    s_to_g = distance_to(bg, spacing)[bs]
    return g_to_s, s_to_g


def hausdorff(G, S, spacing=None) -> Optional[HausdorffResult]:
    """Mean, 95th percentile and maximum of the symmetric surface distances.

    The 95th percentile interpolates linearly between sorted values.  Returns
    ``None`` (undefined) when either mask is empty.
    """
    dists = surface_distances(G, S, spacing)
    return None if dists is None else hausdorff_from(dists)


def hausdorff_from(dists) -> HausdorffResult:
    pooled = np.concatenate(dists)
    return HausdorffResult(float(pooled.mean()), float(np.percentile(pooled, 95)), float(pooled.max()))


def nsd(G, S, tau: float, spacing=None) -> Optional[float]:
    """Normalised surface Dice at physical tolerance ``tau`` (mm).

    Returns ``None`` when either mask is empty.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    dists = surface_distances(G, S, spacing)
    return None if dists is None else nsd_from(dists, tau)


def nsd_from(dists, tau: float) -> float:
    g_to_s, s_to_g = dists
    hits = np.count_nonzero(g_to_s <= tau + TOLERANCE_SLACK) + np.count_nonzero(s_to_g <= tau + TOLERANCE_SLACK)
    return hits / (g_to_s.size + s_to_g.size)
