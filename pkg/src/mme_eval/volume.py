"""Label volumes, binary masks and connected segments.

Arrays are indexed ``[x, y, z]`` with shape ``(w, h, d)``.  Flattened label
sequences (fixture files, NIfTI payloads) are x-fastest, i.e. Fortran order
of that array.  Segment voxel indices are flat indices in C order of the
same array, which makes sorting them equivalent to lexicographic ``(x, y, z)``
order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import ndimage


class IncompatibleGridsError(ValueError):
    """Raised when two volumes, masks or segments do not share a grid."""


@dataclass(frozen=True)
class Spacing:
    """Physical voxel size in millimetres."""

    dx: float = 1.0
    dy: float = 1.0
    dz: float = 1.0

    def __post_init__(self):
        for name in ("dx", "dy", "dz"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"spacing {name} must be > 0, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def voxel_volume(self) -> float:
        return self.dx * self.dy * self.dz

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)

    def scaled(self, factor: float) -> "Spacing":
        return Spacing(self.dx * factor, self.dy * factor, self.dz * factor)

    @classmethod
    def coerce(cls, value) -> "Spacing":
        if isinstance(value, Spacing):
            return value
        return cls(*value)


def _as_3d(array: np.ndarray) -> np.ndarray:
    array = np.asarray(array)
    if array.ndim == 2:
        array = array[:, :, np.newaxis]
    if array.ndim != 3:
        raise ValueError(f"expected a 2D or 3D array, got {array.ndim}D")
    if min(array.shape) < 1:
        raise ValueError(f"every dimension must be >= 1, got {array.shape}")
    return array


@dataclass(frozen=True, eq=False)
class LabelVolume:
    """Grid of non-negative integer class labels.

    2D images are accepted and stored with depth one.
    """

    labels: np.ndarray
    spacing: Spacing = field(default_factory=Spacing)

    def __post_init__(self):
        labels = _as_3d(self.labels)
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(np.equal(np.mod(labels, 1), 0)):
                raise ValueError("labels must be integral")
        if labels.size and labels.min() < 0:
            raise ValueError("labels must be non-negative")
        labels = np.array(labels, dtype=np.int64)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "spacing", Spacing.coerce(self.spacing))

    @classmethod
    def from_flat(cls, dims, flat, spacing=Spacing()) -> "LabelVolume":
        """Build from an x-fastest label sequence of length ``w*h*d``."""
        dims = tuple(int(n) for n in dims)
        flat = np.asarray(flat)
        if flat.size != int(np.prod(dims)):
            raise ValueError(f"expected {int(np.prod(dims))} labels for dims {dims}, got {flat.size}")
        return cls(flat.reshape(dims, order="F"), spacing)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.labels.shape

    def flat(self) -> np.ndarray:
        """Labels as an x-fastest sequence."""
        return self.labels.ravel(order="F")

    def classes(self) -> list[int]:
        """Nonzero labels present, ascending."""
        return [int(c) for c in np.unique(self.labels) if c != 0]

    def __eq__(self, other):
        if not isinstance(other, LabelVolume):
            return NotImplemented
        return self.spacing == other.spacing and np.array_equal(self.labels, other.labels)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    bits: np.ndarray
    spacing: Spacing = field(default_factory=Spacing)

    def __post_init__(self):
        bits = np.array(_as_3d(self.bits), dtype=bool)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "spacing", Spacing.coerce(self.spacing))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.bits.shape

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def any(self) -> bool:
        return bool(self.bits.any())

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.spacing == other.spacing and np.array_equal(self.bits, other.bits)


@dataclass(frozen=True, eq=False)
class Segment:
    """One connected set of foreground voxels.

    ``indices`` are sorted flat (C-order) indices into a grid of ``dims``.
    """

    id: int
    indices: np.ndarray
    dims: tuple[int, int, int]
    spacing: Spacing

    def __post_init__(self):
        indices = np.unique(np.asarray(self.indices, dtype=np.int64))
        indices.setflags(write=False)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))

    @classmethod
    def from_mask(cls, id: int, bits: np.ndarray, spacing=Spacing()) -> "Segment":
        bits = _as_3d(bits)
        return cls(id, np.flatnonzero(bits), bits.shape, Spacing.coerce(spacing))

    @property
    def size(self) -> int:
        return int(self.indices.size)

    @property
    def volume_mm3(self) -> float:
        return volume_of(self.size, self.spacing)

    @property
    def coords(self) -> np.ndarray:
        """``(n, 3)`` array of voxel coordinates in lexicographic order."""
        return np.column_stack(np.unravel_index(self.indices, self.dims)).astype(np.int64)

    @property
    def voxels(self) -> frozenset:
        return frozenset(map(tuple, self.coords.tolist()))

    def mask(self) -> np.ndarray:
        bits = np.zeros(self.dims, dtype=bool)
        bits.flat[self.indices] = True
        return bits

    def bbox(self, pad: int = 0) -> tuple[slice, slice, slice]:
        coords = self.coords
        lo = np.maximum(coords.min(axis=0) - pad, 0)
        hi = np.minimum(coords.max(axis=0) + 1 + pad, self.dims)
        return tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))


@dataclass(frozen=True, eq=False)
class SegmentSet:
    """Disjoint connected segments of one class.

    ``label_map`` holds each voxel's segment id (0 for background).
    """

    class_id: int
    segments: tuple
    label_map: np.ndarray
    spacing: Spacing

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.label_map.shape

    def __len__(self):
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def __getitem__(self, segment_id: int) -> Segment:
        return self.segments[segment_id - 1]

    @property
    def total_voxels(self) -> int:
        return sum(s.size for s in self.segments)

    @property
    def volume_mm3(self) -> float:
        return volume_of(self.total_voxels, self.spacing)


CONNECTIVITY_RANK = {6: 1, 18: 2, 26: 3}


def structuring_element(connectivity: int) -> np.ndarray:
    try:
        rank = CONNECTIVITY_RANK[int(connectivity)]
    except KeyError:
        raise ValueError(f"connectivity must be one of 6, 18, 26; got {connectivity!r}") from None
    return ndimage.generate_binary_structure(3, rank)


def class_mask(volume: LabelVolume, class_id: int) -> BinaryMask:
    """Mask that is true exactly where the label equals ``class_id``."""
    return BinaryMask(volume.labels == int(class_id), volume.spacing)


def connected_components(mask: BinaryMask, connectivity: int = 26, class_id: int = 1) -> SegmentSet:
    """Split a mask into connected segments.

    Ids are dense from 1 and ordered by each segment's lexicographically
    smallest voxel, so labelling is deterministic.
    """
    structure = structuring_element(connectivity)
    raw, n = ndimage.label(mask.bits, structure=structure)
    label_map = np.zeros(mask.dims, dtype=np.int32)
    segments = []
    if n:
        flat = raw.ravel()
        nz = np.flatnonzero(flat)
        raw_ids = flat[nz]
        order = np.argsort(raw_ids, kind="stable")
        sorted_ids = raw_ids[order]
        starts = np.searchsorted(sorted_ids, np.arange(1, n + 1))
        stops = np.append(starts[1:], sorted_ids.size)
        groups = [nz[order[a:b]] for a, b in zip(starts, stops)]
        # nz is ascending, so each group is sorted and group[0] is its minimum
        groups.sort(key=lambda g: g[0])
        for new_id, idx in enumerate(groups, start=1):
            label_map.flat[idx] = new_id
            segments.append(Segment(new_id, idx, mask.dims, mask.spacing))
    label_map.setflags(write=False)
    return SegmentSet(int(class_id), tuple(segments), label_map, mask.spacing)


def segments_of(volume: LabelVolume, class_id: int, connectivity: int = 26) -> SegmentSet:
    return connected_components(class_mask(volume, class_id), connectivity, class_id)


def exact_volume(voxel_count: int, spacing: Spacing) -> Fraction:
    """Volume of ``voxel_count`` voxels as an exact rational (mm^3)."""
    if voxel_count < 0:
        raise ValueError("voxel_count must be non-negative")
    return int(voxel_count) * Fraction(spacing.dx) * Fraction(spacing.dy) * Fraction(spacing.dz)


def volume_of(voxel_count: int, spacing: Spacing) -> float:
    """Physical volume in mm^3 of ``voxel_count`` voxels, correctly rounded."""
    return float(exact_volume(voxel_count, spacing))


def overlap(a: Segment, b: Segment) -> frozenset:
    """Voxels shared by two segments; empty means the segments are uncorrelated."""
    if a.dims != b.dims:
        raise IncompatibleGridsError(f"segment grids differ: {a.dims} vs {b.dims}")
    shared = np.intersect1d(a.indices, b.indices, assume_unique=True)
    return frozenset(map(tuple, np.column_stack(np.unravel_index(shared, a.dims)).tolist()))


def check_same_grid(a, b) -> None:
    if a.dims != b.dims:
        raise IncompatibleGridsError(f"grid dims differ: {a.dims} vs {b.dims}")
    if a.spacing != b.spacing:
        raise IncompatibleGridsError(
            f"grid spacing differs: {a.spacing.as_tuple()} vs {b.spacing.as_tuple()}"
        )
