"""Spacing-aware, segment-level evaluation of volumetric segmentations."""

from .baseline import (
    BaselineReport,
    ConfusionCounts,
    accuracy,
    baseline_report,
    class_baselines,
    confusion,
    dice,
    fwiou,
    iou,
    miou,
    prf_voxel,
    volume_similarity,
)
from .geometry import (
    DistanceField,
    EmptySeedError,
    HausdorffResult,
    NormalizedDistanceField,
    Skeleton,
    boundary,
    edt,
    hausdorff,
    normalized_distance,
    nsd,
    skeletonize,
)
from .mme import (
    PRF,
    PROPERTIES,
    Aggregate,
    Cluster,
    ClusterSet,
    MMEParams,
    MMEResult,
    PropertyCounts,
    aggregate,
    boundary_alignment,
    cluster,
    detection,
    evaluate_pair,
    macro_average,
    prf,
    relative_volume,
    total_volume,
    uniformity,
)
from .volume import (
    BinaryMask,
    IncompatibleGridsError,
    LabelVolume,
    Segment,
    SegmentSet,
    Spacing,
    class_mask,
    connected_components,
    overlap,
    segments_of,
    volume_of,
)

__version__ = "0.1.0"
