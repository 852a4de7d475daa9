"""Triplet loss, hard negative mining and distances to Triplet-Separated configurations."""

from .geometry import (
    InvalidInputError,
    LabeledPointSet,
    diameter,
    hausdorff_distance,
    load,
    loads,
    pairwise_distances,
    project_direction,
    thickness,
    unit_vector,
)
from .triplet import (
    BatchHard,
    HardNegative,
    RandomTriplet,
    SemiHard,
    Triplet,
    class_boundary,
    enumerate_triplets,
    hnm_loss,
    is_triplet_separated,
    make_triplet,
    mine,
    separation_margin,
    triplet_loss,
)
from .isometry import (
    EmbeddingPair,
    RigidIsometry,
    align_isometry,
    d_iso,
    estimate_cn,
    nearisometry_defect,
)
from .projection import (
    FeasibilityError,
    Objective,
    ProjectionConfig,
    ProjectionDivergedError,
    ProjectionResult,
    collapse_ratio,
    project,
    repair_to_feasible,
)
from .experiments import collapse_sweep, toy_figures, verify_bounds
from .kernels import BACKEND

__version__ = "0.1.0"
