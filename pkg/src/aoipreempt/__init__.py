"""Age-of-information analytics and simulation for a two-cell queue with
threshold-based service preemption."""
from .aoi import AoiTransform, MomentError, aoi_transform, assemble, mean_aoi
from .dist import (
    INF,
    ModelParams,
    ServiceDistribution,
    deterministic,
    exponential,
    laplace_G,
    mixture_det_exp,
    parse_distribution,
)
from .inversion import ccdf, find_threshold
from .kernels import build_kernels, compute_constants, conditional_transforms
from .optimize import refine, sweep
from .simulator import SimConfig, SimResult, empirical_kernels, simulate

__all__ = [
    "INF",
    "AoiTransform",
    "ModelParams",
    "MomentError",
    "ServiceDistribution",
    "SimConfig",
    "SimResult",
    "aoi_transform",
    "assemble",
    "build_kernels",
    "ccdf",
    "compute_constants",
    "conditional_transforms",
    "deterministic",
    "empirical_kernels",
    "exponential",
    "find_threshold",
    "laplace_G",
    "mean_aoi",
    "mixture_det_exp",
    "parse_distribution",
    "refine",
    "simulate",
    "sweep",
]
