"""Blind image fusion: joint super-resolution and kernel estimation guided by
side information through directional total variation."""

from .core import ProblemGeometry, divergence, geometry_from, gradient
from .errors import SpecfuseError
from .forward import ForwardPlan, adjoint_a_image, adjoint_a_kernel, apply_a, upsample_init
from .metrics import centroid_offset, kernel_centroid, similarity_report, ssim
from .regularizers import DtvParams, ProxConfig, build_vector_field, dtv, tv
from .solvers import FusionProblem, SolverParams, SolverResult, run_ipalm, run_palm, run_pam, solve
from .synth import SynthSpec, desk_problem, make_problem

__version__ = "0.1.0"

__all__ = [
    "DtvParams",
    "ForwardPlan",
    "FusionProblem",
    "ProblemGeometry",
    "ProxConfig",
    "SolverParams",
    "SolverResult",
    "SpecfuseError",
    "SynthSpec",
    "adjoint_a_image",
    "adjoint_a_kernel",
    "apply_a",
    "build_vector_field",
    "centroid_offset",
    "desk_problem",
    "divergence",
    "dtv",
    "geometry_from",
    "gradient",
    "kernel_centroid",
    "make_problem",
    "run_ipalm",
    "run_palm",
    "run_pam",
    "similarity_report",
    "solve",
    "ssim",
    "tv",
    "upsample_init",
]
