"""Parameters, problem container and iteration telemetry shared by the solvers."""

import csv
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from ..core import as_image, geometry_from
from ..errors import BadParams, GeometryMismatch
from ..forward import ForwardPlan, upsample_init
from ..regularizers import DtvParams, VectorField, build_vector_field

__all__ = ["SolverParams", "FusionProblem", "SolverTrace", "StepRecord", "SolverResult"]

TRACE_COLUMNS = (
    "iter",
    "objective",
    "data_fidelity",
    "reg_u",
    "reg_k",
    "L_u",
    "L_k",
    "retries",
    "seconds",
)


@dataclass(frozen=True)
class SolverParams:
    """Model weights, step-size control and inner-solver budgets.

    ``tau_u``/``tau_k`` and the ``admm_*`` fields are only read by PAM.  The
    kernel subproblem is tiny, so it gets its own (larger) ADMM budget and
    uses ``prox_iterations`` for its inner prox.
    """

    lambda_u: float = 0.1
    lambda_k: float = 10.0
    alpha: float = 0.0
    theta: float = 1.1
    eta: float = 2.0
    l_min: float = 1.0
    l_max: float = 1e30
    max_iterations: int = 2000
    initial_lu: float = 1.0
    initial_lk: float = 1.0
    prox_iterations: int = 20
    prox_budget_cap: int = 16
    backtrack_limit: int = 60
    tau_u: float = 1.0
    tau_k: float = 1.0
    admm_rho: float = 1.0
    admm_iterations: int = 10
    admm_prox_iterations: int = 5
    admm_kernel_iterations: int = 30

    def __post_init__(self):
        if self.lambda_u < 0 or self.lambda_k < 0:
            raise BadParams("regularization weights must be nonnegative")
        if not 0.0 <= self.alpha < 1.0:
            raise BadParams(f"alpha must lie in [0, 1), got {self.alpha}")
        if not self.theta > 1.0:
            raise BadParams(f"theta must exceed 1, got {self.theta}")
        if not self.eta > 1.0:
            raise BadParams(f"eta must exceed 1, got {self.eta}")
        if not 0.0 < self.l_min <= self.l_max < np.inf:
            raise BadParams(f"need 0 < l_min <= l_max < inf, got {self.l_min}, {self.l_max}")
        for name in ("initial_lu", "initial_lk"):
            value = getattr(self, name)
            if not self.l_min <= value <= self.l_max:
                raise BadParams(f"{name}={value} is outside [l_min, l_max]")
        if self.max_iterations < 0:
            raise BadParams("max_iterations must be nonnegative")
        if min(self.admm_iterations, self.admm_prox_iterations, self.admm_kernel_iterations) < 1:
            raise BadParams("ADMM budgets must be positive")
        if self.prox_iterations < 1 or self.prox_budget_cap < 1:
            raise BadParams("prox budgets must be positive")
        if not (self.tau_u > 0 and self.tau_k > 0 and self.admm_rho > 0):
            raise BadParams("PAM step sizes and ADMM penalty must be positive")


@dataclass
class FusionProblem:
    """Data ``f``, the direction field from the side information, and the plan."""

    f: np.ndarray
    xi: VectorField
    plan: ForwardPlan

    @classmethod
    def build(cls, f, v, kernel_shape, sampling, dtv: DtvParams = DtvParams()):
        f = as_image(f, "data")
        geometry = geometry_from(f.shape, kernel_shape, sampling)
        v = as_image(v, "side information")
        if v.shape != tuple(geometry.image_shape):
            raise GeometryMismatch(
                f"side information has shape {v.shape}, expected {geometry.image_shape} "
                f"(= s * {f.shape} + 2l)"
            )
        return cls(f, build_vector_field(v, dtv), ForwardPlan(geometry))

    @property
    def geometry(self):
        return self.plan.geometry

    def initial_guess(self, sigma: Optional[float] = None):
        """Upsampled data and a centered Gaussian kernel of width ``min(r) / 8``."""
        from .objective import gaussian_init_kernel

        r = self.geometry.kernel_shape
        if sigma is None:
            sigma = min(r) / 8.0
        return upsample_init(self.f, self.geometry), gaussian_init_kernel(r, sigma)


@dataclass
class StepRecord:
    """Everything needed to re-check one accepted block update after the fact."""

    iteration: int
    block: str
    x: np.ndarray
    x_alpha: np.ndarray
    x_plus: np.ndarray
    grad: np.ndarray
    tau: float
    lipschitz: float
    other: np.ndarray
    fallback: bool = False


@dataclass
class SolverTrace:
    algorithm: str = ""
    rows: List[tuple] = field(default_factory=list)

    def append(self, it, objective, data_fidelity, reg_u, reg_k, lu, lk, retries, seconds):
        self.rows.append(
            (int(it), float(objective), float(data_fidelity), float(reg_u), float(reg_k),
             float(lu), float(lk), int(retries), float(seconds))
        )

    def __len__(self):
        return len(self.rows)

    def column(self, name) -> np.ndarray:
        return np.array([row[TRACE_COLUMNS.index(name)] for row in self.rows])

    @property
    def objective(self) -> np.ndarray:
        return self.column("objective")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for row in self.rows:
                writer.writerow([repr(v) if isinstance(v, float) else v for v in row])

    @classmethod
    def from_csv(cls, path, algorithm=""):
        trace = cls(algorithm)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != TRACE_COLUMNS:
                raise ValueError(f"unexpected trace header {header}")
            for row in reader:
                trace.append(*(float(v) for v in row))
        return trace


class SolverResult(NamedTuple):
    u: np.ndarray
    k: np.ndarray
    trace: SolverTrace
