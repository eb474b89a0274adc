"""Alternating solvers for the joint image/kernel problem."""

from .base import FusionProblem, SolverParams, SolverResult, SolverTrace, StepRecord
from .objective import (
    data_fidelity,
    gaussian_init_kernel,
    grad_k,
    grad_u,
    is_feasible,
    objective,
    objective_terms,
    step_size,
)
from .palm import backtrack_step, descent_holds, prox_descent_holds, run_ipalm, run_palm
from .pam import run_pam

ALGORITHMS = {"palm": run_palm, "ipalm": run_ipalm, "pam": run_pam}


def solve(problem, params=SolverParams(), algorithm="palm", init=None):
    """Dispatch to one of ``palm``, ``ipalm`` or ``pam``."""
    try:
        runner = ALGORITHMS[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {sorted(ALGORITHMS)}")
    return runner(problem, params, init)


__all__ = [
    "ALGORITHMS",
    "FusionProblem",
    "SolverParams",
    "SolverResult",
    "SolverTrace",
    "StepRecord",
    "backtrack_step",
    "data_fidelity",
    "descent_holds",
    "gaussian_init_kernel",
    "grad_k",
    "grad_u",
    "is_feasible",
    "objective",
    "objective_terms",
    "prox_descent_holds",
    "run_ipalm",
    "run_palm",
    "run_pam",
    "solve",
    "step_size",
]
