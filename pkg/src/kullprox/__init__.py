"""Kullback-proximal point iterations for maximum likelihood."""
from .divergence import (
    SHIFTED_KL,
    TAU_LOG_TAU,
    BoundaryViolation,
    DivergenceTerm,
    DomainError,
    KullbackDivergence,
    PhiFunction,
    TermBlock,
    divergence_eval,
    divergence_grad1,
    phi_eval,
)
from .engine import (
    IterationRecord,
    MonotonicityViolation,
    PreconditionError,
    ProximalProblem,
    RelaxationSchedule,
    RunTrace,
    StoppingRule,
    proximal_step,
    run,
    schedule_value,
)
from .solvers import (
    AnnealingConfig,
    AnnealingSolver,
    ClosedFormSolver,
    GridSolver,
    SolverResult,
    UnsupportedOperation,
    maximize_annealing,
    maximize_closed_form,
    maximize_grid,
)

__version__ = "0.1.0"
