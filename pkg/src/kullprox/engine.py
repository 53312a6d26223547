"""Kullback-proximal iteration.

Each step maximizes the penalized objective

    F_beta(theta, theta_prev) = loglik(theta) - beta * I(theta, theta_prev)

with an inner solver warm-started at ``theta_prev``. Because every inner
solver returns a point at least as good as its warm start, the log-likelihood
never decreases along a run:

    loglik(theta_next) - loglik(theta_prev) >= beta * I(theta_next, theta_prev).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

import numpy as np

from .divergence import DomainError, KullbackDivergence

log = logging.getLogger(__name__)

MONOTONICITY_SLACK = 1e-10
STALL_WINDOW = 3


class PreconditionError(ValueError):
    pass


class MonotonicityViolation(RuntimeError):
    """The log-likelihood dropped by more than the allowed slack.

    ``trace`` holds every record up to and including the offending one.
    """

    def __init__(self, message: str, trace: "RunTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class ProximalProblem:
    """Everything the iteration needs to know about a model.

    ``vectorized`` declares that ``loglik``, ``domain_guard`` and the
    divergence statistics accept arrays of shape ``(..., dimension)``.
    """

    loglik: Callable[[np.ndarray], float]
    divergence: KullbackDivergence
    domain_guard: Callable[[np.ndarray], bool]
    dimension: int
    loglik_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    names: Optional[tuple[str, ...]] = None
    vectorized: bool = False

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if self.names is not None and len(self.names) != self.dimension:
            raise ValueError("one name per coordinate is required")

    @property
    def param_names(self) -> tuple[str, ...]:
        return self.names or tuple(f"theta_{i}" for i in range(1, self.dimension + 1))

    def penalized(self, theta, theta_bar, beta: float) -> float:
        """F_beta(theta, theta_bar); raises outside the domain."""
        if not self.domain_guard(theta):
            raise DomainError("theta is outside the problem domain")
        val = self.loglik(theta)
        if beta:
            val -= beta * self.divergence.evaluate(theta, theta_bar)
        return val

    def objective(self, theta_bar, beta: float) -> Callable[[np.ndarray], float]:
        """``theta -> F_beta(theta, theta_bar)``, returning ``-inf`` off-domain."""
        guard, loglik = self.domain_guard, self.loglik
        anchor = self.divergence.anchored(theta_bar) if beta else None

        def f(theta):
            if not guard(theta):
                return -math.inf
            try:
                val = loglik(theta)
                if anchor is not None:
                    val -= beta * anchor(theta)
            except (DomainError, FloatingPointError):
                return -math.inf
            return val if math.isfinite(val) else -math.inf

        return f

    def batch_objective(self, theta_bar, beta: float) -> Callable[[np.ndarray], np.ndarray]:
        """Vectorized ``objective`` over an ``(n, dimension)`` array of points."""
        if not self.vectorized:
            scalar = self.objective(theta_bar, beta)
            return lambda thetas: np.array([scalar(t) for t in np.asarray(thetas, dtype=float)])
        anchor = self.divergence.anchored(theta_bar) if beta else None

        def f(thetas):
            thetas = np.asarray(thetas, dtype=float)
            out = np.full(thetas.shape[0], -np.inf)
            mask = np.asarray(self.domain_guard(thetas), dtype=bool)
            if mask.any():
                inside = thetas[mask]
                vals = np.asarray(self.loglik(inside), dtype=float)
                if anchor is not None:
                    vals = vals - beta * np.asarray(anchor(inside))
                out[mask] = np.where(np.isfinite(vals), vals, -np.inf)
            return out

        return f


@dataclass(frozen=True)
class RelaxationSchedule:
    """Nonnegative, convergent sequence of relaxation weights ``beta_k``."""

    kind: str = "constant"
    beta0: float = 1.0
    decay: float = 1.0
    floor: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "geometric"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not self.beta0 >= 0 or not self.floor >= 0:
            raise ValueError("beta0 and floor must be nonnegative")
        if self.kind == "geometric" and not 0 < self.decay <= 1:
            raise ValueError("geometric decay must lie in (0, 1]")

    @classmethod
    def constant(cls, beta: float) -> "RelaxationSchedule":
        return cls("constant", beta)

    @classmethod
    def geometric(cls, beta0: float, decay: float, floor: float = 0.0) -> "RelaxationSchedule":
        return cls("geometric", beta0, decay, floor)

    def __call__(self, k: int) -> float:
        return schedule_value(self, k)

    @property
    def limit(self) -> float:
        if self.kind == "constant" or self.decay == 1.0:
            return self.beta0
        return self.floor


def schedule_value(schedule: RelaxationSchedule, k: int) -> float:
    if k < 0:
        raise ValueError("iteration index must be nonnegative")
    if schedule.kind == "constant":
        return float(schedule.beta0)
    return float(max(schedule.beta0 * schedule.decay ** k, schedule.floor))


@dataclass(frozen=True)
class StoppingRule:
    """``loglik_tol`` and ``step_tol`` of zero disable those tests."""

    max_iters: int = 100
    loglik_tol: float = 0.0
    step_tol: float = 0.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.loglik_tol < 0 or self.step_tol < 0:
            raise ValueError("tolerances must be nonnegative")


@dataclass(frozen=True)
class IterationRecord:
    """State after iteration ``k``.

    ``beta`` is the relaxation used to reach this iterate from the previous
    one (zero for the initial record) and ``divergence_from_prev`` is
    ``I(theta_k, theta_{k-1})``.
    """

    k: int
    beta: float
    theta: np.ndarray
    loglik: float
    divergence_from_prev: float
    step_norm: float
    inner_evals: int
    inner_accepted: int


@dataclass
class RunTrace:
    records: list[IterationRecord] = field(default_factory=list)
    termination: str = "max_iters"
    param_names: Optional[tuple[str, ...]] = None

    @property
    def final_theta(self) -> np.ndarray:
        return self.records[-1].theta

    @property
    def loglik(self) -> np.ndarray:
        return np.array([r.loglik for r in self.records])

    @property
    def thetas(self) -> np.ndarray:
        return np.array([r.theta for r in self.records])

    def increments(self) -> np.ndarray:
        return np.diff(self.loglik)

    def __len__(self):
        return len(self.records)


class InnerSolver(Protocol):
    def solve(self, problem: ProximalProblem, objective: Callable, theta_prev: np.ndarray,
              beta: float, k: int):
        ...


def proximal_step(problem: ProximalProblem, theta_prev, beta: float, solver: InnerSolver,
                  k: int = 0):
    """One Kullback-proximal update from ``theta_prev``.

    Returns ``(theta_next, result)``. ``result.failed`` is set, and
    ``theta_prev`` returned unchanged, when the solver could not produce an
    in-domain point.
    """
    theta_prev = np.asarray(theta_prev, dtype=float)
    if not problem.domain_guard(theta_prev):
        raise PreconditionError("proximal step started outside the domain")
    if beta < 0:
        raise PreconditionError("beta must be nonnegative")
    objective = problem.objective(theta_prev, beta)
    result = solver.solve(problem, objective, theta_prev, beta, k)
    if result.failed or not problem.domain_guard(result.theta):
        return theta_prev, result.as_failure(theta_prev)
    return result.theta, result


def run(problem: ProximalProblem, schedule: RelaxationSchedule, solver: InnerSolver,
        theta0, stop: StoppingRule = StoppingRule(), *,
        callback: Optional[Callable[[IterationRecord], None]] = None) -> RunTrace:
    """Iterate proximal steps from ``theta0`` until a stopping rule fires."""
    theta = np.array(theta0, dtype=float)
    if theta.shape != (problem.dimension,):
        raise PreconditionError(f"theta0 must have shape ({problem.dimension},)")
    if not problem.domain_guard(theta):
        raise PreconditionError("initial point is outside the problem domain")
    ll = float(problem.loglik(theta))
    trace = RunTrace([IterationRecord(0, 0.0, theta, ll, 0.0, 0.0, 0, 0)],
                     param_names=problem.param_names)
    if callback:
        callback(trace.records[0])
    small_increments = 0
    for k in range(stop.max_iters):
        beta = schedule_value(schedule, k)
        new_theta, result = proximal_step(problem, theta, beta, solver, k)
        if result.failed:
            trace.termination = "solver_failure"
            log.warning("inner solver failed at iteration %d", k + 1)
            return trace
        new_ll = float(problem.loglik(new_theta))
        div = float(problem.divergence.evaluate(new_theta, theta)) if beta else 0.0
        record = IterationRecord(k + 1, beta, new_theta, new_ll, div,
                                 float(np.linalg.norm(new_theta - theta)),
                                 result.evals, result.accepted)
        trace.records.append(record)
        if callback:
            callback(record)
        gain = new_ll - ll
        if gain < beta * div - MONOTONICITY_SLACK:
            raise MonotonicityViolation(
                f"log-likelihood gain {gain:.3e} below beta*I = {beta * div:.3e} "
                f"at iteration {k + 1}", trace)
        theta, ll = new_theta, new_ll
        small_increments = small_increments + 1 if gain < stop.loglik_tol else 0
        if small_increments >= STALL_WINDOW:
            trace.termination = "loglik_stall"
            return trace
        if record.step_norm < stop.step_tol:
            trace.termination = "step_stall"
            return trace
    trace.termination = "max_iters"
    return trace
