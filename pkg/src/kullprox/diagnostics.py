"""Post-hoc certification of proximal runs."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from .engine import MONOTONICITY_SLACK, ProximalProblem, RelaxationSchedule, RunTrace, schedule_value

DEFAULT_ACTIVITY_TOL = 1e-4
PIVOT_RTOL = 1e-8


@dataclass(frozen=True)
class AuditReport:
    violations: list[int]
    margins: np.ndarray  # gain - beta*I per consecutive pair

    @property
    def ok(self) -> bool:
        return not self.violations


def monotonicity_audit(trace: RunTrace, schedule: RelaxationSchedule,
                       slack: float = MONOTONICITY_SLACK) -> AuditReport:
    """Every ``k`` with ``l[k+1] - l[k] < beta_k * I(theta_{k+1}, theta_k) - slack``."""
    records = trace.records
    margins = np.array([
        (b.loglik - a.loglik) - schedule_value(schedule, a.k) * b.divergence_from_prev
        for a, b in zip(records, records[1:])
    ])
    violations = [records[i].k for i in np.flatnonzero(margins < -slack)]
    return AuditReport(violations, margins)


def penalty_tail_mean(trace: RunTrace, schedule: RelaxationSchedule, n: int = 10) -> float:
    """Mean of ``beta_k * I(theta_{k+1}, theta_k)`` over the last ``n`` steps."""
    recs = trace.records[1:][-n:]
    if not recs:
        return 0.0
    return float(np.mean([schedule_value(schedule, r.k - 1) * r.divergence_from_prev for r in recs]))


def finite_difference_gradient(f: Callable[[np.ndarray], float], theta,
                               domain_guard: Optional[Callable] = None,
                               rel_step: float = 1e-6) -> np.ndarray:
    """Central differences with ``h = rel_step * (1 + |theta_i|)``.

    Falls back to a one-sided difference on coordinates where one of the two
    probes leaves the domain.
    """
    theta = np.asarray(theta, dtype=float)
    inside = domain_guard or (lambda t: True)
    f0 = None
    grad = np.empty_like(theta)
    for i in range(theta.size):
        h = rel_step * (1.0 + abs(theta[i]))
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        ok_up, ok_down = inside(up), inside(down)
        if ok_up and ok_down:
            grad[i] = (f(up) - f(down)) / (2 * h)
            continue
        if f0 is None:
            f0 = f(theta)
        if ok_up:
            grad[i] = (f(up) - f0) / h
        elif ok_down:
            grad[i] = (f0 - f(down)) / h
        else:
            raise ValueError(f"no in-domain probe along coordinate {i}")
    return grad


@dataclass(frozen=True)
class KKTReport:
    active_set: list[int]
    multipliers: list[float]
    residual_norm: float
    gradient_norm: float
    multipliers_nonnegative: bool
    selected: list[int] = field(default_factory=list)
    degenerate: bool = False
    residual: Optional[np.ndarray] = None

    def scaled_gradient_norm(self, loglik: float) -> float:
        return self.gradient_norm / (1.0 + abs(loglik))


def kkt_check(problem: ProximalProblem, theta_star, activity_tol: float = DEFAULT_ACTIVITY_TOL,
              *, finite_differences: bool = False) -> KKTReport:
    """Fit ``grad l + sum lambda_i grad t_i = 0`` over the active statistics.

    Active terms are those with positive weight and
    ``t_i(theta_star) <= activity_tol``. A
    linearly independent subfamily of their gradients is chosen by QR with
    column pivoting, dropping columns whose pivot falls below ``1e-8`` times
    the leading one; multipliers of dropped terms are reported as zero.
    """
    theta_star = np.asarray(theta_star, dtype=float)
    if finite_differences or problem.loglik_grad is None:
        grad = finite_difference_gradient(problem.loglik, theta_star, problem.domain_guard)
    else:
        grad = np.asarray(problem.loglik_grad(theta_star), dtype=float)
    gnorm = float(np.linalg.norm(grad))

    div = problem.divergence
    stats = div.statistics(theta_star)
    # zero-weight terms are not part of the divergence, so they constrain nothing
    active = [int(i) for i in np.flatnonzero((stats <= activity_tol) & (div.weights > 0))]
    if not active:
        return KKTReport([], [], gnorm, gnorm, True, residual=grad)

    jac = np.concatenate([b.jacobian(theta_star) for b in div.blocks], axis=0)
    A = jac[active].T  # d x n_active
    _, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > PIVOT_RTOL * diag[0])) if diag.size and diag[0] > 0 else 0
    if rank == 0:
        return KKTReport(active, [0.0] * len(active), gnorm, gnorm, True,
                         degenerate=gnorm > 0, residual=grad)
    cols = np.sort(piv[:rank])
    lam_sel, *_ = np.linalg.lstsq(A[:, cols], -grad, rcond=None)
    lam = np.zeros(len(active))
    lam[cols] = lam_sel
    resid = grad + A[:, cols] @ lam_sel
    return KKTReport(
        active_set=active,
        multipliers=[float(v) for v in lam],
        residual_norm=float(np.linalg.norm(resid)),
        gradient_norm=gnorm,
        multipliers_nonnegative=bool(np.all(lam_sel >= 0)),
        selected=[active[c] for c in cols],
        residual=resid,
    )


@dataclass(frozen=True)
class RateEstimate:
    ratios: np.ndarray
    classification: str


def rate_estimate(trace: RunTrace | Sequence, window: int = 5, limit=None) -> RateEstimate:
    """Empirical convergence-rate class from trailing error ratios.

    ``limit`` defaults to the final iterate, which makes the last few ratios
    shrink artificially; pass the true limit when it is known.
    """
    thetas = trace.thetas if isinstance(trace, RunTrace) else np.asarray(trace, dtype=float)
    thetas = thetas.reshape(len(thetas), -1)
    if limit is None:
        target, pts = thetas[-1], thetas[:-1]
    else:
        target, pts = np.asarray(limit, dtype=float).reshape(-1), thetas
    if window < 5 or len(pts) <= window:
        return RateEstimate(np.array([]), "undetermined")
    err = np.linalg.norm(pts - target, axis=1)[-(window + 1):]
    if np.any(err[:-1] == 0):
        return RateEstimate(np.array([]), "undetermined")
    ratios = err[1:] / err[:-1]
    if np.all((ratios >= 0.1) & (ratios <= 0.95)) and np.ptp(ratios) < 0.2:
        kind = "linear"
    elif np.all(ratios < 0.1) and np.all(np.diff(ratios) <= 0):
        kind = "superlinear"
    elif np.all(ratios >= 0.95):
        kind = "sublinear"
    else:
        kind = "undetermined"
    return RateEstimate(ratios, kind)
