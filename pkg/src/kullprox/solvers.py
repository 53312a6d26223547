"""Inner maximizers for the proximal subproblem.

Objectives map a parameter vector to a float and signal points outside their
domain by returning ``-inf`` (or ``nan``).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

GRID_MAX_DIMENSION = 4
PROPOSALS = ("subset", "full")


class UnsupportedOperation(NotImplementedError):
    pass


@dataclass(frozen=True)
class AnnealingConfig:
    """Knobs of the annealing random search.

    The budget is split into 20 stages. In stage ``s`` proposals are Gaussian
    with per-coordinate standard deviation ``proposal_scale0 * scale_cooling**s``
    and worse moves are accepted with probability ``exp(delta / T_s)``,
    ``T_s = temp0 * cooling**s``.

    With ``proposal="subset"`` each proposal moves a random subset of the
    coordinates (each kept with probability 1/2, at least one always), so a
    coordinate pinned against the domain boundary does not block moves of
    the others. ``proposal="full"`` moves every coordinate.
    """

    budget: int = 2000
    temp0: float = 1.0
    cooling: float = 0.3
    proposal_scale0: float = 0.1
    scale_cooling: float = 0.6
    seed: int = 0
    proposal: str = "subset"

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        if not 0 < self.cooling < 1:
            raise ValueError("cooling must lie in (0, 1)")
        if not 0 < self.scale_cooling <= 1:
            raise ValueError("scale_cooling must lie in (0, 1]")
        if not self.temp0 > 0 or not self.proposal_scale0 > 0:
            raise ValueError("temp0 and proposal_scale0 must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.proposal not in PROPOSALS:
            raise ValueError(f"proposal must be one of {PROPOSALS}")


N_STAGES = 20


@dataclass(frozen=True)
class SolverResult:
    theta: np.ndarray
    objective: float
    evals: int
    accepted: int
    improved: bool
    failed: bool = False

    def as_failure(self, theta_prev) -> "SolverResult":
        return replace(self, theta=np.asarray(theta_prev, dtype=float), improved=False,
                       failed=True)


def maximize_annealing(objective, theta0, config: AnnealingConfig = AnnealingConfig()) -> SolverResult:
    """Simulated-annealing random search returning the best point seen.

    The warm start counts as seen, so the result is never worse than
    ``theta0``. Random draws come from ``numpy.random.Generator(PCG64(seed))``:
    first a ``(budget, d)`` block of standard normals; for subset proposals
    then a ``(budget, d)`` block of uniforms and ``budget`` uniforms choosing
    the always-moved coordinate; finally ``budget`` acceptance uniforms.
    Out-of-domain proposals use up budget but are neither accepted nor
    counted as accepted.
    """
    theta0 = np.array(theta0, dtype=float)
    f0 = objective(theta0)
    if not math.isfinite(f0):
        raise ValueError("objective is not finite at the warm start")
    rng = np.random.Generator(np.random.PCG64(config.seed))
    budget, d = config.budget, theta0.size
    steps = rng.standard_normal((budget, d))
    if config.proposal == "subset":
        moved = rng.random((budget, d)) < 0.5
        forced = np.minimum((rng.random(budget) * d).astype(np.int64), d - 1)
        moved[np.arange(budget), forced] = True
        steps *= moved
    uniforms = rng.random(budget)
    stage_len = max(1, -(-budget // N_STAGES))

    current, f_cur = theta0, f0
    best, f_best = theta0, f0
    accepted = 0
    temp, scale = config.temp0, config.proposal_scale0
    for i in range(budget):
        if i and i % stage_len == 0:
            temp *= config.cooling
            scale *= config.scale_cooling
        cand = current + scale * steps[i]
        f_cand = objective(cand)
        if not f_cand > -math.inf:
            continue
        delta = f_cand - f_cur
        if delta >= 0 or uniforms[i] < math.exp(delta / temp):
            current, f_cur = cand, f_cand
            accepted += 1
            if f_cand > f_best:
                best, f_best = cand, f_cand
    return SolverResult(best, f_best, budget + 1, accepted, f_best > f0)


def maximize_grid(objective, lower, upper, step: float, *, vectorized: bool = False,
                  chunk: int = 200_000) -> SolverResult:
    """Exhaustive search over the lattice ``lower + step * k`` inside the box.

    Upper endpoints are included when they fall on the lattice. Points where
    the objective is ``-inf``/``nan`` are skipped. Ties go to the first point
    in lexicographic lattice order, so the answer does not depend on how the
    lattice is traversed. With ``vectorized=True`` the objective receives an
    ``(n, d)`` array and returns ``n`` values.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if lower.shape != upper.shape or lower.ndim != 1:
        raise ValueError("lower and upper must be vectors of equal length")
    if lower.size > GRID_MAX_DIMENSION:
        raise UnsupportedOperation(
            f"grid search is limited to {GRID_MAX_DIMENSION} dimensions, got {lower.size}")
    if not step > 0 or not np.all(np.isfinite(lower)) or not np.all(np.isfinite(upper)):
        raise ValueError("grid search needs a finite box and a positive step")
    if np.any(upper < lower):
        raise ValueError("upper must not be below lower")
    counts = np.floor((upper - lower) / step + 1e-9).astype(int) + 1
    axes = [lower[i] + step * np.arange(counts[i]) for i in range(lower.size)]
    total = int(np.prod(counts))

    best_idx, best_val = -1, -math.inf
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        idx = np.unravel_index(flat, counts)
        pts = np.stack([axes[i][idx[i]] for i in range(lower.size)], axis=1)
        if vectorized:
            vals = np.asarray(objective(pts), dtype=float)
        else:
            vals = np.array([objective(p) for p in pts], dtype=float)
        vals = np.where(np.isnan(vals), -np.inf, vals)
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val, best_idx = float(vals[j]), int(flat[j])
    if best_idx < 0:
        return SolverResult(lower.copy(), -math.inf, total, 0, False, failed=True)
    idx = np.unravel_index(best_idx, counts)
    theta = np.array([axes[i][idx[i]] for i in range(lower.size)])
    return SolverResult(theta, best_val, total, 0, True)


def maximize_closed_form(model, theta_prev, objective=None) -> SolverResult:
    """Exact M-step of ``model`` from ``theta_prev``.

    When ``objective`` is given, the update is kept only if it does not lower
    the objective relative to ``theta_prev``.
    """
    step = getattr(model, "closed_form_step", None)
    if step is None:
        raise UnsupportedOperation(f"{type(model).__name__} has no closed-form M-step")
    theta_prev = np.asarray(theta_prev, dtype=float)
    theta = np.asarray(step(theta_prev), dtype=float)
    if objective is None:
        return SolverResult(theta, math.nan, 1, 1, not np.array_equal(theta, theta_prev))
    f0, f1 = objective(theta_prev), objective(theta)
    if f1 >= f0:
        return SolverResult(theta, f1, 2, 1, f1 > f0)
    return SolverResult(theta_prev, f0, 2, 0, False)


# --------------------------------------------------------------------------
# solver handles used by the engine

def step_seed(seed: int, k: int) -> int:
    """Seed for inner solve ``k`` of a run seeded with ``seed``."""
    ss = np.random.SeedSequence(seed, spawn_key=(k,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class AnnealingSolver:
    config: AnnealingConfig = AnnealingConfig()

    def solve(self, problem, objective, theta_prev, beta, k):
        cfg = replace(self.config, seed=step_seed(self.config.seed, k))
        if not math.isfinite(objective(theta_prev)):
            return SolverResult(np.asarray(theta_prev), -math.inf, 1, 0, False, failed=True)
        return maximize_annealing(objective, theta_prev, cfg)


@dataclass(frozen=True)
class ClosedFormSolver:
    """Closed-form M-step; only valid for ``beta == 1``."""

    model: object

    def solve(self, problem, objective, theta_prev, beta, k):
        if beta != 1:
            raise UnsupportedOperation("the closed-form M-step maximizes F_beta only for beta = 1")
        return maximize_closed_form(self.model, theta_prev, objective)


@dataclass(frozen=True)
class GridSolver:
    lower: tuple
    upper: tuple
    step: float

    def solve(self, problem, objective, theta_prev, beta, k):
        batch = problem.batch_objective(theta_prev, beta)
        res = maximize_grid(batch, self.lower, self.upper, self.step, vectorized=True)
        f0 = objective(theta_prev)
        if res.failed or res.objective < f0:
            return SolverResult(np.asarray(theta_prev, dtype=float), f0, res.evals, 0, False)
        return res
