import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kullprox import (
    AnnealingConfig,
    AnnealingSolver,
    ClosedFormSolver,
    DivergenceTerm,
    GridSolver,
    KullbackDivergence,
    MonotonicityViolation,
    PreconditionError,
    ProximalProblem,
    RelaxationSchedule,
    SolverResult,
    StoppingRule,
    maximize_grid,
    proximal_step,
    run,
    schedule_value,
)
from kullprox.diagnostics import monotonicity_audit, penalty_tail_mean
from kullprox.models import CompetingRisksParams, cr_problem
from kullprox.scenarios import main_dataset, mixture_model, single_interval_dataset

FAST = AnnealingConfig(budget=300)


def quadratic_problem(center=0.3):
    """l(theta) = -(theta - center)^2 on theta > 0 with the statistic t(theta) = theta."""
    term = DivergenceTerm(1.0, lambda th: th[0], lambda th: np.array([1.0]))
    return ProximalProblem(
        loglik=lambda th: -(th[0] - center) ** 2,
        loglik_grad=lambda th: np.array([-2 * (th[0] - center)]),
        divergence=KullbackDivergence.from_terms([term]),
        domain_guard=lambda th: bool(th[0] > 0),
        dimension=1,
    )


class FixedSolver:
    """Returns a preset point, for driving the engine into corner cases."""

    def __init__(self, theta, failed=False):
        self.theta = np.asarray(theta, dtype=float)
        self.failed = failed

    def solve(self, problem, objective, theta_prev, beta, k):
        return SolverResult(self.theta, objective(self.theta), 1, 1, True, failed=self.failed)


# ---------------------------------------------------------------- schedules

def test_constant_schedule():
    assert schedule_value(RelaxationSchedule.constant(1.0), 7) == 1.0


def test_geometric_schedule_start():
    assert schedule_value(RelaxationSchedule.geometric(100, 0.5, 0.01), 0) == 100.0


def test_geometric_schedule_clamped_at_floor():
    assert schedule_value(RelaxationSchedule.geometric(1, 0.1, 0.01), 3) == 0.01


def test_schedule_rejects_negative_index():
    with pytest.raises(ValueError):
        schedule_value(RelaxationSchedule.constant(1.0), -1)


@pytest.mark.parametrize("kwargs", [dict(kind="linear"), dict(beta0=-1.0),
                                    dict(kind="geometric", decay=0.0),
                                    dict(kind="geometric", decay=1.5)])
def test_schedule_validation(kwargs):
    with pytest.raises(ValueError):
        RelaxationSchedule(**kwargs)


@given(beta0=st.floats(0, 1e3), decay=st.floats(1e-3, 0.999), floor=st.floats(0, 10),
       k=st.integers(0, 2000))
def test_geometric_schedule_nonnegative_and_convergent(beta0, decay, floor, k):
    sched = RelaxationSchedule.geometric(beta0, decay, floor)
    assert schedule_value(sched, k) >= 0
    assert schedule_value(sched, k + 1) <= schedule_value(sched, k)
    # distance to the limit shrinks at least geometrically
    gap = schedule_value(sched, k) - sched.limit
    assert -1e-12 <= gap <= max(beta0 * decay ** k - floor, 0.0) + 1e-12


# ---------------------------------------------------------------- proximal step

def test_unpenalized_step_is_plain_maximization():
    problem = quadratic_problem(0.3)
    theta, result = proximal_step(problem, [0.9], 0.0, GridSolver((0.0,), (1.0,), 0.05))
    assert theta[0] == pytest.approx(0.3)
    assert not result.failed


def test_penalized_step_matches_grid_oracle():
    # F(theta) = -(theta-0.3)^2 - beta * thb * log(thb/theta), maximized on a fine grid
    problem = quadratic_problem(0.3)
    beta, thb = 0.5, 0.9
    theta, _ = proximal_step(problem, [thb], beta, GridSolver((0.001,), (1.5,), 1e-4))
    # stationarity: -2(theta-0.3) + beta*thb/theta = 0
    exact = (0.3 + math.sqrt(0.09 + 2 * beta * thb)) / 2
    assert theta[0] == pytest.approx(exact, abs=1e-4)


def test_closed_form_step_is_textbook_em():
    model = mixture_model()
    th0 = model.initial_point()
    theta, _ = proximal_step(model.problem(), th0, 1.0, ClosedFormSolver(model))
    np.testing.assert_array_equal(theta, model.closed_form_step(th0))


def test_single_interval_step_reaches_grid_optimum():
    problem = cr_problem(single_interval_dataset())
    th_prev = np.array([0.5, 0.5, 0.5])
    theta, _ = proximal_step(problem, th_prev, 1.0, AnnealingSolver(AnnealingConfig(seed=42)))
    f = problem.objective(th_prev, 1.0)
    oracle = maximize_grid(problem.batch_objective(th_prev, 1.0), [0.01] * 3, [0.99] * 3, 0.01,
                           vectorized=True)
    assert f(theta) >= oracle.objective - 1e-2


def test_step_never_degrades_penalized_objective():
    problem = cr_problem(main_dataset())
    th = CompetingRisksParams.constant(5).vector
    for k in range(5):
        theta, result = proximal_step(problem, th, 1.0, AnnealingSolver(FAST), k)
        assert problem.penalized(theta, th, 1.0) >= problem.penalized(th, th, 1.0)
        th = theta


def test_step_rejects_bad_preconditions():
    problem = quadratic_problem()
    solver = GridSolver((0.0,), (1.0,), 0.1)
    with pytest.raises(PreconditionError):
        proximal_step(problem, [-1.0], 1.0, solver)
    with pytest.raises(PreconditionError):
        proximal_step(problem, [0.5], -1.0, solver)


def test_failed_solver_returns_previous_point():
    problem = quadratic_problem()
    theta, result = proximal_step(problem, [0.5], 1.0, FixedSolver([0.2], failed=True))
    assert result.failed
    np.testing.assert_array_equal(theta, [0.5])


def test_out_of_domain_solver_output_is_a_failure():
    problem = quadratic_problem()
    theta, result = proximal_step(problem, [0.5], 0.0, FixedSolver([-0.2]))
    assert result.failed
    np.testing.assert_array_equal(theta, [0.5])


# ---------------------------------------------------------------- run

def test_single_iteration_gives_two_records():
    trace = run(quadratic_problem(), RelaxationSchedule.constant(1.0),
                GridSolver((0.01,), (1.0,), 0.01), [0.8], StoppingRule(max_iters=1))
    assert len(trace.records) == 2
    assert trace.records[0].step_norm == 0.0
    assert trace.records[0].beta == 0.0
    assert trace.termination == "max_iters"


def test_run_rejects_infeasible_start():
    with pytest.raises(PreconditionError):
        run(quadratic_problem(), RelaxationSchedule.constant(1.0), GridSolver((0.0,), (1.0,), 0.1),
            [-0.5])
    with pytest.raises(PreconditionError):
        run(quadratic_problem(), RelaxationSchedule.constant(1.0), GridSolver((0.0,), (1.0,), 0.1),
            [0.5, 0.5])


def test_em_run_converges_on_competing_risks():
    problem = cr_problem(main_dataset())
    trace = run(problem, RelaxationSchedule.constant(1.0), AnnealingSolver(AnnealingConfig(seed=1)),
                CompetingRisksParams.constant(5).vector, StoppingRule(100))
    assert len(trace.records) == 101
    assert trace.increments()[-1] < 1e-5
    assert monotonicity_audit(trace, RelaxationSchedule.constant(1.0)).ok
    assert penalty_tail_mean(trace, RelaxationSchedule.constant(1.0)) < 1e-6


def test_run_records_are_in_domain_and_consistent():
    problem = cr_problem(main_dataset())
    sched = RelaxationSchedule.geometric(10.0, 0.7, 0.01)
    trace = run(problem, sched, AnnealingSolver(FAST), CompetingRisksParams.constant(5).vector,
                StoppingRule(15))
    for prev, rec in zip(trace.records, trace.records[1:]):
        assert problem.domain_guard(rec.theta)
        assert rec.beta == schedule_value(sched, prev.k)
        assert rec.divergence_from_prev >= 0
        assert rec.step_norm == pytest.approx(np.linalg.norm(rec.theta - prev.theta))
        assert rec.loglik - prev.loglik >= rec.beta * rec.divergence_from_prev - 1e-10


def test_iterates_stay_bounded():
    model = mixture_model()
    trace = run(model.problem(), RelaxationSchedule.constant(1.0), ClosedFormSolver(model),
                model.initial_point(), StoppingRule(200))
    span = np.ptp(model.data)
    assert np.abs(trace.thetas).max() <= 10 * max(span, np.abs(model.data).max())
    cr_trace = run(cr_problem(main_dataset()), RelaxationSchedule.constant(0.5),
                   AnnealingSolver(AnnealingConfig(budget=100)), np.full(15, 0.5), StoppingRule(200))
    assert np.all((cr_trace.thetas > 0) & (cr_trace.thetas < 1))


def test_loglik_stall_stops_after_window():
    problem = quadratic_problem(0.3)
    trace = run(problem, RelaxationSchedule.constant(0.0), FixedSolver([0.3]), [0.5],
                StoppingRule(max_iters=50, loglik_tol=1e-9))
    # first step gains, then three flat steps
    assert trace.termination == "loglik_stall"
    assert len(trace.records) == 5


def test_step_stall_stops_once():
    trace = run(quadratic_problem(0.3), RelaxationSchedule.constant(0.0), FixedSolver([0.3]), [0.5],
                StoppingRule(max_iters=50, step_tol=1e-12))
    assert trace.termination == "step_stall"
    assert len(trace.records) == 3


def test_solver_failure_terminates_run():
    trace = run(quadratic_problem(), RelaxationSchedule.constant(1.0), FixedSolver([0.3], True),
                [0.5], StoppingRule(10))
    assert trace.termination == "solver_failure"
    assert len(trace.records) == 1


def test_decrease_beyond_slack_aborts_with_trace():
    problem = quadratic_problem(0.3)
    with pytest.raises(MonotonicityViolation) as info:
        run(problem, RelaxationSchedule.constant(0.0), FixedSolver([0.9]), [0.3], StoppingRule(5))
    assert len(info.value.trace.records) == 2


def test_same_seed_same_trace():
    problem = cr_problem(main_dataset())
    runs = [run(problem, RelaxationSchedule.constant(1.0), AnnealingSolver(AnnealingConfig(budget=200, seed=9)),
                np.full(15, 0.5), StoppingRule(5)) for _ in range(2)]
    np.testing.assert_array_equal(runs[0].thetas, runs[1].thetas)
    np.testing.assert_array_equal(runs[0].loglik, runs[1].loglik)


def test_stopping_rule_validation():
    with pytest.raises(ValueError):
        StoppingRule(max_iters=0)
    with pytest.raises(ValueError):
        StoppingRule(loglik_tol=-1.0)
