"""Command-line front end: ``fit``, ``sweep`` and ``simulate``.

Exit status is 0 on clean termination, 1 on bad input, 3 when the inner
solver failed and 4 when the log-likelihood decreased.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .config import (CompetingRisksSimulation, ConfigError, ExperimentConfig, MixtureSimulation,
                     load_config)
from .diagnostics import kkt_check
from .engine import (MonotonicityViolation, PreconditionError, ProximalProblem,
                     RelaxationSchedule, RunTrace, run)
from .models.competing_risks import CompetingRisksModel, CompetingRisksParams, cr_simulate
from .models.mixture import GaussianMixtureModel, gmm_sample
from .solvers import AnnealingSolver

log = logging.getLogger("kullprox")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER_FAILURE = 3
EXIT_MONOTONICITY = 4

SUMMARY_HEADER = ("beta", "seed", "iterations", "final_loglik", "loglik_at_50", "terminated_by")


@dataclass(frozen=True)
class Experiment:
    problem: ProximalProblem
    theta0: np.ndarray
    model: object


def simulate_data(config: ExperimentConfig):
    sim = config.simulate
    if isinstance(sim, CompetingRisksSimulation):
        truth = CompetingRisksParams(sim.pi, sim.p, sim.q)
        return cr_simulate(sim.m, sim.N, truth, seed=sim.seed,
                           sacrifice_fraction=sim.sacrifice_fraction)
    if isinstance(sim, MixtureSimulation):
        return gmm_sample(sim.n, sim.weights, sim.means, sim.variance, seed=sim.seed)
    raise ConfigError("config has no simulate block")


def load_data(config: ExperimentConfig):
    if config.data_path is None:
        return simulate_data(config)
    if config.model == "competing_risks":
        return io.read_cr_data(config.data_path)
    return io.read_mixture_data(config.data_path)


def prepare(config: ExperimentConfig, data=None) -> Experiment:
    data = load_data(config) if data is None else data
    if config.model == "competing_risks":
        model = CompetingRisksModel(data)
        problem = model.problem(config.augmented)
        theta0 = CompetingRisksParams.constant(model.m).vector
    else:
        model = GaussianMixtureModel(data, config.n_components, config.known_variance)
        problem = model.problem()
        theta0 = model.initial_point()
    if config.initial_point is not None:
        theta0 = np.array(config.initial_point, dtype=float)
        if theta0.shape != (problem.dimension,):
            raise PreconditionError(f"initial_point needs {problem.dimension} values")
    if not problem.domain_guard(theta0):
        raise PreconditionError("initial point is outside the problem domain")
    return Experiment(problem, theta0, model)


def execute(config: ExperimentConfig, experiment: Experiment, out_dir) -> tuple[RunTrace, int]:
    """Run one fit and write its files into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    solver = AnnealingSolver(replace(config.solver, seed=config.seed))
    problem = experiment.problem
    try:
        trace = run(problem, config.schedule, solver, experiment.theta0, config.stop)
    except MonotonicityViolation as exc:
        log.error("%s", exc)
        exc.trace.termination = "monotonicity_violation"
        io.write_trace(out_dir / "trace.csv", exc.trace)
        return exc.trace, EXIT_MONOTONICITY
    io.write_trace(out_dir / "trace.csv", trace)
    io.write_final_params(out_dir / "final_params.csv", problem.param_names, trace.final_theta)
    report = kkt_check(problem, trace.final_theta)
    labels = [problem.divergence.label(i) for i in range(problem.divergence.n_terms)]
    (out_dir / "kkt_report.txt").write_text(
        io.format_kkt_report(report, problem.param_names, labels, trace.loglik[-1]),
        encoding="utf-8")
    if trace.termination == "solver_failure":
        return trace, EXIT_SOLVER_FAILURE
    return trace, EXIT_OK


def cmd_fit(config: ExperimentConfig) -> int:
    experiment = prepare(config)
    trace, status = execute(config, experiment, config.output_dir)
    log.info("fit finished after %d iterations (%s), loglik %.10g",
             len(trace) - 1, trace.termination, trace.loglik[-1])
    return status


def run_dir_name(beta: float, seed: int) -> str:
    return f"beta_{io.fmt(float(beta))}_seed_{seed}"


def cmd_sweep(config: ExperimentConfig) -> int:
    """Cross product of ``config.betas`` and ``config.seeds`` on one dataset."""
    data = load_data(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, status = [], EXIT_OK
    for beta in config.betas:
        for seed in config.seeds:
            cfg = replace(config, schedule=RelaxationSchedule.constant(beta), seed=int(seed))
            trace, code = execute(cfg, prepare(cfg, data), out / "runs" / run_dir_name(beta, seed))
            if code != EXIT_OK:
                log.warning("run beta=%s seed=%s ended with %s", beta, seed, trace.termination)
                status = max(status, code)
            ll = trace.loglik
            rows.append((io.fmt(float(beta)), str(seed), str(len(trace) - 1), io.fmt(ll[-1]),
                         io.fmt(ll[50]) if len(ll) > 50 else "", trace.termination))
    with open(out / "sweep_summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        writer.writerows(rows)
    return status


def cmd_simulate(config: ExperimentConfig) -> int:
    data = simulate_data(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if config.model == "competing_risks":
        io.write_cr_data(out / "data.csv", data)
    else:
        io.write_mixture_data(out / "data.csv", data)
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "sweep": cmd_sweep, "simulate": cmd_simulate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kullprox", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--output", type=Path, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="seed (overrides config)")
        if name == "fit":
            p.add_argument("--beta", type=float, help="constant relaxation (overrides schedule)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    if args.output is not None:
        config = replace(config, output_dir=str(args.output))
    if args.seed is not None:
        if args.command == "simulate":
            if config.simulate is None:
                raise ConfigError("simulate needs a simulate block")
            config = replace(config, simulate=replace(config.simulate, seed=args.seed))
        else:
            config = replace(config, seed=args.seed)
    if getattr(args, "beta", None) is not None:
        if not args.beta >= 0:
            raise ConfigError("--beta must be nonnegative")
        config = replace(config, schedule=RelaxationSchedule.constant(args.beta))
    return config


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        config = apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](config)
    except (ConfigError, io.DataFormatError, PreconditionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
