"""Fit the single-interval study with no deaths without tumor and check KKT.

The likelihood of that dataset is maximized on the face q = 1, where the
tumor-split statistic t''_1 vanishes. The script prints the closed-form
boundary maximizer, the KPP limit for a few seeds and the KKT report.

    python scripts/boundary_kkt.py --seeds 0 1 2
"""
import argparse

import numpy as np

from kullprox import AnnealingConfig, AnnealingSolver, RelaxationSchedule, StoppingRule, run
from kullprox.diagnostics import kkt_check
from kullprox.io import format_kkt_report
from kullprox.models import cr_problem
from kullprox.scenarios import boundary_dataset


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, nargs="+", default=[0])
    parser.add_argument("--budget", type=int, default=20_000)
    parser.add_argument("--iters", type=int, default=60)
    args = parser.parse_args()

    data = boundary_dataset()
    problem = cr_problem(data)
    W = data.survival_weights()[0]
    exact = np.array([data.b2[0] / (data.a2[0] + data.b2[0]), W / (W + data.c[0]), 1.0])
    print("closed-form boundary maximizer (pi, p, q):", exact)

    labels = [problem.divergence.label(i) for i in range(problem.divergence.n_terms)]
    for seed in args.seeds:
        trace = run(problem, RelaxationSchedule.constant(1.0),
                    AnnealingSolver(AnnealingConfig(budget=args.budget, seed=seed)),
                    np.full(3, 0.5), StoppingRule(args.iters))
        theta = trace.final_theta
        print(f"\nseed {seed}: theta = {theta}, distance to maximizer {np.abs(theta - exact).max():.2e}")
        report = kkt_check(problem, theta)
        print(format_kkt_report(report, problem.param_names, labels, trace.loglik[-1]), end="")


if __name__ == "__main__":
    main()
