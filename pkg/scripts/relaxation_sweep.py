"""Compare constant relaxation weights on the five-interval synthetic study.

Runs beta in {100, 1, 0.01} for ten seeds, 100 iterations each, and writes
one trace per run plus a summary table with the last likelihood increase and
the log-likelihood at iteration 50.

    python scripts/relaxation_sweep.py --out results/sweep
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from kullprox import AnnealingConfig, AnnealingSolver, RelaxationSchedule, StoppingRule, run
from kullprox.diagnostics import monotonicity_audit
from kullprox.io import fmt, write_trace
from kullprox.models import cr_problem
from kullprox.scenarios import main_dataset


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("results/sweep"))
    parser.add_argument("--betas", type=float, nargs="+", default=[100.0, 1.0, 0.01])
    parser.add_argument("--seeds", type=int, nargs="+", default=list(range(1, 11)))
    parser.add_argument("--iters", type=int, default=100)
    args = parser.parse_args()

    problem = cr_problem(main_dataset())
    args.out.mkdir(parents=True, exist_ok=True)
    rows = []
    for beta in args.betas:
        schedule = RelaxationSchedule.constant(beta)
        for seed in args.seeds:
            trace = run(problem, schedule, AnnealingSolver(AnnealingConfig(seed=seed)),
                        np.full(problem.dimension, 0.5), StoppingRule(args.iters))
            write_trace(args.out / f"trace_beta_{fmt(beta)}_seed_{seed}.csv", trace)
            audit = monotonicity_audit(trace, schedule)
            at50 = trace.loglik[50] if len(trace) > 50 else np.nan
            rows.append((beta, seed, trace.loglik[-1], at50, trace.increments()[-1],
                         len(audit.violations)))
            print(f"beta={beta:<6g} seed={seed:<3d} loglik={trace.loglik[-1]:.8f} "
                  f"last_increase={trace.increments()[-1]:.2e}")

    with open(args.out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["beta", "seed", "final_loglik", "loglik_at_50", "last_increase", "violations"])
        writer.writerows([[fmt(v) for v in row] for row in rows])

    print("\nmedian loglik at iteration 50")
    for beta in args.betas:
        med = np.median([r[3] for r in rows if r[0] == beta])
        print(f"  beta={beta:<6g} {med:.9f}")


if __name__ == "__main__":
    main()
