"""Canonical synthetic datasets used by the experiments and the test suite.

Every dataset here is fully determined by the constants below, so traces
produced from them are reproducible across machines.
"""
from __future__ import annotations

import numpy as np

from .models.competing_risks import CompetingRisksData, CompetingRisksParams, cr_simulate
from .models.mixture import GaussianMixtureModel, gmm_sample

# five-interval study used for the relaxation comparison
MAIN_TRUTH = CompetingRisksParams(
    pi=[0.95, 0.85, 0.75, 0.6, 0.5],
    p=[0.98, 0.95, 0.93, 0.9, 0.88],
    q=[0.95, 0.93, 0.9, 0.88, 0.85],
)
MAIN_N = 200
MAIN_SEED = 1

# large-sample study for recovering the generating parameters
CONSISTENCY_TRUTH = CompetingRisksParams(pi=[0.9, 0.8, 0.7], p=[0.97, 0.95, 0.93],
                                         q=[0.98, 0.97, 0.97])
CONSISTENCY_N = 10_000

# single interval, used for the grid oracle and for the boundary study
SINGLE_TRUTH = CompetingRisksParams(pi=[0.8], p=[0.9], q=[0.85])
SINGLE_SEED = 5
BOUNDARY_TRUTH = CompetingRisksParams(pi=[0.8], p=[0.9], q=[0.9])
BOUNDARY_SEED = 11

MIXTURE_WEIGHTS = (0.4, 0.6)
MIXTURE_MEANS = (-1.5, 1.5)
MIXTURE_N = 50
MIXTURE_SEED = 3


def main_dataset() -> CompetingRisksData:
    return cr_simulate(5, MAIN_N, MAIN_TRUTH, seed=MAIN_SEED)


def consistency_dataset(seed: int = 0) -> CompetingRisksData:
    return cr_simulate(3, CONSISTENCY_N, CONSISTENCY_TRUTH, seed=seed)


def single_interval_dataset() -> CompetingRisksData:
    return cr_simulate(1, 200, SINGLE_TRUTH, seed=SINGLE_SEED)


def drop_category(data: CompetingRisksData, j: int, column: str) -> CompetingRisksData:
    """Zero one count in interval ``j`` (0-based) and rebuild the census.

    ``N`` and ``N_alive`` are recomputed so that every interval still
    removes exactly the animals counted in it.
    """
    cols = {"c": data.c.copy(), "b1": data.b1.copy(), "a2": data.a2.copy(), "b2": data.b2.copy()}
    if column not in cols:
        raise ValueError(f"unknown count column {column!r}")
    cols[column][j] = 0
    removed = cols["c"] + cols["b1"] + cols["a2"] + cols["b2"]
    n0 = int(removed.sum())
    return CompetingRisksData(n0, n0 - np.cumsum(removed), cols["c"], cols["b1"],
                              cols["a2"], cols["b2"])


def boundary_dataset() -> CompetingRisksData:
    """No deaths without tumor are observed.

    The likelihood then increases as ``q_1 -> 1``, so the iterates approach
    the face where the tumor-split statistic ``t''_1`` vanishes.
    """
    return drop_category(cr_simulate(1, 200, BOUNDARY_TRUTH, seed=BOUNDARY_SEED), 0, "b1")


def mixture_model() -> GaussianMixtureModel:
    x = gmm_sample(MIXTURE_N, MIXTURE_WEIGHTS, MIXTURE_MEANS, 1.0, seed=MIXTURE_SEED)
    return GaussianMixtureModel(x, n_components=2, known_variance=1.0)
