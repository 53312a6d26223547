from .competing_risks import (
    CompetingRisksData,
    CompetingRisksModel,
    CompetingRisksParams,
    cell_probabilities,
    cr_divergence,
    cr_divergence_augmented,
    cr_lambda,
    cr_loglik,
    cr_problem,
    cr_q_function,
    cr_simulate,
)
from .mixture import GaussianMixtureModel, gmm_em_step, gmm_problem, gmm_sample

__all__ = [
    "CompetingRisksData",
    "CompetingRisksModel",
    "CompetingRisksParams",
    "GaussianMixtureModel",
    "cell_probabilities",
    "cr_divergence",
    "cr_divergence_augmented",
    "cr_lambda",
    "cr_loglik",
    "cr_problem",
    "cr_q_function",
    "cr_simulate",
    "gmm_em_step",
    "gmm_problem",
    "gmm_sample",
]
