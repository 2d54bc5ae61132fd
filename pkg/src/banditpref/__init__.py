"""Reward learning from pairwise and M-wise preferences on multi-armed bandits."""

__version__ = "0.1.0"

from .errors import ConfigurationError, DomainError, NumericError
from .estimators import (LaplacianMatrix, SoftLabelState, StationarityResidual, TrainConfig, TrainTrace,
                         empirical_ce_gradient, empirical_ce_loss, fit_ids, fit_ids_v2, fit_mle,
                         fit_pessimistic_mle, ids_population_residual, laplacian, one_step_gd,
                         pessimism_penalties, population_ce_loss)
from .policy import (KlRewardPoint, PolicyVector, closed_form_policy, expected_true_reward,
                     kl_closed_form, kl_reward_curve, suboptimality)
from .preference_model import (ComparisonDistribution, MultiwiseDataset, PairwiseDataset, RewardVector,
                               btl_prob, hard_instance, pl_permutation_prob, sample_multiwise_dataset,
                               sample_pairwise_dataset)

__all__ = [
    "ConfigurationError", "DomainError", "NumericError",
    "LaplacianMatrix", "SoftLabelState", "StationarityResidual", "TrainConfig", "TrainTrace",
    "empirical_ce_gradient", "empirical_ce_loss", "fit_ids", "fit_ids_v2", "fit_mle",
    "fit_pessimistic_mle", "ids_population_residual", "laplacian", "one_step_gd",
    "pessimism_penalties", "population_ce_loss",
    "KlRewardPoint", "PolicyVector", "closed_form_policy", "expected_true_reward",
    "kl_closed_form", "kl_reward_curve", "suboptimality",
    "ComparisonDistribution", "MultiwiseDataset", "PairwiseDataset", "RewardVector",
    "btl_prob", "hard_instance", "pl_permutation_prob", "sample_multiwise_dataset",
    "sample_pairwise_dataset",
]
