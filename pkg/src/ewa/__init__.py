"""Exponentially weighted aggregation of linear smoothers under sub-Gaussian noise."""

from ewa.aggregation import (
    WeightVector,
    aggregate,
    gibbs_weights,
    kl_divergence,
    variational_gap,
)
from ewa.estimator import EWAggregator
from ewa.estimators import (
    EstimatorCollection,
    LinearEstimator,
    make_collection,
    make_rank_projection,
    make_smoothed_projection,
    trace_stats,
)
from ewa.noise import NoiseModel, mgf_check, sample_noise, subgaussian_param
from ewa.risk import AggregationConfig, BoundConstants, sure, tilde_sup_norm

__version__ = "0.1.0"

__all__ = [
    "AggregationConfig",
    "BoundConstants",
    "EWAggregator",
    "EstimatorCollection",
    "LinearEstimator",
    "NoiseModel",
    "WeightVector",
    "aggregate",
    "gibbs_weights",
    "kl_divergence",
    "make_collection",
    "make_rank_projection",
    "make_smoothed_projection",
    "mgf_check",
    "sample_noise",
    "subgaussian_param",
    "sure",
    "tilde_sup_norm",
    "trace_stats",
    "variational_gap",
]
