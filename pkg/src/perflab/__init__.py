"""Prediction as a feature: identifying performative effects from observational data.

Structural causal model ``x -> yhat = f(x) -> y = g(x, yhat)``, predictors,
meta-model estimators, identifiability auditors, an interference model and
a seeded experiment harness.
"""
from .estimators import HypothesisClass, FittedModel, evaluate, fit_meta_model
from .experiments import ExperimentResult, ExperimentSpec, export_result, run_experiment
from .linalg import ols_minimum_norm
from .rng import SeedPlan
from .scm import CovariateSource, Dataset, NoiseSpec, OutcomeMechanism, generate_dataset

__version__ = "0.1.0"

__all__ = [
    "CovariateSource", "Dataset", "ExperimentResult", "ExperimentSpec", "FittedModel",
    "HypothesisClass", "NoiseSpec", "OutcomeMechanism", "SeedPlan", "evaluate", "export_result",
    "fit_meta_model", "generate_dataset", "ols_minimum_norm", "run_experiment",
]
