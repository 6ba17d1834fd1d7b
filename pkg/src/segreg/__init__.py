"""Segmented regression with continuous and discontinuous change-points."""

from __future__ import annotations

__version__ = "0.1.0"

from .asymptotics import (FunctionalEstimate, WalkConfig, simulate_brownian_functional,
                          simulate_random_walk_q)
from .criteria import CriterionScore, penalty, score
from .errors import (DataError, DegenerateSegmentError, DomainError, ExperimentAbortedError,
                     HorizonTooSmallError, InfeasibleError, InvalidModelError,
                     NonConvergenceError, ResponseSupportError, SegRegError)
from .families import ResponseFamily
from .ingest import Series, SeriesSpec, load_series_csv
from .kl import KLResult, kl_divergence
from .model import (ChangePointSpec, Dataset, SegmentParams, SegmentedModel, log_likelihood,
                    predict_mean, segment_index)
from .montecarlo import (BiasReport, ExperimentConfig, SelectionExperimentReport,
                         bias_experiment, generate_replication, selection_experiment)
from .search import (ContinuityPattern, FitResult, SearchConfig, candidate_locations,
                     fit_continuous, fit_discontinuous, fit_mixed, fit_path)
from .segfit import fit_constrained, fit_segment, fit_variance
from .selection import SelectionReport, SelectionSpace, select_model

__all__ = [
    "BiasReport", "ChangePointSpec", "ContinuityPattern", "CriterionScore", "DataError",
    "Dataset", "DegenerateSegmentError", "DomainError", "ExperimentAbortedError",
    "ExperimentConfig", "FitResult", "FunctionalEstimate", "HorizonTooSmallError",
    "InfeasibleError", "InvalidModelError", "KLResult", "NonConvergenceError",
    "ResponseFamily", "ResponseSupportError", "SearchConfig", "SegRegError", "SegmentParams",
    "SegmentedModel", "SelectionExperimentReport", "SelectionReport", "SelectionSpace",
    "Series", "SeriesSpec", "WalkConfig", "bias_experiment", "candidate_locations",
    "fit_constrained", "fit_continuous", "fit_discontinuous", "fit_mixed", "fit_path",
    "fit_segment", "fit_variance", "generate_replication", "kl_divergence", "load_series_csv",
    "log_likelihood", "penalty", "predict_mean", "score", "segment_index", "select_model",
    "selection_experiment", "simulate_brownian_functional", "simulate_random_walk_q",
]
