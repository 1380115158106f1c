"""Drivers built on the walker and the scheduler."""

from .anneal import AnnealSchedule, anneal_minimize, anneal_schedule
from .drift import ComponentChain, DriftScheduler, drift_track, drift_track_ensemble, mixture_sample
from .posterior import ExpFamilyModel, PosteriorTracker, posterior_ingest
from .predict import (
    PredictorState,
    best_fixed_comparator,
    default_eta,
    make_predictor,
    predict_round,
    realized_regret,
)

__all__ = [
    "AnnealSchedule",
    "anneal_minimize",
    "anneal_schedule",
    "ComponentChain",
    "DriftScheduler",
    "drift_track",
    "drift_track_ensemble",
    "mixture_sample",
    "ExpFamilyModel",
    "PosteriorTracker",
    "posterior_ingest",
    "PredictorState",
    "best_fixed_comparator",
    "default_eta",
    "make_predictor",
    "predict_round",
    "realized_regret",
]
