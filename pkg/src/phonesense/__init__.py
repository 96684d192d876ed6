"""Detection of phone-usage events from multimodal biometric time series."""

from .classifiers import ModelSpec, predict_score, rf_train, svm_train, train_model
from .dimreduce import ReductionSpec, fit_reducer, kbest_fit, pca_fit, reduce_apply
from .errors import PhonesenseError
from .evaluation import (
    EvaluationReport,
    PipelineConfig,
    kl_divergence,
    mcnemar,
    roc_auc,
    run_loo,
)
from .features import compute_features, derivatives, fuse, zscore_apply, zscore_fit
from .preprocess import SmoothingSpec, WindowSample, build_dataset, extract_window, smooth
from .session import (
    CHANNELS,
    SIGNAL_SETS,
    Session,
    SignalSeries,
    WindowPolicy,
    load_session,
    resample_1hz,
    select_event_anchors,
    write_session,
)
from .synthgen import GeneratorPreset, generate_dataset, generate_session, get_preset

__version__ = "0.1.0"

__all__ = [
    "CHANNELS",
    "SIGNAL_SETS",
    "EvaluationReport",
    "GeneratorPreset",
    "ModelSpec",
    "PhonesenseError",
    "PipelineConfig",
    "ReductionSpec",
    "Session",
    "SignalSeries",
    "SmoothingSpec",
    "WindowPolicy",
    "WindowSample",
    "build_dataset",
    "compute_features",
    "derivatives",
    "extract_window",
    "fit_reducer",
    "fuse",
    "generate_dataset",
    "generate_session",
    "get_preset",
    "kbest_fit",
    "kl_divergence",
    "load_session",
    "mcnemar",
    "pca_fit",
    "predict_score",
    "reduce_apply",
    "resample_1hz",
    "rf_train",
    "roc_auc",
    "run_loo",
    "select_event_anchors",
    "smooth",
    "svm_train",
    "train_model",
    "write_session",
    "zscore_apply",
    "zscore_fit",
]
