"""System-call language models for host intrusion detection."""

from ._sclm import (
    ConfigError,
    EnsembleSpec,
    LmConfig,
    Model,
    ParseError,
    SynthConfig,
    TrainingError,
    auc,
    build_ensemble,
    far_at_dr,
    gen_synthetic,
    kmeans_scores,
    knn_scores,
    load_adfa_dir,
    load_flat_file,
    roc,
)

__all__ = [
    "ConfigError",
    "EnsembleSpec",
    "LmConfig",
    "Model",
    "ParseError",
    "SynthConfig",
    "TrainingError",
    "auc",
    "build_ensemble",
    "far_at_dr",
    "gen_synthetic",
    "kmeans_scores",
    "knn_scores",
    "load_adfa_dir",
    "load_flat_file",
    "roc",
]
