"""Temporal popularity forecasting for social media posts.

The package turns post metadata plus precomputed feature packs into 30-day
popularity curves: ingest and clean JSONL records, train the recurrent
multimodal model with the composite gradient loss, evaluate with per-day MAE
and rank correlation, and serve predictions from binary checkpoints.
"""

from .analysis import (
    correlation_matrices,
    distribution_summary,
    group_stats,
    pearson,
    rank_average_ties,
    spearman,
)
from .autodiff import Tensor, backward
from .errors import (
    CheckpointError,
    ChecksumError,
    ConfigError,
    DataError,
    FeaturePackError,
    NumericalError,
    PopcastError,
    ShapeError,
    UndefinedCorrelationError,
    VocabularyError,
)
from .harness import RunConfig, TrainResult, cross_validate, evaluate, predict, train
from .loss import LossReport, LossWeights, anneal, cgl
from .metrics import EvalReport, amae, asrc, evaluate_forecast, mae_daily, src_daily
from .model import Model, ModelConfig, ModelParams, Vocabulary, init_params, param_count
from .optim import AdamState, PlateauState, adam_step, plateau_update
from .packs import FeaturePack, read_pack, write_pack
from .records import (
    Normalizer,
    NumericFeatures,
    PopularitySeries,
    PostRecord,
    RejectionReport,
    clean_outliers,
    derive_numeric,
    fit_normalizer,
    ingest,
    make_folds,
    popularity_score,
    write_records,
)
from .synth import SynthConfig, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "CheckpointError",
    "ChecksumError",
    "ConfigError",
    "DataError",
    "EvalReport",
    "FeaturePack",
    "FeaturePackError",
    "LossReport",
    "LossWeights",
    "Model",
    "ModelConfig",
    "ModelParams",
    "Normalizer",
    "NumericFeatures",
    "NumericalError",
    "PlateauState",
    "PopcastError",
    "PopularitySeries",
    "PostRecord",
    "RejectionReport",
    "RunConfig",
    "ShapeError",
    "SynthConfig",
    "Tensor",
    "TrainResult",
    "UndefinedCorrelationError",
    "Vocabulary",
    "VocabularyError",
    "adam_step",
    "amae",
    "anneal",
    "asrc",
    "backward",
    "cgl",
    "clean_outliers",
    "correlation_matrices",
    "cross_validate",
    "derive_numeric",
    "distribution_summary",
    "evaluate",
    "evaluate_forecast",
    "fit_normalizer",
    "generate_synthetic",
    "group_stats",
    "ingest",
    "init_params",
    "mae_daily",
    "make_folds",
    "param_count",
    "pearson",
    "plateau_update",
    "popularity_score",
    "predict",
    "rank_average_ties",
    "read_pack",
    "spearman",
    "src_daily",
    "train",
    "write_pack",
    "write_records",
]
