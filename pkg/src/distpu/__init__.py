"""PU learning lab: label distribution alignment (Dist-PU) with uPU/nnPU baselines."""

__version__ = "0.1.0"

from .data import (
    Batch,
    BatchPlan,
    LabeledDataset,
    PUDataset,
    batch_iter,
    binarize,
    empirical_prior,
    load_dataset,
    make_gaussian_mixture,
    normalize,
    scar_split,
)
from .estimator import DistPUClassifier
from .losses import (
    LossBreakdown,
    LossWeights,
    MixedBatch,
    dist_alignment_risk,
    entropy_loss,
    mixed_entropy_loss,
    mixup_loss,
    naive_bce_risk,
    nnpu_risk,
    sample_mixup,
    total_loss,
    upu_risk,
)
from .metrics import (
    ErrorHistogram,
    MetricReport,
    auc,
    average_precision,
    classification_report,
    error_histogram,
    hard_labels,
    metric_report,
    predicted_prior,
)
from .mlp import (
    MLPConfig,
    ParamSet,
    backward,
    finite_diff_grad,
    forward,
    init_params,
    load_params,
    save_params,
    score,
    score_grad,
)
from .training import (
    Ablation,
    EpochLog,
    OptimizerState,
    TrainConfig,
    VariantInfo,
    adam_update,
    cosine_value,
    train,
    variant_objective,
)

__all__ = [
    "Ablation",
    "Batch",
    "BatchPlan",
    "DistPUClassifier",
    "EpochLog",
    "ErrorHistogram",
    "LabeledDataset",
    "LossBreakdown",
    "LossWeights",
    "MetricReport",
    "MixedBatch",
    "MLPConfig",
    "OptimizerState",
    "ParamSet",
    "PUDataset",
    "TrainConfig",
    "VariantInfo",
    "adam_update",
    "auc",
    "average_precision",
    "backward",
    "batch_iter",
    "binarize",
    "classification_report",
    "cosine_value",
    "dist_alignment_risk",
    "empirical_prior",
    "entropy_loss",
    "error_histogram",
    "finite_diff_grad",
    "forward",
    "hard_labels",
    "init_params",
    "load_dataset",
    "load_params",
    "make_gaussian_mixture",
    "metric_report",
    "mixed_entropy_loss",
    "mixup_loss",
    "naive_bce_risk",
    "nnpu_risk",
    "normalize",
    "predicted_prior",
    "sample_mixup",
    "save_params",
    "scar_split",
    "score",
    "score_grad",
    "total_loss",
    "train",
    "upu_risk",
    "variant_objective",
]
