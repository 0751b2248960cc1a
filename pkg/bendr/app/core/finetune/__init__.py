"""
Downstream fine-tuning: transfer variants, balanced training, cross-validation and metrics.
"""

from bendr.app.core.finetune.classifiers import (
    LINEAR_VARIANTS, PRETRAINED_VARIANTS, TRANSFORMER_VARIANTS, Classifier, LinearClassifier, TransformerClassifier,
    build_variant, classifier_from_checkpoint, pool_bendr, regularize_sequence, segment_bounds, trainable_mask,
)
from bendr.app.core.finetune.sampling import balance_sampler
from bendr.app.core.finetune.metrics import auroc, bootstrap_ci, chance_level, compute_metric, normalize_metric
from bendr.app.core.finetune.training import TrainingPlan, predict_probabilities, train_classifier
from bendr.app.core.finetune.folds import LabelledTrials, MetricsReport, ReportRow, fold_splits, run_folds

__all__ = [
    "LINEAR_VARIANTS", "PRETRAINED_VARIANTS", "TRANSFORMER_VARIANTS", "Classifier", "LinearClassifier",
    "TransformerClassifier", "build_variant", "classifier_from_checkpoint", "pool_bendr", "regularize_sequence",
    "segment_bounds", "trainable_mask",
    "balance_sampler",
    "auroc", "bootstrap_ci", "chance_level", "compute_metric", "normalize_metric",
    "TrainingPlan", "predict_probabilities", "train_classifier",
    "LabelledTrials", "MetricsReport", "ReportRow", "fold_splits", "run_folds",
]
