"""
Downstream metrics, chance normalization and subject-level bootstrap intervals.
"""

from typing import Sequence, Tuple

import numpy as np
from scipy.stats import bootstrap, rankdata
from sklearn.metrics import accuracy_score, balanced_accuracy_score

from bendr.app.core.logger import get_logger


logger = get_logger(__name__)

METRICS = ("BAC", "AUROC", "accuracy")


def auroc(labels, scores) -> float:
    """
    Area under the ROC curve of binary `labels` against positive-class `scores`.

    Rank-sum (Mann-Whitney) form; tied scores get averaged ranks, i.e. half credit per tied pair.

    Raises:
        ValueError: If `labels` do not hold exactly two classes.
    """
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("AUROC is undefined when only one class is present")
    if len(classes) > 2:
        raise ValueError(f"AUROC needs binary labels, got classes {classes.tolist()}")
    positive = labels == labels.max()
    ranks = rankdata(np.asarray(scores, dtype=np.float64))
    n_pos, n_neg = int(positive.sum()), int((~positive).sum())
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def compute_metric(kind: str, labels, probabilities) -> float:
    """
    Score class `probabilities` (N x classes) against integer `labels`.

    BAC and accuracy use the arg-max prediction; AUROC uses the probability of class 1.
    """
    labels = np.asarray(labels)
    probabilities = np.asarray(probabilities, dtype=np.float64)
    if kind == "AUROC":
        return auroc(labels, probabilities[:, 1])
    predictions = probabilities.argmax(axis=1)
    if kind == "BAC":
        return float(balanced_accuracy_score(labels, predictions))
    if kind == "accuracy":
        return float(accuracy_score(labels, predictions))
    raise ValueError(f"Unknown metric '{kind}'; expected one of {METRICS}")


def chance_level(kind: str, num_classes: int) -> float:
    """ Chance value of a metric: 0.5 for AUROC, 1/classes otherwise. """
    if kind == "AUROC":
        return 0.5
    return 1.0 / num_classes


def normalize_metric(value: float, kind: str, num_classes: int) -> float:
    """ `(value - chance) / (1 - chance)`, clipped to [0, 1]. """
    chance = chance_level(kind, num_classes)
    return float(np.clip((value - chance) / (1.0 - chance), 0.0, 1.0))


def bootstrap_ci(values: Sequence[float], resamples: int = 1000, confidence_level: float = 0.95,
                 seed: int = 0) -> Tuple[float, float]:
    """
    Percentile bootstrap interval of the mean of per-subject values.

    A single subject (or identical values) gives the degenerate interval `(v, v)`.
    """
    values = np.asarray(values, dtype=np.float64)
    if len(values) == 0:
        raise ValueError("bootstrap_ci needs at least one value")
    if len(values) == 1 or np.all(values == values[0]):
        return float(values.mean()), float(values.mean())
    result = bootstrap((values,), np.mean, n_resamples=resamples, confidence_level=confidence_level,
                       method="percentile", random_state=np.random.default_rng(seed))
    return float(result.confidence_interval.low), float(result.confidence_interval.high)
