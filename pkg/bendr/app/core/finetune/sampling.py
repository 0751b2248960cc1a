"""
Class-balanced epoch sampling.
"""

from typing import Optional

import numpy as np


def balance_sampler(labels, rng: np.random.Generator, num_classes: Optional[int] = None) -> np.ndarray:
    """
    Indices of one class-balanced training epoch.

    Every class contributes as many draws as the least frequent class has examples. The
    least frequent classes contribute each of their examples once; larger classes are
    sampled with replacement. The result is shuffled.

    Args:
        labels: Integer class label of every example.
        rng (np.random.Generator): Source of the draws.
        num_classes (Optional[int]): Expected classes `0..num_classes-1`; every one must be present.

    Returns:
        np.ndarray: Example indices.

    Raises:
        ValueError: If fewer than two classes are present, or an expected class has no example.
    """
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    if num_classes is not None:
        missing = sorted(set(range(num_classes)) - set(classes.tolist()))
        if missing:
            raise ValueError(f"Classes {missing} have no training examples")
    if len(classes) < 2:
        raise ValueError(f"Balanced sampling needs at least two classes, got {classes.tolist()}")

    per_class = int(counts.min())
    draws = []
    for cls, count in zip(classes, counts):
        members = np.flatnonzero(labels == cls)
        if count == per_class:
            draws.append(rng.permutation(members))
        else:
            draws.append(rng.choice(members, size=per_class, replace=True))
    return rng.permutation(np.concatenate(draws))
