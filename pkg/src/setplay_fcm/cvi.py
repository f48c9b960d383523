"""Crisp and fuzzy silhouette validity indices for a fuzzy partition."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


class AllWeightsZeroWarning(UserWarning):
    """Every column of the partition has a tie between its two largest memberships."""


@dataclass(frozen=True)
class SilhouetteConfig:
    alpha: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError("alpha must be finite and >= 0")


def crisp_assignment(partition) -> np.ndarray:
    """Index of the largest membership per column (lowest index on ties)."""
    return np.argmax(np.asarray(partition, dtype=float), axis=0)


def silhouette_object(j: int, assignment, pairwise) -> float:
    assignment = np.asarray(assignment)
    d = np.asarray(pairwise, dtype=float)[j]
    own = assignment[j]
    mates = (assignment == own)
    mates[j] = False
    if not mates.any():
        return 0.0
    a = d[mates].mean()
    b = np.inf
    for q in np.unique(assignment):
        if q == own:
            continue
        b = min(b, d[assignment == q].mean())
    if not np.isfinite(b):
        return 0.0
    top = max(a, b)
    if top == 0:
        return 0.0
    return float((b - a) / top)


def silhouettes(assignment, pairwise) -> np.ndarray:
    """All per-object silhouettes at once; same rules as :func:`silhouette_object`."""
    labels_of = np.asarray(assignment)
    d = np.asarray(pairwise, dtype=float)
    labels, own = np.unique(labels_of, return_inverse=True)
    onehot = (own[None, :] == np.arange(len(labels))[:, None]).astype(float)
    counts = onehot.sum(axis=1)
    sums = d @ onehot.T  # zero diagonal: an object never adds to its own sum
    idx = np.arange(len(labels_of))
    mates = counts[own] - 1
    out = np.zeros(len(labels_of))
    if len(labels) < 2:
        return out
    means = sums / counts
    a = np.where(mates > 0, sums[idx, own] / np.maximum(mates, 1), 0.0)
    means[idx, own] = np.inf
    b = means.min(axis=1)
    top = np.maximum(a, b)
    ok = (mates > 0) & (top > 0)
    out[ok] = (b[ok] - a[ok]) / top[ok]
    return out


def crisp_silhouette(partition, pairwise) -> float:
    """Plain mean of the per-object silhouettes under the crisp assignment."""
    return float(np.mean(silhouettes(crisp_assignment(partition), pairwise)))


def membership_gaps(partition) -> np.ndarray:
    """Largest minus second-largest membership of every column."""
    mu = np.sort(np.asarray(partition, dtype=float), axis=0)
    return mu[-1] - mu[-2]


def fuzzy_silhouette_ex(partition, pairwise, cfg: SilhouetteConfig = SilhouetteConfig()) -> tuple[float, bool]:
    """Fuzzy silhouette and a flag set when every weight is zero (value 0 then)."""
    mu = np.asarray(partition, dtype=float)
    if mu.shape[0] < 2:
        raise ValueError("the fuzzy silhouette needs at least two clusters")
    s = silhouettes(crisp_assignment(mu), pairwise)
    # numpy defines 0.0 ** 0 == 1, which makes alpha=0 the crisp silhouette
    w = membership_gaps(mu) ** cfg.alpha
    total = w.sum()
    if total == 0:
        warnings.warn("all membership gaps are zero; fuzzy silhouette set to 0",
                      AllWeightsZeroWarning, stacklevel=2)
        return 0.0, True
    value = float(np.dot(w, s) / total)
    return min(1.0, max(-1.0, value)), False


def fuzzy_silhouette(partition, pairwise, cfg: SilhouetteConfig = SilhouetteConfig()) -> float:
    return fuzzy_silhouette_ex(partition, pairwise, cfg)[0]
