"""Fuzzy C-Means over an arbitrary symmetric dissimilarity.

Centroids are *hybrid*: scalar features are membership-weighted means, while
non-scalar features (trees, lists) are copied from the instance with the
highest membership. Because such a centroid is not guaranteed to lower the
objective, a new centroid replaces the old one only when it does not raise
that cluster's share of the objective; this keeps the objective history
monotone for any dissimilarity.
"""

from __future__ import annotations

import dataclasses
import logging
import warnings
from dataclasses import dataclass, field
from functools import singledispatch
from typing import Any, Callable, Sequence

import numpy as np

from .model import SetplayFeatures

log = logging.getLogger(__name__)

COLUMN_TOL = 1e-9


class DegenerateDatasetWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FcmConfig:
    c: int
    m: float = 2.0
    max_iters: int = 300
    epsilon: float = 1e-6
    seed: int = 0
    init: str = "partition"

    def __post_init__(self):
        if self.c < 2:
            raise ValueError("c must be >= 2")
        if not self.m > 1:
            raise ValueError("fuzzifier m must be > 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.init not in ("partition", "prototype"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass(frozen=True)
class PartitionMatrix:
    """C x N membership matrix; every column sums to one."""

    mu: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        if mu.ndim != 2:
            raise ValueError("partition must be a 2-D C x N array")
        if mu.size and (mu.min() < -COLUMN_TOL or mu.max() > 1 + COLUMN_TOL):
            raise ValueError("memberships must lie in [0, 1]")
        if mu.size and np.max(np.abs(mu.sum(axis=0) - 1.0)) > COLUMN_TOL:
            raise ValueError("partition columns must sum to 1")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    @property
    def shape(self) -> tuple[int, int]:
        return self.mu.shape

    def __array__(self, dtype=None, copy=None):
        return self.mu if dtype is None else self.mu.astype(dtype)


@dataclass(frozen=True)
class HybridCentroid:
    scalar_part: np.ndarray
    source_index: int
    instance: Any = field(repr=False)

    @property
    def nonscalar_part(self) -> tuple:
        return nonscalar_view(self.instance)


@dataclass
class FcmResult:
    partition: PartitionMatrix
    centroids: list[HybridCentroid]
    objective_history: list[float]
    iterations: int
    converged: bool
    degenerate: bool = False
    seed: int = 0
    partition_history: list[np.ndarray] | None = None


# ---------------------------------------------------------------------------
# scalar / non-scalar views of an instance


@singledispatch
def scalar_view(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


@singledispatch
def nonscalar_view(x) -> tuple:
    return ()


@singledispatch
def with_scalars(x, values: np.ndarray):
    """An instance like ``x`` whose scalar features are replaced by ``values``."""
    if np.ndim(x) == 0:
        return float(values[0])
    return np.asarray(values, dtype=float).reshape(np.shape(x))


@scalar_view.register
def _(x: SetplayFeatures) -> np.ndarray:
    return np.array([x.our_players_number, x.their_players_number, x.steps_count], dtype=float)


@nonscalar_view.register
def _(x: SetplayFeatures) -> tuple:
    return (x.abort_condition, x.steps_list)


@with_scalars.register
def _(x: SetplayFeatures, values: np.ndarray) -> SetplayFeatures:
    return dataclasses.replace(
        x,
        our_players_number=float(values[0]),
        their_players_number=float(values[1]),
        steps_count=float(values[2]),
    )


# ---------------------------------------------------------------------------
# update rules


def update_memberships(distances, m: float) -> np.ndarray:
    """Memberships of one object given its distances to the C centroids.

    Zero distances take all the membership, shared equally.
    """
    d = np.asarray(distances, dtype=float)
    if d.ndim == 1:
        return _memberships(d[:, None], m)[:, 0]
    return _memberships(d, m)


def _memberships(d: np.ndarray, m: float) -> np.ndarray:
    c, n = d.shape
    u = np.empty_like(d)
    zero = d == 0
    has_zero = zero.any(axis=0)
    if has_zero.any():
        z = zero[:, has_zero].astype(float)
        u[:, has_zero] = z / z.sum(axis=0)
    rest = ~has_zero
    if rest.any():
        dr = d[:, rest]
        # scale by the column minimum so the power cannot overflow
        with np.errstate(over="ignore"):
            ratio = dr / dr.min(axis=0)
            inv = ratio ** (-2.0 / (m - 1.0))
        u[:, rest] = inv / inv.sum(axis=0)
    return u


def compute_centroid(dataset: Sequence, memberships, m: float) -> HybridCentroid:
    w = np.asarray(memberships, dtype=float) ** m
    src = int(np.argmax(memberships))  # first index wins ties
    scalars = np.array([scalar_view(x) for x in dataset])
    total = w.sum()
    if total > 0:
        mean = (w[:, None] * scalars).sum(axis=0) / total
    else:
        mean = scalars[src].copy()
    return HybridCentroid(mean, src, with_scalars(dataset[src], mean))


def centroid_distances(dataset: Sequence, centroids: Sequence[HybridCentroid], dist) -> np.ndarray:
    if hasattr(dist, "centroid_matrix"):
        return dist.centroid_matrix(centroids)
    return np.array([[dist(x, v.instance) for x in dataset] for v in centroids], dtype=float)


def objective(dataset, centroids, partition, m: float, dist=None, distances=None) -> float:
    """Sum over clusters and objects of membership**m times squared distance."""
    u = np.asarray(partition, dtype=float)
    if distances is None:
        distances = centroid_distances(dataset, centroids, dist)
    return float(np.sum(u ** m * np.asarray(distances) ** 2))


def _cluster_costs(u: np.ndarray, d: np.ndarray, m: float) -> np.ndarray:
    return np.sum(u ** m * d ** 2, axis=1)


# ---------------------------------------------------------------------------


def _initial_partition(dataset, dist, cfg: FcmConfig, rng: np.random.Generator) -> np.ndarray:
    n = len(dataset)
    if cfg.init == "prototype":
        idx = rng.choice(n, size=cfg.c, replace=False)
        protos = [HybridCentroid(scalar_view(dataset[i]), int(i), dataset[i]) for i in idx]
        return _memberships(centroid_distances(dataset, protos, dist), cfg.m)
    u = rng.random((cfg.c, n))
    return u / u.sum(axis=0)


def _is_degenerate(dataset, dist) -> bool:
    if hasattr(dist, "matrix"):
        return bool(np.all(dist.matrix() == 0))
    return all(dist(dataset[0], x) == 0 for x in dataset[1:])


def run_fcm(dataset: Sequence, dist: Callable, cfg: FcmConfig, record_partitions: bool = False) -> FcmResult:
    n = len(dataset)
    if n < cfg.c:
        raise ValueError(f"need at least c={cfg.c} instances, got {n}")
    rng = np.random.default_rng(cfg.seed)

    if _is_degenerate(dataset, dist):
        warnings.warn("all instances are identical; returning the uniform partition",
                      DegenerateDatasetWarning, stacklevel=2)
        u = np.full((cfg.c, n), 1.0 / cfg.c)
        centroids = [compute_centroid(dataset, row, cfg.m) for row in u]
        return FcmResult(PartitionMatrix(u), centroids, [0.0], 0, True, degenerate=True,
                         seed=cfg.seed, partition_history=[u.copy()] if record_partitions else None)

    u = _initial_partition(dataset, dist, cfg, rng)
    centroids = [compute_centroid(dataset, row, cfg.m) for row in u]
    d = centroid_distances(dataset, centroids, dist)
    history = [objective(dataset, centroids, u, cfg.m, distances=d)]
    partitions = [u.copy()] if record_partitions else None
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        u_new = _memberships(d, cfg.m)
        candidates = [compute_centroid(dataset, row, cfg.m) for row in u_new]
        d_new = centroid_distances(dataset, candidates, dist)
        keep_old = _cluster_costs(u_new, d_new, cfg.m) > _cluster_costs(u_new, d, cfg.m)
        for i in np.flatnonzero(keep_old):
            candidates[i] = centroids[i]
            d_new[i] = d[i]
        delta = float(np.max(np.abs(u_new - u)))
        u, centroids, d = u_new, candidates, d_new
        history.append(objective(dataset, centroids, u, cfg.m, distances=d))
        if record_partitions:
            partitions.append(u.copy())
        if delta < cfg.epsilon:
            converged = True
            break
    if not converged:
        log.debug("FCM (c=%d, seed=%d) stopped after %d iterations", cfg.c, cfg.seed, it)
    return FcmResult(PartitionMatrix(u), centroids, history, it, converged,
                     seed=cfg.seed, partition_history=partitions)
