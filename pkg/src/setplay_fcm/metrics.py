"""Dissimilarities over the two-level setplay schema.

``level1_distance`` compares setplays on their summary features only;
``level2_distance`` adds the per-step distances of the steps both setplays
have. Step distances combine scalar differences with norms for player
lists, condition trees and behavior vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import BoolTree, SetplayFeatures, StepFeatures

FIELD_DIAGONAL = 36.06  # 20 x 30 m field

LEVEL1_SCALARS = ("our_players_number", "their_players_number", "steps_count")
STEP_SCALARS = ("our_players_in_step", "their_players_in_step", "wait_time", "abort_time", "next_step")


@dataclass(frozen=True)
class DistanceConfig:
    unmatched_player_penalty: float = FIELD_DIAGONAL
    normalize_features: bool = False
    # divisor per scalar feature name, used only when normalize_features is set
    scales: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        p = self.unmatched_player_penalty
        if not (math.isfinite(p) and p >= 0):
            raise ValueError("unmatched_player_penalty must be finite and >= 0")

    def scale(self, name: str) -> float:
        if not self.normalize_features:
            return 1.0
        return self.scales.get(name, 1.0)


DEFAULT_CONFIG = DistanceConfig()


def fit_scales(dataset: Sequence[SetplayFeatures]) -> dict:
    """Range of each scalar feature over ``dataset`` (1.0 where the range is 0)."""
    def rng(values):
        values = list(values)
        if not values:
            return 1.0
        r = float(max(values) - min(values))
        return r if r > 0 else 1.0

    scales = {name: rng(getattr(x, name) for x in dataset) for name in LEVEL1_SCALARS}
    steps = [s for x in dataset for s in x.steps_list]
    scales.update({name: rng(getattr(s, name) for s in steps) for name in STEP_SCALARS})
    return scales


def diff_node(t1: BoolTree | None, t2: BoolTree | None) -> int:
    """Number of positions at which two trees differ.

    Trees are walked together with children aligned by index. A position
    counts when the labels differ or when only one tree has a node there
    (every node of an unmatched subtree counts).
    """
    if t1 is None:
        return 0 if t2 is None else t2.size()
    if t2 is None:
        return t1.size()
    if t1 is t2:
        return 0
    d = int(t1.label != t2.label)
    c1, c2 = t1.children, t2.children
    for i in range(max(len(c1), len(c2))):
        d += diff_node(c1[i] if i < len(c1) else None, c2[i] if i < len(c2) else None)
    return d


def behavior_norm(v1: Sequence[str], v2: Sequence[str]) -> float:
    n = max(len(v1), len(v2))
    count = sum(1 for i in range(n) if i >= len(v1) or i >= len(v2) or v1[i] != v2[i])
    return math.sqrt(count)


def player_list_norm(l1, l2, cfg: DistanceConfig = DEFAULT_CONFIG) -> float:
    """Sum of index-paired Euclidean distances plus a fixed penalty per
    player without a partner."""
    k = min(len(l1), len(l2))
    total = 0.0
    for (x1, y1), (x2, y2) in zip(l1[:k], l2[:k]):
        total += math.hypot(x1 - x2, y1 - y2)
    return total + cfg.unmatched_player_penalty * abs(len(l1) - len(l2))


def level1_distance(a: SetplayFeatures, b: SetplayFeatures, cfg: DistanceConfig = DEFAULT_CONFIG) -> float:
    total = 0.0
    for name in LEVEL1_SCALARS:
        total += ((getattr(a, name) - getattr(b, name)) / cfg.scale(name)) ** 2
    total += diff_node(a.abort_condition, b.abort_condition) ** 2
    return math.sqrt(total)


def step_distance(s1: StepFeatures, s2: StepFeatures, cfg: DistanceConfig = DEFAULT_CONFIG) -> float:
    total = 0.0
    for name in STEP_SCALARS:
        total += ((getattr(s1, name) - getattr(s2, name)) / cfg.scale(name)) ** 2
    total += player_list_norm(s1.our_players_list, s2.our_players_list, cfg) ** 2
    total += player_list_norm(s1.their_players_list, s2.their_players_list, cfg) ** 2
    total += diff_node(s1.condition, s2.condition) ** 2
    total += behavior_norm(s1.behaviors_list, s2.behaviors_list) ** 2
    return math.sqrt(total)


def level2_distance(yk: SetplayFeatures, yl: SetplayFeatures, cfg: DistanceConfig = DEFAULT_CONFIG) -> float:
    # step distances are added unsquared to the level-1 distance
    d = level1_distance(yk, yl, cfg)
    for s1, s2 in zip(yk.steps_list, yl.steps_list):
        d += step_distance(s1, s2, cfg)
    return d


def pairwise(dataset: Sequence, dist) -> np.ndarray:
    """Symmetric N x N matrix of ``dist`` with an exact zero diagonal."""
    n = len(dataset)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = dist(dataset[i], dataset[j])
    return out


class SchemaDistance:
    """Level-1 or level-2 distance bound to a dataset.

    Callable on two instances like the plain functions. FCM centroids copy
    their tree and step list from a dataset instance, so distances from every
    instance to a centroid reduce to the centroid's scalar values plus
    precomputed instance-to-instance terms; :meth:`centroid_matrix` uses that.
    """

    def __init__(self, dataset: Sequence[SetplayFeatures], level: int = 1,
                 cfg: DistanceConfig = DEFAULT_CONFIG):
        if level not in (1, 2):
            raise ValueError("level must be 1 or 2")
        self.level = level
        self.cfg = cfg
        self.dataset = list(dataset)
        n = len(self.dataset)
        self._scale = np.array([cfg.scale(name) for name in LEVEL1_SCALARS])
        self._scalars = np.array(
            [[getattr(x, name) for name in LEVEL1_SCALARS] for x in self.dataset], dtype=float
        ).reshape(n, len(LEVEL1_SCALARS))
        self._tree = np.zeros((n, n))
        self._steps = np.zeros((n, n))
        self._matrix = None
        for i in range(n):
            for j in range(i + 1, n):
                a, b = self.dataset[i], self.dataset[j]
                self._tree[i, j] = self._tree[j, i] = diff_node(a.abort_condition, b.abort_condition)
                if level == 2:
                    s = 0.0
                    for s1, s2 in zip(a.steps_list, b.steps_list):
                        s += step_distance(s1, s2, cfg)
                    self._steps[i, j] = self._steps[j, i] = s

    def __call__(self, a: SetplayFeatures, b: SetplayFeatures) -> float:
        if self.level == 1:
            return level1_distance(a, b, self.cfg)
        return level2_distance(a, b, self.cfg)

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = self._pairwise()
        return self._matrix

    def _pairwise(self) -> np.ndarray:
        diff = (self._scalars[:, None, :] - self._scalars[None, :, :]) / self._scale
        d = np.sqrt(np.sum(diff ** 2, axis=2) + self._tree ** 2)
        if self.level == 2:
            d = d + self._steps
        np.fill_diagonal(d, 0.0)
        return d

    def centroid_matrix(self, centroids) -> np.ndarray:
        """C x N distances from each instance to each hybrid centroid."""
        out = np.empty((len(centroids), len(self.dataset)))
        for i, v in enumerate(centroids):
            diff = (self._scalars - np.asarray(v.scalar_part, dtype=float)) / self._scale
            d = np.sqrt(np.sum(diff ** 2, axis=1) + self._tree[:, v.source_index] ** 2)
            if self.level == 2:
                d = d + self._steps[:, v.source_index]
            out[i] = d
        return out
