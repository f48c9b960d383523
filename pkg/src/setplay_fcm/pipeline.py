"""Two-stage clustering of setplays.

Stage one sweeps the cluster count over level-1 features and keeps the count
with the best fuzzy silhouette. Each resulting cluster (members chosen by the
gamma rule) is then clustered again on the full features; clusters whose
stage-two silhouette reaches a threshold are split, the rest are kept whole.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import __version__
from .cvi import AllWeightsZeroWarning, SilhouetteConfig, fuzzy_silhouette_ex
from .fcm import DegenerateDatasetWarning, FcmConfig, FcmResult, PartitionMatrix, run_fcm
from .metrics import DistanceConfig, SchemaDistance, fit_scales
from .model import SetplayFeatures

log = logging.getLogger(__name__)

SPLIT, KEEP, SINGLETON = "split", "keep", "singleton"


class RangeTooLargeWarning(UserWarning):
    pass


class EmptyClusterWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    c1_min: int = 2
    c1_max: int = 8
    c2: int = 2
    m: float = 2.0
    alpha: float = 1.0
    gamma: float = 0.5
    restarts: int = 10
    seed: int = 0
    split_fs_threshold: float = 0.5
    normalize: bool = False
    max_iters: int = 300
    epsilon: float = 1e-6
    unmatched_player_penalty: float = 36.06

    def __post_init__(self):
        errors = []
        if self.c1_min < 2:
            errors.append("c1_min must be >= 2")
        if self.c1_max < self.c1_min:
            errors.append("c1_max must be >= c1_min")
        if self.c2 < 2:
            errors.append("c2 must be >= 2")
        if not self.m > 1:
            errors.append("m must be > 1")
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            errors.append("alpha must be finite and >= 0")
        if not 0 <= self.gamma <= 1:
            errors.append("gamma must lie in [0, 1]")
        if self.restarts < 1:
            errors.append("restarts must be >= 1")
        if self.seed < 0:
            errors.append("seed must be non-negative")
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def c1_range(self) -> range:
        return range(self.c1_min, self.c1_max + 1)

    def distance_config(self, dataset: Sequence[SetplayFeatures]) -> DistanceConfig:
        scales = fit_scales(dataset) if self.normalize else {}
        return DistanceConfig(self.unmatched_player_penalty, self.normalize, scales)


def derive_seed(base: int, *path: int) -> int:
    """Independent 32-bit seed for one task (stage, cluster count, restart ...)."""
    return int(np.random.SeedSequence([base, *path]).generate_state(1)[0])


@dataclass
class RunScore:
    seed: int
    fs: float
    converged: bool
    all_weights_zero: bool
    iterations: int


@dataclass
class SweepEntry:
    c: int
    runs: list[RunScore]
    best: FcmResult

    @property
    def best_run(self) -> RunScore:
        return next(r for r in self.runs if r.seed == self.best.seed)

    @property
    def fs_best(self) -> float:
        return self.best_run.fs

    @property
    def fs_values(self) -> np.ndarray:
        return np.array([r.fs for r in self.runs])


@dataclass
class Cluster:
    id: int
    members: list[int]
    memberships: list[float]
    fs: float | None = None
    verdict: str | None = None
    subclusters: list["Cluster"] = field(default_factory=list)
    c2: int | None = None


@dataclass
class Stage1Result:
    sweep: dict[int, SweepEntry]
    best_c: int
    partition: PartitionMatrix
    clusters: list[Cluster]
    unassigned: list[int]
    all_weights_zero: bool = False

    @property
    def fs_by_c(self) -> dict[int, float]:
        return {c: e.fs_best for c, e in self.sweep.items()}


@dataclass
class GroupedDataset:
    stage: int
    clusters: list[Cluster]


def assign_members(partition, gamma: float) -> list[list[int]]:
    """Members of each cluster: objects whose membership is at least the
    cluster's best membership minus ``gamma``.

    An object can belong to several clusters. Clusters are never empty since
    the best-valued object always qualifies.
    """
    mu = np.asarray(partition, dtype=float)
    threshold = mu.max(axis=1, keepdims=True) - gamma
    return [list(map(int, np.flatnonzero(row))) for row in mu >= threshold]


def sweep_c(dataset, dist, pairwise, cs, m, alpha, restarts, seed, stage, max_iters=300, epsilon=1e-6,
            stage_key: int = 0) -> dict[int, SweepEntry]:
    """FCM with ``restarts`` seeds for every c in ``cs``; the best run per c
    is the converged run with the highest fuzzy silhouette (lowest restart
    index on ties)."""
    sil = SilhouetteConfig(alpha)
    out = {}
    for c in cs:
        runs, results = [], []
        for r in range(restarts):
            s = derive_seed(seed, stage, stage_key, c, r)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateDatasetWarning)
                warnings.simplefilter("ignore", AllWeightsZeroWarning)
                res = run_fcm(dataset, dist, FcmConfig(c, m, max_iters, epsilon, s))
                fs, zero = fuzzy_silhouette_ex(res.partition, pairwise, sil)
            runs.append(RunScore(s, fs, res.converged, zero, res.iterations))
            results.append(res)
        pool = [i for i, run in enumerate(runs) if run.converged] or list(range(restarts))
        if len(pool) < restarts:
            log.info("c=%d: %d of %d runs did not converge", c, restarts - len(pool), restarts)
        best = max(pool, key=lambda i: (runs[i].fs, -i))
        out[c] = SweepEntry(c, runs, results[best])
    return out


def _clusters_from(partition, gamma: float) -> tuple[list[Cluster], list[int]]:
    mu = np.asarray(partition, dtype=float)
    clusters = []
    for i, members in enumerate(assign_members(mu, gamma)):
        if not members:
            warnings.warn(f"cluster {i} has no members and is dropped", EmptyClusterWarning, stacklevel=3)
            continue
        clusters.append(Cluster(i, members, [float(mu[i, j]) for j in members]))
    covered = {j for cl in clusters for j in cl.members}
    return clusters, [j for j in range(mu.shape[1]) if j not in covered]


def stage1(dataset: Sequence[SetplayFeatures], cfg: PipelineConfig) -> Stage1Result:
    n = len(dataset)
    cs = [c for c in cfg.c1_range if c <= n]
    if len(cs) < len(cfg.c1_range):
        warnings.warn(f"cluster counts above N={n} skipped", RangeTooLargeWarning, stacklevel=2)
    if not cs:
        raise ValueError(f"need at least {cfg.c1_min} setplays for stage one, got {n}")
    dist = SchemaDistance(dataset, 1, cfg.distance_config(dataset))
    pairwise = dist.matrix()
    sweep = sweep_c(dataset, dist, pairwise, cs, cfg.m, cfg.alpha, cfg.restarts, cfg.seed, 1,
                    cfg.max_iters, cfg.epsilon)
    best_c = max(cs, key=lambda c: (sweep[c].fs_best, -c))
    entry = sweep[best_c]
    clusters, unassigned = _clusters_from(entry.best.partition, cfg.gamma)
    if unassigned:
        log.warning("%d setplays belong to no stage-one cluster at gamma=%g", len(unassigned), cfg.gamma)
    return Stage1Result(sweep, best_c, entry.best.partition, clusters, unassigned,
                        all_weights_zero=entry.best_run.all_weights_zero)


def stage2(s1: Stage1Result, dataset: Sequence[SetplayFeatures], cfg: PipelineConfig) -> GroupedDataset:
    out = []
    for cl in s1.clusters:
        cl = dataclasses.replace(cl, subclusters=[])
        if len(cl.members) == 1:
            cl.fs, cl.verdict = 1.0, SINGLETON
            out.append(cl)
            continue
        subset = [dataset[j] for j in cl.members]
        c2 = min(cfg.c2, math.ceil(math.sqrt(len(subset))))
        dist = SchemaDistance(subset, 2, cfg.distance_config(subset))
        sweep = sweep_c(subset, dist, dist.matrix(), [c2], cfg.m, cfg.alpha, cfg.restarts, cfg.seed, 2,
                        cfg.max_iters, cfg.epsilon, stage_key=cl.id)
        entry = sweep[c2]
        cl.c2 = c2
        cl.fs = entry.fs_best
        cl.verdict = SPLIT if cl.fs >= cfg.split_fs_threshold else KEEP
        if cl.verdict == SPLIT:
            sub, _ = _clusters_from(entry.best.partition, cfg.gamma)
            for s in sub:
                s.members = [cl.members[k] for k in s.members]
            cl.subclusters = sub
        out.append(cl)
    return GroupedDataset(2, out)


def _r(x: float) -> float:
    return float(f"{x:.9g}")


def report(s1: Stage1Result, gd: GroupedDataset, cfg: PipelineConfig,
           names: Sequence[str] | None = None) -> dict:
    """Deterministic, JSON-ready summary of a pipeline run."""
    n = s1.partition.shape[1]
    names = list(names) if names is not None else [str(j) for j in range(n)]

    def cluster_dict(cl: Cluster) -> dict:
        d = {
            "id": cl.id,
            "members": [{"index": j, "name": names[j], "membership": _r(u)}
                        for j, u in zip(cl.members, cl.memberships)],
        }
        if cl.fs is not None:
            d["fs"] = _r(cl.fs)
            d["verdict"] = cl.verdict
        if cl.c2 is not None:
            d["c2"] = cl.c2
        if cl.subclusters:
            d["subclusters"] = [cluster_dict(s) for s in cl.subclusters]
        return d

    return {
        "tool": "setplay-fcm",
        "version": __version__,
        "config": dataclasses.asdict(cfg),
        "n_setplays": n,
        "stage1": {
            "fs_by_c": [
                {"c": c, "fs_best": _r(e.fs_best), "fs_mean": _r(float(e.fs_values.mean())),
                 "fs_std": _r(float(e.fs_values.std())), "best_seed": e.best.seed,
                 "seeds": [r.seed for r in e.runs]}
                for c, e in sorted(s1.sweep.items())
            ],
            "best_c": s1.best_c,
            "all_weights_zero": s1.all_weights_zero,
            "clusters": [cluster_dict(cl) for cl in s1.clusters],
            "unassigned": [{"index": j, "name": names[j]} for j in s1.unassigned],
        },
        "stage2": {"clusters": [cluster_dict(cl) for cl in gd.clusters]},
        "memberships": [
            {"index": j, "name": names[j], "mu": [_r(u) for u in s1.partition.mu[:, j]]}
            for j in range(n)
        ],
    }


def run_pipeline(dataset: Sequence[SetplayFeatures], cfg: PipelineConfig):
    s1 = stage1(dataset, cfg)
    gd = stage2(s1, dataset, cfg)
    return s1, gd, report(s1, gd, cfg, [x.name or str(j) for j, x in enumerate(dataset)])
