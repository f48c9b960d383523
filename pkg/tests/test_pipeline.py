import json
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from corpora import family, features, reference_corpus
from setplay_fcm.datagen import FamilySpec
from setplay_fcm.fcm import DegenerateDatasetWarning, PartitionMatrix
from setplay_fcm.pipeline import (Cluster, PipelineConfig, RangeTooLargeWarning, Stage1Result, assign_members,
                                  derive_seed, run_pipeline, stage1, stage2)

FAST = dict(restarts=3, c1_max=6)


def one_cluster(n):
    mu = np.zeros((2, n))
    mu[0] = 1.0
    return Stage1Result({}, 2, PartitionMatrix(mu), [Cluster(0, list(range(n)), [1.0] * n)], [])


def test_assign_members_example():
    assert assign_members([[0.9, 0.6, 0.2], [0.1, 0.4, 0.8]], 0.5) == [[0, 1], [1, 2]]


def test_gamma_limits():
    rng = np.random.default_rng(3)
    u = rng.random((3, 9))
    u /= u.sum(axis=0)
    assert all(len(m) == 1 for m in assign_members(u, 0.0))
    assert all(m == list(range(9)) for m in assign_members(u, 1.0))


@given(st.integers(0, 2 ** 32 - 1), st.floats(0, 1), st.floats(0, 1))
def test_membership_grows_with_gamma(seed, g1, g2):
    lo, hi = sorted((g1, g2))
    rng = np.random.default_rng(seed)
    u = rng.random((3, 6))
    u /= u.sum(axis=0)
    for small, big in zip(assign_members(u, lo), assign_members(u, hi)):
        assert set(small) <= set(big)
        assert small


def test_config_validation():
    for bad in (dict(c1_min=1), dict(c1_min=5, c1_max=4), dict(m=1.0), dict(gamma=1.5), dict(alpha=-1),
                dict(restarts=0), dict(c2=1), dict(seed=-1)):
        with pytest.raises(ValueError):
            PipelineConfig(**bad)


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(0, 1, 2, 3) == derive_seed(0, 1, 2, 3)
    assert len({derive_seed(0, 1, 2, r) for r in range(50)}) == 50


def test_singleton_cluster_gets_fs_one():
    data = family("kick_in", 3)
    s1 = Stage1Result({}, 2, PartitionMatrix(np.eye(3)[:2] + [[0, 0, 1], [0, 0, 0]]),
                      [Cluster(0, [0], [1.0]), Cluster(1, [1, 2], [1.0, 1.0])], [])
    gd = stage2(s1, data, PipelineConfig(restarts=2))
    assert gd.clusters[0].fs == 1.0 and gd.clusters[0].verdict == "singleton"
    assert gd.clusters[0].subclusters == []


def test_near_duplicates_are_kept():
    data = family("play_on", 6, seed=4, jitter=0.01, swap_prob=0.0)
    gd = stage2(one_cluster(6), data, PipelineConfig(restarts=5))
    cl = gd.clusters[0]
    assert cl.fs < 0.2 and cl.verdict == "keep" and cl.subclusters == []


def test_two_distinct_groups_are_split():
    data = features([FamilySpec("ko_our", 3, seed=1, jitter=0.01, swap_prob=0.0),
                     FamilySpec("goal_kick", 3, seed=2, jitter=0.01, swap_prob=0.0)])
    gd = stage2(one_cluster(6), data, PipelineConfig(restarts=5))
    cl = gd.clusters[0]
    assert cl.verdict == "split" and cl.fs >= 0.5
    assert sorted(sorted(s.members) for s in cl.subclusters) == [[0, 1, 2], [3, 4, 5]]


def test_stage_two_c_is_capped():
    data = family("play_on", 3, jitter=0.5)
    gd = stage2(one_cluster(3), data, PipelineConfig(c2=5, restarts=2))
    assert gd.clusters[0].c2 == 2


def test_stage_two_does_not_touch_stage_one():
    data = reference_corpus()
    cfg = PipelineConfig(**FAST)
    s1 = stage1(data, cfg)
    before = [(c.id, list(c.members), c.fs, c.verdict) for c in s1.clusters]
    stage2(s1, data, cfg)
    assert [(c.id, list(c.members), c.fs, c.verdict) for c in s1.clusters] == before


def test_reference_corpus_best_c_and_coverage():
    s1, gd, rep = run_pipeline(reference_corpus(), PipelineConfig(**FAST))
    assert 3 <= s1.best_c <= 6
    assert sorted(rep["stage1"]["fs_by_c"][i]["c"] for i in range(5)) == [2, 3, 4, 5, 6]
    for entry in s1.sweep.values():
        assert len(entry.runs) == 3
    covered = {j for cl in s1.clusters for j in cl.members} | set(s1.unassigned)
    assert covered == set(range(18))


def test_report_is_deterministic_and_json_ready():
    data = reference_corpus(seed=2)
    cfg = PipelineConfig(**FAST, seed=11)
    a = json.dumps(run_pipeline(data, cfg)[2], sort_keys=True)
    b = json.dumps(run_pipeline(data, cfg)[2], sort_keys=True)
    assert a == b


def test_different_seeds_change_the_restart_seeds():
    data = reference_corpus()
    r1 = run_pipeline(data, PipelineConfig(**FAST, seed=1))[2]
    r2 = run_pipeline(data, PipelineConfig(**FAST, seed=2))[2]
    assert r1["stage1"]["fs_by_c"][0]["seeds"] != r2["stage1"]["fs_by_c"][0]["seeds"]


def test_all_identical_dataset():
    data = family("goal_kick", 4, jitter=0.0, swap_prob=0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateDatasetWarning)
        s1, gd, rep = run_pipeline(data, PipelineConfig(c1_max=3, restarts=2))
    np.testing.assert_allclose(s1.partition.mu, 1.0 / s1.best_c)
    assert all(fs == 0 for fs in s1.fs_by_c.values())


def test_range_larger_than_dataset_is_truncated():
    data = family("kick_in", 4, jitter=0.5)
    with pytest.warns(RangeTooLargeWarning):
        s1 = stage1(data, PipelineConfig(c1_max=8, restarts=2))
    assert sorted(s1.sweep) == [2, 3, 4]


def test_too_few_setplays():
    with pytest.raises(ValueError):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            stage1(family("kick_in", 1), PipelineConfig())
