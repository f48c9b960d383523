import csv
import json

import numpy as np
import pytest

from setplay_fcm.cli import main
from setplay_fcm.formats import (FormatError, dataset_to_json, load_dataset, partition_csv,
                                 read_partition_csv)

QUICK = ["--restarts", "2", "--c1-max", "4"]


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    assert main(["generate", "--reference-corpus", "--seed", "7", "--out-dir", str(d)]) == 0
    return d


@pytest.fixture(scope="module")
def dataset(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("ds") / "dataset.json"
    assert main(["parse", str(corpus), "-o", str(out)]) == 0
    return out


def read(path):
    return path.read_bytes()


def test_generate_writes_plans_and_spec_echo(corpus):
    assert len(list(corpus.glob("*.sp"))) == 18
    echo = json.loads((corpus / "corpus_spec.json").read_text())
    assert sum(f["count"] for f in echo["families"]) == 18
    assert len(echo["files"]) == 18


def test_generate_from_spec_file(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"seed": 3, "families": [{"play_mode": "kick_in", "count": 2},
                                                         {"play_mode": "ko_our", "count": 3}]}))
    assert main(["generate", str(spec), "--out-dir", str(tmp_path / "c")]) == 0
    assert len(list((tmp_path / "c").glob("*.sp"))) == 5


def test_generate_bad_spec(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"families": [{"play_mode": "kick_in", "count": 0}]}))
    assert main(["generate", str(spec), "--out-dir", str(tmp_path)]) == 2


def test_parse_dataset(dataset):
    rows = load_dataset(dataset)
    assert len(rows) == 18
    doc = json.loads(dataset.read_text())
    assert {"ourPlayersNumber", "abortCondition", "stepsList"} <= set(doc["setplays"][0])


def test_dataset_round_trip(dataset, tmp_path):
    rows = load_dataset(dataset)
    again = tmp_path / "again.json"
    again.write_text(dataset_to_json(rows))
    assert load_dataset(again) == rows


def test_parse_empty_dir(tmp_path):
    out = tmp_path / "d.json"
    assert main(["parse", str(tmp_path), "-o", str(out)]) == 0
    assert load_dataset(out) == []


def test_parse_reports_location_of_syntax_errors(tmp_path, capsys):
    bad = tmp_path / "bad.sp"
    bad.write_text("(setplay :name x\n  :id 1\n")
    assert main(["parse", str(bad), "-o", str(tmp_path / "d.json")]) == 1
    err = capsys.readouterr().err
    assert f"{bad}:" in err
    line, col = err.split(f"{bad}:")[1].split(":")[:2]
    assert line.isdigit() and col.isdigit()
    assert not (tmp_path / "d.json").exists()


def test_parse_missing_path(tmp_path):
    assert main(["parse", str(tmp_path / "nope.sp")]) == 1


def test_cluster_outputs(dataset, tmp_path):
    out = tmp_path / "run"
    assert main(["cluster", str(dataset), "--restarts", "2", "--out-dir", str(out)]) == 0
    with open(out / "fs_curve.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["c", "fs_best", "fs_mean", "fs_std"]
    assert [int(r[0]) for r in rows[1:]] == list(range(2, 9))
    rep = json.loads((out / "report.json").read_text())
    assert rep["n_setplays"] == 18 and rep["stage1"]["best_c"] in range(2, 9)
    mu, names = read_partition_csv((out / "partition_stage1.csv").read_text())
    assert mu.shape == (rep["stage1"]["best_c"], 18) and len(names) == 18
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["input_sha256"][str(dataset)]
    assert set(manifest["seeds"]) == {str(c) for c in range(2, 9)}


def test_cluster_is_byte_deterministic(dataset, tmp_path):
    for d in ("a", "b"):
        assert main(["cluster", str(dataset), *QUICK, "--out-dir", str(tmp_path / d)]) == 0
    for name in ("report.json", "fs_curve.csv", "partition_stage1.csv"):
        assert read(tmp_path / "a" / name) == read(tmp_path / "b" / name)


def test_gamma_zero(dataset, tmp_path):
    assert main(["cluster", str(dataset), *QUICK, "--gamma", "0", "--out-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    mu = np.array([row["mu"] for row in rep["memberships"]]).T
    for cl in rep["stage1"]["clusters"]:
        # only objects tied at the cluster's best membership remain
        assert {m["membership"] for m in cl["members"]} == {mu[cl["id"]].max()}


def test_seed_env_overrides_flag(dataset, tmp_path, monkeypatch):
    assert main(["cluster", str(dataset), *QUICK, "--seed", "5", "--out-dir", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("SETPLAY_SEED", "5")
    assert main(["cluster", str(dataset), *QUICK, "--seed", "99", "--out-dir", str(tmp_path / "b")]) == 0
    assert read(tmp_path / "a" / "report.json") == read(tmp_path / "b" / "report.json")


@pytest.mark.parametrize("flags", [["--m", "1"], ["--gamma", "2"], ["--c1-min", "1"], ["--restarts", "0"]])
def test_config_errors(dataset, tmp_path, flags):
    assert main(["cluster", str(dataset), *flags, "--out-dir", str(tmp_path)]) == 2
    assert not (tmp_path / "report.json").exists()


def test_config_file(dataset, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"restarts": 2, "c1_max": 3, "bogus": 1}))
    assert main(["cluster", str(dataset), "--config", str(cfg), "--out-dir", str(tmp_path)]) == 2
    cfg.write_text(json.dumps({"restarts": 2, "c1_max": 3}))
    assert main(["cluster", str(dataset), "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "report.json").read_text())["config"]["c1_max"] == 3


def test_cluster_rejects_tiny_dataset(tmp_path):
    ds = tmp_path / "d.json"
    ds.write_text(dataset_to_json([]))
    assert main(["cluster", str(ds), "--out-dir", str(tmp_path)]) == 1


def test_manifest_rerun(dataset, tmp_path):
    assert main(["cluster", str(dataset), *QUICK, "--seed", "4", "--out-dir", str(tmp_path / "a")]) == 0
    assert main(["cluster", "--manifest", str(tmp_path / "a" / "manifest.json"),
                 "--out-dir", str(tmp_path / "b")]) == 0
    assert read(tmp_path / "a" / "report.json") == read(tmp_path / "b" / "report.json")


def test_sweep_grid(dataset, tmp_path):
    args = ["sweep", str(dataset), "--m-values", "1.5", "2", "--alpha-values", "1", "2",
            "--restarts", "2", "--c1-max", "4", "--out-dir", str(tmp_path)]
    assert main(args) == 0
    names = sorted(p.name for p in tmp_path.glob("fs_curve_*.csv"))
    assert names == ["fs_curve_m1.5_a1.csv", "fs_curve_m1.5_a2.csv", "fs_curve_m2_a1.csv", "fs_curve_m2_a2.csv"]


def test_sweep_rejects_m_at_most_one(dataset, tmp_path):
    assert main(["sweep", str(dataset), "--m-values", "1", "--out-dir", str(tmp_path)]) == 2


def test_partition_csv_renormalizes_rounding_drift():
    mu = np.array([[1 / 3, 0.5], [2 / 3, 0.5]])
    back, names = read_partition_csv(partition_csv(mu, ["a", "b"]))
    np.testing.assert_allclose(back.sum(axis=0), 1.0, atol=1e-15)
    np.testing.assert_allclose(back, mu, atol=1e-9)
    with pytest.raises(FormatError):
        read_partition_csv("cluster,a\n0,0.5\n1,0.4\n")
