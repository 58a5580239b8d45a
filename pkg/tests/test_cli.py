import csv
import json

import numpy as np
import pytest

from conftest import make_blobs
from sdhash import cli
from sdhash.hamming import read_binc
from sdhash.model_store import load_model

SMALL = ["--anchors", "20", "--iters", "2", "--test-count", "20"]


@pytest.fixture
def dataset(tmp_path):
    X, y = make_blobs(n=120, seed=8, d=4, spread=1.5)
    feats, labels = tmp_path / "x.csv", tmp_path / "y.csv"
    np.savetxt(feats, X, delimiter=",", fmt="%.17g")
    np.savetxt(labels, y, fmt="%d")
    return ["--data", "csv", "--data-features", str(feats), "--data-labels", str(labels)]


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_train_defaults_match_paper():
    args = cli.resolve(cli.build_parser().parse_args(
        ["train", "--method", "sdhr", "--bits", "64", "--data", "mnist", "--model", "m"]))
    cfg = cli.train_config(args, 64)
    assert (cfg.lam, cfg.v, cfg.max_iters, cfg.n_anchors) == (1.0, 1e-5, 5, 1000)
    assert args.radius == 2
    args = cli.resolve(cli.build_parser().parse_args(["eval", "--model", "m", "--out", "o"]))
    assert args.radius == 2 and args.top_n is None  # eval resolves None to 500


def test_unknown_method_exit_2(tmp_path, dataset, capsys):
    with pytest.raises(SystemExit) as exc:
        run("train", "--method", "pca", "--bits", "8", *dataset, "--model", tmp_path / "m")
    assert exc.value.code == 2
    assert "unknown method" in capsys.readouterr().err


def test_empty_bits_exit_2(tmp_path, dataset):
    with pytest.raises(SystemExit) as exc:
        run("bench", "--method", "sdh", "--bits", ",", *dataset, "--out", tmp_path / "b.csv")
    assert exc.value.code == 2


def test_missing_data_exit_nonzero(tmp_path, capsys):
    code = run("train", "--bits", "8", "--data", "csv", "--data-features", tmp_path / "nope.csv",
               "--data-labels", tmp_path / "nope.txt", "--model", tmp_path / "m")
    assert code == 1
    assert "error" in capsys.readouterr().err
    assert not (tmp_path / "m").exists()


def test_train_deterministic_and_log(tmp_path, dataset):
    for name in ("a", "b"):
        assert run("train", "--method", "sdhr", "--bits", "8", *SMALL, *dataset,
                   "--model", tmp_path / name, "--codes-out", tmp_path / f"{name}.binc") == 0
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
    record = json.loads((tmp_path / "a.log.json").read_text())
    assert len(record["objective"]) == 3 and record["train_seconds"] > 0
    assert record["n_train"] == 100
    assert read_binc(tmp_path / "a.binc").n_bits == 8


def test_config_file_layering(tmp_path, dataset):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lambda": 0.5, "anchors": 15, "iters": 1, "test_count": 20}))
    run("train", "--bits", "8", "--config", cfg, "--anchors", "25", *dataset, "--model", tmp_path / "m")
    model = load_model(tmp_path / "m")
    assert model.config.lam == 0.5
    assert model.config.n_anchors == 25
    assert model.config.max_iters == 1


def test_encode_and_query(tmp_path, dataset):
    run("train", "--method", "sdh", "--bits", "12", *SMALL, *dataset, "--model", tmp_path / "m")
    assert run("encode", "--model", tmp_path / "m", *dataset, "--test-count", "20",
               "--out", tmp_path / "db.binc") == 0
    db = read_binc(tmp_path / "db.binc")
    assert len(db) == 100 and db.n_bits == 12
    assert run("query", "--model", tmp_path / "m", *dataset, "--test-count", "20",
               "--db", tmp_path / "db.binc", "--top-n", "3", "--out", tmp_path / "q.csv") == 0
    rows = list(csv.DictReader(open(tmp_path / "q.csv")))
    assert len(rows) == 60
    assert [r["rank"] for r in rows[:3]] == ["0", "1", "2"]
    dists = [int(r["distance"]) for r in rows[:3]]
    assert dists == sorted(dists)
    assert run("query", "--model", tmp_path / "m", *dataset, "--test-count", "20",
               "--radius-lookup", "--radius", "0", "--out", tmp_path / "r.csv") == 0
    assert all(r["distance"] == "0" for r in csv.DictReader(open(tmp_path / "r.csv")))


def test_eval_outputs(tmp_path, dataset):
    models = []
    for method in ("sdhr", "lsh"):
        path = tmp_path / f"{method}.sdhm"
        run("train", "--method", method, "--bits", "8", *SMALL, *dataset, "--model", path)
        models.append(path)
    assert run("eval", "--model", *models, *dataset, "--test-count", "20", "--top-n", "50",
               "--out", tmp_path / "rep") == 0
    payload = json.loads((tmp_path / "rep.json").read_text())
    assert [p["method"] for p in payload] == ["sdhr", "lsh"]
    assert payload[0]["radius"] == 2 and payload[0]["n_at"] == 50
    assert payload[0]["accuracy"] == 1.0
    rows = list(csv.DictReader(open(tmp_path / "rep.csv")))
    assert len(rows) == 2
    curve = list(csv.DictReader(open(tmp_path / "rep_radius_curve.csv")))
    assert len(curve) == 2 * 9


def test_eval_dimension_mismatch(tmp_path, dataset):
    run("train", "--bits", "8", *SMALL, *dataset, "--model", tmp_path / "m")
    X = np.random.default_rng(0).random((50, 3))
    np.savetxt(tmp_path / "x3.csv", X, delimiter=",")
    np.savetxt(tmp_path / "y3.csv", np.arange(50) % 2, fmt="%d")
    code = run("eval", "--model", tmp_path / "m", "--data", "csv", "--data-features", tmp_path / "x3.csv",
               "--data-labels", tmp_path / "y3.csv", "--test-count", "10", "--out", tmp_path / "e")
    assert code == 1


def test_bench_grid_deterministic(tmp_path, dataset):
    for name in ("a", "b"):
        assert run("bench", "--method", "sdhr", "sdh", "lsh", "--bits", "16,64", *SMALL, *dataset,
                   "--top-n", "50", "--out", tmp_path / f"{name}.csv") == 0
    rows = list(csv.DictReader(open(tmp_path / "a.csv")))
    assert [(r["method"], r["bits"]) for r in rows] == [
        ("sdhr", "16"), ("sdhr", "64"), ("sdh", "16"), ("sdh", "64"), ("lsh", "16"), ("lsh", "64")]
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    timings = list(csv.DictReader(open(tmp_path / "a_timings.csv")))
    assert len(timings) == 6
