import csv
import json

import numpy as np
import pytest

from ehhnet.cli import main, parse_grid
from ehhnet.network import EhhNetwork, NormalizationParams, SourceNode
from ehhnet.serialize import load_model, model_hash, save_model
from ehhnet.sysid import NARENDRA_LI_SPEC, build_regressors, load_csv, vaf

SMALL = ["--q", "2", "--neurons", "20", "--restarts", "2", "--cycles", "3"]


@pytest.fixture(scope="module")
def bench(tmp_path_factory):
    d = tmp_path_factory.mktemp("bench")
    assert main(["gen-benchmark", "--out", str(d), "--seed", "1", "--n-train", "400"]) == 0
    return d


@pytest.fixture(scope="module")
def trained(bench, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    rc = main(["train", "--data", str(bench / "train.csv"), "--out", str(out), *SMALL])
    assert rc == 0
    return out


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_parse_grid():
    assert parse_grid("5:30,10:40") == [(5, 30), (10, 40)]


class TestGenBenchmark:
    def test_default_lengths(self, tmp_path):
        assert main(["gen-benchmark", "--out", str(tmp_path)]) == 0
        assert len(rows(tmp_path / "train.csv")) == 2001
        assert len(rows(tmp_path / "test.csv")) == 201
        m = json.loads((tmp_path / "manifest.json").read_text())
        assert m["seed"] == 0 and len(m["files"]["train"]["sha256"]) == 64

    def test_byte_identical(self, tmp_path):
        for d in ("a", "b"):
            main(["gen-benchmark", "--out", str(tmp_path / d), "--seed", "5", "--n-train", "50"])
        for f in ("train.csv", "test.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["gen-benchmark", "--out", str(blocker / "sub")]) == 7


class TestTrain:
    def test_outputs(self, trained):
        m = json.loads((trained / "manifest.json").read_text())
        assert m["status"] == "complete"
        assert len(m["restarts"]) == 2
        assert m["config"]["train"]["n_neurons"] == 20
        assert m["model"]["sha256"] == model_hash(load_model(trained / "model.json"))
        log = [json.loads(line) for line in (trained / "cycles.jsonl").read_text().splitlines()]
        assert {r["restart"] for r in log} == {0, 1}
        assert {"cycle", "cost", "n_active", "lam", "wall_time"} <= set(log[0])
        net = load_model(trained / "model.json")
        assert net.meta["regressors"] == NARENDRA_LI_SPEC.labels()

    def test_manifest_reproduces_model(self, trained, tmp_path):
        assert main(["train", "--config", str(trained / "manifest.json"),
                     "--out", str(tmp_path)]) == 0
        a = load_model(trained / "model.json")
        b = load_model(tmp_path / "model.json")
        assert model_hash(a) == model_hash(b)

    def test_flags_override_config(self, bench, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"data": str(bench / "train.csv"), "restarts": 5,
                                   "train": {"q": 2, "n_neurons": 14, "max_cycles": 1}}))
        assert main(["train", "--config", str(cfg), "--restarts", "1",
                     "--out", str(tmp_path / "o")]) == 0
        m = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert len(m["restarts"]) == 1 and m["config"]["train"]["n_neurons"] == 14

    def test_zero_cycles(self, bench, tmp_path):
        assert main(["train", "--data", str(bench / "train.csv"), "--out", str(tmp_path),
                     *SMALL, "--cycles", "0", "--restarts", "1"]) == 0
        log = (tmp_path / "cycles.jsonl").read_text().splitlines()
        assert [json.loads(r)["cycle"] for r in log] == [0]

    def test_single_restart_deterministic(self, bench, tmp_path):
        args = ["train", "--data", str(bench / "train.csv"), *SMALL, "--restarts", "1",
                "--seed", "9"]
        main(args + ["--out", str(tmp_path / "a")])
        main(args + ["--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "model.json").read_bytes() == \
            (tmp_path / "b" / "model.json").read_bytes()

    def test_validation_ranks_restarts(self, bench, tmp_path):
        assert main(["train", "--data", str(bench / "train.csv"), "--test-data",
                     str(bench / "test.csv"), "--out", str(tmp_path), *SMALL]) == 0
        m = json.loads((tmp_path / "manifest.json").read_text())
        scores = [r["score"] for r in m["restarts"]]
        assert m["selected"]["score"] == max(scores)
        assert "free_run_vaf" in m["metrics"]

    def test_size_sweep(self, bench, tmp_path):
        assert main(["train", "--data", str(bench / "train.csv"), "--out", str(tmp_path),
                     "--grid", "1:4,2:6", "--restarts", "1", "--cycles", "1"]) == 0
        m = json.loads((tmp_path / "manifest.json").read_text())
        table = m["size_sweep"]
        assert [(r["q"], r["n_neurons"]) for r in table] == [(1, 10), (2, 18)]
        best = min(table, key=lambda r: r["gcv"])
        assert m["config"]["train"]["n_neurons"] == best["n_neurons"]

    def test_missing_data_file(self, tmp_path):
        assert main(["train", "--data", str(tmp_path / "none.csv"), "--out", str(tmp_path)]) == 7

    def test_malformed_data(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2\n3,x\n")
        assert main(["train", "--data", str(bad), "--out", str(tmp_path)]) == 8

    def test_no_data(self, tmp_path):
        assert main(["train", "--out", str(tmp_path)]) == 3

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--mode", "diagonal", "--out", "x"])
        assert exc.value.code == 2


class TestEval:
    def test_metrics_on_training_data(self, bench, trained, tmp_path, capsys):
        out = tmp_path / "m.json"
        assert main(["eval", "--model", str(trained / "model.json"),
                     "--data", str(bench / "train.csv"), "--out", str(out)]) == 0
        m = json.loads(out.read_text())
        net = load_model(trained / "model.json")
        x, y = build_regressors(load_csv(bench / "train.csv"), NARENDRA_LI_SPEC)
        assert m["one_step_vaf"] == vaf(net.predict(x), y)
        assert set(m["parameters"]) >= {"weights", "weights_offsets",
                                         "weights_offsets_structure"}
        assert json.loads(capsys.readouterr().out) == m

    def test_zero_model(self, bench, tmp_path, capsys):
        net = EhhNetwork(NormalizationParams.identity(6),
                         [SourceNode(v, 0.0) for v in range(6)])
        save_model(net, tmp_path / "z.json")
        assert main(["eval", "--model", str(tmp_path / "z.json"),
                     "--data", str(bench / "test.csv")]) == 0
        m = json.loads(capsys.readouterr().out)
        assert m["one_step_vaf"] == 0.0 and m["free_run_vaf"] == 0.0

    def test_spec_mismatch(self, bench, tmp_path):
        net = EhhNetwork(NormalizationParams.identity(2), [SourceNode(0, 0.0)])
        save_model(net, tmp_path / "m.json")
        assert main(["eval", "--model", str(tmp_path / "m.json"),
                     "--data", str(bench / "test.csv")]) == 3


class TestAnova:
    def test_table(self, bench, trained, capsys):
        assert main(["anova", "--model", str(trained / "model.json"),
                     "--data", str(bench / "train.csv"), "--top-k", "3"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].startswith("ANOVA function") and len(lines) == 4
        assert "(k-" in lines[1]

    def test_top_k_beyond_group_count(self, bench, trained, capsys, tmp_path):
        out = tmp_path / "a.json"
        main(["anova", "--model", str(trained / "model.json"),
              "--data", str(bench / "train.csv"), "--top-k", "1000", "--out", str(out)])
        entries = json.loads(out.read_text())
        sig = [e["sigma"] for e in entries]
        assert sig == sorted(sig, reverse=True) and len(entries) >= 1

    def test_single_group(self, bench, tmp_path, capsys):
        w = np.zeros(7)
        w[0], w[1] = 0.1, 1.0
        net = EhhNetwork(NormalizationParams.identity(6),
                         [SourceNode(v, 0.0) for v in range(6)], (), w)
        from ehhnet.graph import prune
        save_model(prune(net), tmp_path / "m.json")
        main(["anova", "--model", str(tmp_path / "m.json"), "--data", str(bench / "train.csv")])
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 2 and lines[1].startswith("y(k-1)")


class TestExport:
    def test_window(self, bench, trained, tmp_path):
        out = tmp_path / "p.csv"
        assert main(["export", "--model", str(trained / "model.json"),
                     "--data", str(bench / "test.csv"), "--out", str(out),
                     "--window", "50"]) == 0
        r = rows(out)
        assert r[0] == ["k", "y", "y_sim"] and len(r) == 51
        assert int(r[-1][0]) == 199

    def test_full(self, bench, trained, tmp_path):
        out = tmp_path / "p.csv"
        main(["export", "--model", str(trained / "model.json"),
              "--data", str(bench / "test.csv"), "--out", str(out)])
        assert len(rows(out)) == 1 + 197

    def test_empty_simulation(self, trained, tmp_path):
        short = tmp_path / "s.csv"
        short.write_text("0.1,0.2\n0.3,0.4\n")
        out = tmp_path / "p.csv"
        assert main(["export", "--model", str(trained / "model.json"),
                     "--data", str(short), "--out", str(out)]) == 0
        assert rows(out) == [["k", "y", "y_sim"]]
