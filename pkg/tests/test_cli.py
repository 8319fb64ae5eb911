import hashlib
import json

import numpy as np
import pytest

from gradednet import __version__
from gradednet.cli import main
from gradednet.experiments import GENUS2_OUT
from gradednet.gmap import BlockKernel, GradedLinearMap
from gradednet.grading import Grade, GradingSignature
from gradednet.gspace import GradedVector
from gradednet.network import ActivationKind, GradedLayer, GradedNetwork

E, O = Grade.parity(0), Grade.parity(1)


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture
def genus2_cfg(tmp_path):
    return write(tmp_path / "g.json", {"experiment": "genus2", "n_samples": 1000, "seed": 7})


def test_gen_data_count_and_checksum(tmp_path, genus2_cfg, capsys):
    assert main(["gen-data", "--config", genus2_cfg, "--out", str(tmp_path / "a")]) == 0
    out = capsys.readouterr().out
    f = tmp_path / "a" / "dataset.jsonl"
    lines = f.read_text().splitlines()
    assert len(lines) == 1000 and "1000 rows" in out and sha(f) in out
    prov = json.loads(lines[0])["provenance"]
    assert prov["version"] == __version__ and prov["seeds"] == [7] and len(prov["config_sha256"]) == 64
    assert main(["gen-data", "--config", genus2_cfg, "--out", str(tmp_path / "b.jsonl"), "--quiet"]) == 0
    assert capsys.readouterr().out == ""
    assert sha(tmp_path / "b.jsonl") == sha(f)


def test_gen_data_susy(tmp_path):
    cfg = write(tmp_path / "s.json", {"experiment": "susy", "n_samples": 4})
    assert main(["gen-data", "--config", cfg, "--out", str(tmp_path / "s.jsonl"), "--quiet"]) == 0
    rec = json.loads((tmp_path / "s.jsonl").read_text().splitlines()[0])
    assert len((tmp_path / "s.jsonl").read_text().splitlines()) == 4
    assert [len(rec["x"]["blocks"][k]) for k in ("even", "odd")] == [100, 100]
    assert rec["provenance"]["experiment"] == "susy"


@pytest.mark.parametrize("obj,field", [
    ({"experiment": "genus2", "split": 1.5}, "split"),
    ({"experiment": "genus2", "epochs": 0}, "epochs"),
    ({"experiment": "genus3"}, "experiment"),
    ({"experiment": "genus2", "colour": "red"}, "colour"),
])
def test_config_validation_errors(tmp_path, capsys, obj, field):
    cfg = write(tmp_path / "c.json", obj)
    for cmd in ("gen-data", "train"):
        assert main([cmd, "--config", cfg, "--out", str(tmp_path / "o")]) == 1
        assert field in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_malformed_json_reports_position(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"experiment": "genus2",\n  "seed": }\n')
    assert main(["gen-data", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert f"{p}:2:" in capsys.readouterr().err


def test_usage_errors_exit_one(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["gen-data", "--out", str(tmp_path)])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["bogus"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["gen-data"])
    assert info.value.code == 1
    assert main(["gen-data", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    assert "cannot read" in capsys.readouterr().err


def test_train_artifacts_and_determinism(tmp_path, capsys):
    cfg = write(tmp_path / "t.json", {"experiment": "genus2", "n_samples": 100, "seed": 7})
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "r1"), "--quiet"]) == 0
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "r2"), "--quiet"]) == 0
    for name in ("checkpoint.json", "history.csv", "metrics.json"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()
    hist = (tmp_path / "r1" / "history.csv").read_text().splitlines()
    body = [l for l in hist if not l.startswith("#")]
    assert body[0] == "epoch,loss" and len(body) == 101 and body[-1].startswith("100,")
    assert any(l.startswith("# config_sha256: ") for l in hist)
    metrics = json.loads((tmp_path / "r1" / "metrics.json").read_text())
    assert metrics["params"] == 7 and metrics["epochs"] == 100
    assert metrics["provenance"]["seeds"] == [7]
    ckpt = json.loads((tmp_path / "r1" / "checkpoint.json").read_text())
    assert ckpt["provenance"] == metrics["provenance"]
    assert GradedNetwork.from_json(ckpt).parameter_count == 7


def test_train_baseline_and_seed_override(tmp_path):
    cfg = write(tmp_path / "t.json", {"experiment": "genus2", "n_samples": 50, "epochs": 2,
                                      "model": "baseline"})
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "r"), "--seeds", "3", "--quiet"]) == 0
    m = json.loads((tmp_path / "r" / "metrics.json").read_text())
    assert m["params"] == 13 and m["seed"] == 3 and m["model"] == "baseline"


def test_train_from_dataset_file_with_layer_plan(tmp_path):
    gen = write(tmp_path / "g.json", {"experiment": "genus2", "n_samples": 40, "seed": 1})
    assert main(["gen-data", "--config", gen, "--out", str(tmp_path / "d.jsonl"), "--quiet"]) == 0
    cfg = write(tmp_path / "t.json", {"experiment": "genus2", "epochs": 2, "dataset": "d.jsonl",
                                      "layers": linear_plan()})
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "r"), "--quiet"]) == 0
    m = json.loads((tmp_path / "r" / "metrics.json").read_text())
    assert m["params"] == (4 + 4) + (4 + 1)     # graded layer, then readout


def linear_plan():
    return [{"codomain": GradingSignature.of(2, 4, dims=2).to_json(), "activation": "identity"},
            {"codomain": GENUS2_OUT.to_json(), "activation": "identity", "map": "readout"}]


def test_train_divergence_exits_one(tmp_path, capsys):
    cfg = write(tmp_path / "t.json", {"experiment": "genus2", "n_samples": 50, "epochs": 50, "eta": 1e3,
                                      "layers": linear_plan()})
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "r")]) == 1
    assert "aborted" in capsys.readouterr().err
    assert not (tmp_path / "r").exists()


def test_train_plan_must_match_data(tmp_path, capsys):
    plan = linear_plan()[:1]
    cfg = write(tmp_path / "t.json", {"experiment": "genus2", "n_samples": 20, "layers": plan})
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "r")]) == 1
    assert "layers" in capsys.readouterr().err


def _net_json(layers):
    return GradedNetwork(layers).to_json()


def test_check_diagonal_network_exits_zero(tmp_path, capsys):
    sig = GradingSignature([(1, 2), (3, 1)])
    layer = GradedLayer(GradedLinearMap.diagonal(sig, sig, {1: 0.5, 3: 2.0}), GradedVector.zeros(sig),
                        ActivationKind.IDENTITY)
    ck = write(tmp_path / "n.json", _net_json([layer]))
    assert main(["check", "--checkpoint", ck, "--out", str(tmp_path / "rep")]) == 0
    rep = json.loads((tmp_path / "rep" / "report.json").read_text())
    assert rep["verdict"] == "equivariant" and rep["check"] == "scalar"
    assert "equivariant" in capsys.readouterr().out


def test_check_graded_relu_exits_two(tmp_path, capsys):
    cfg = write(tmp_path / "t.json", {"experiment": "genus2", "n_samples": 50, "epochs": 1})
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "r"), "--quiet"]) == 0
    ck = str(tmp_path / "r" / "checkpoint.json")
    assert main(["check", "--checkpoint", ck, "--out", str(tmp_path / "rep")]) == 2
    rep = json.loads((tmp_path / "rep" / "report.json").read_text())
    assert rep["verdict"] == "violated" and rep["witness"]["lambda"] in (0.5, 2.0, 3.0, -1.0)
    assert rep["per_lambda"]["2.0"] > rep["tol"]
    assert "violated" in capsys.readouterr().out


def test_check_map_config(tmp_path):
    sig = GradingSignature.of(2, 4)
    k = BlockKernel(sig, sig, {(2, 2): [[1.0]], (2, 4): [[0.3]]})
    cfg = write(tmp_path / "m.json", {"map": k.to_json(), "lambdas": [2.0]})
    assert main(["check", "--config", cfg, "--quiet"]) == 2
    ok = write(tmp_path / "ok.json", {"map": GradedLinearMap.identity(sig).to_json()})
    assert main(["check", "--config", ok, "--quiet"]) == 0


def test_check_swap(tmp_path, capsys):
    sig = GradingSignature.parity(2, 2)
    tied = GradedLayer(GradedLinearMap(sig, sig, {E: np.eye(2), O: np.eye(2)}), GradedVector.zeros(sig),
                       ActivationKind.STANDARD_RELU)
    untied = GradedLayer(GradedLinearMap.diagonal(sig, sig, {E: 0.9, O: 0.8}), GradedVector.zeros(sig),
                         ActivationKind.STANDARD_RELU)
    assert main(["check", "--config", write(tmp_path / "a.json", {"layer": tied.to_json()})]) == 0
    assert main(["check", "--config", write(tmp_path / "b.json", {"layer": untied.to_json()}),
                 "--out", str(tmp_path / "rep")]) == 2
    rep = json.loads((tmp_path / "rep" / "report.json").read_text())
    assert rep["check"] == "swap" and "untied" in rep["diagnosis"]


def test_check_errors_exit_one(tmp_path):
    assert main(["check", "--checkpoint", str(tmp_path / "missing.json")]) == 1
    assert main(["check", "--checkpoint", write(tmp_path / "x.json", {"layers": [{"nope": 1}]})]) == 1
    assert main(["check", "--checkpoint", write(tmp_path / "y.json", {"other": 1})]) == 1
    assert main(["check"]) == 1


def test_experiment_outputs(tmp_path, capsys):
    cfg = write(tmp_path / "e.json", {"n_samples": 40, "epochs": 2, "seeds": [2, 1]})
    args = ["experiment", "genus2", "--config", cfg]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    table = capsys.readouterr().out
    assert "graded" in table and "baseline" in table
    assert main(args + ["--out", str(tmp_path / "b"), "--quiet"]) == 0
    for name in ("metrics.csv", "summary.json", "table.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = (tmp_path / "a" / "metrics.csv").read_text().splitlines()
    body = [r for r in rows if not r.startswith("#")]
    assert body[0] == "experiment,model,seed,val_mse,params,seconds"
    assert [r.split(",")[1:3] for r in body[1:]] == [["graded", "1"], ["graded", "2"],
                                                     ["baseline", "1"], ["baseline", "2"]]
    assert {r.split(",")[4] for r in body[1:]} == {"7", "13"}
    assert all(r.endswith(",") for r in body[1:])


def test_experiment_single_seed_std_zero(tmp_path):
    cfg = write(tmp_path / "e.json", {"n_samples": 30, "epochs": 1})
    assert main(["experiment", "genus2", "--config", cfg, "--seeds", "5", "--out", str(tmp_path), "--quiet"]) == 0
    recs = json.loads((tmp_path / "summary.json").read_text())["records"]
    assert [r["std"] for r in recs] == [0.0, 0.0]
    assert "± 0.0000" in (tmp_path / "table.txt").read_text()


def test_experiment_susy_provenance_and_timing(tmp_path):
    cfg = write(tmp_path / "e.json", {"n_samples": 6, "epochs": 1})
    assert main(["experiment", "susy", "--config", cfg, "--out", str(tmp_path), "--quiet",
                 "--record-timing"]) == 0
    head = (tmp_path / "metrics.csv").read_text().splitlines()
    cfg_line = next(l for l in head if l.startswith("# config: "))
    assert json.loads(cfg_line[len("# config: "):])["grid_points"] == 100
    body = [r for r in head if not r.startswith("#")][1:]
    assert all(float(r.split(",")[-1]) >= 0 for r in body)


def test_experiment_name_mismatch(tmp_path):
    cfg = write(tmp_path / "e.json", {"experiment": "susy"})
    assert main(["experiment", "genus2", "--config", cfg, "--out", str(tmp_path)]) == 1


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "gradednet", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and __version__ in r.stdout
