import json
import os
import pathlib
import shutil
import subprocess

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]


def find_cli():
    for candidate in (os.environ.get("COGNET_CLI"), ROOT / "build" / "tools" / "cognet", shutil.which("cognet")):
        if candidate and pathlib.Path(candidate).is_file():
            return str(candidate)
    return None


CLI = find_cli()
pytestmark = pytest.mark.skipif(CLI is None, reason="cognet executable not built")


def run(*args, root):
    env = dict(os.environ, COGNET_OUTPUT_ROOT=str(root))
    return subprocess.run([CLI, *args], env=env, capture_output=True, text=True)


def test_gen_data_manifest_and_rerun(tmp_path):
    assert run("gen-data", "--patients", "30", "--seed", "3", "--out", "a", root=tmp_path).returncode == 0
    assert run("gen-data", "--patients", "30", "--seed", "3", "--out", "b", root=tmp_path).returncode == 0
    for name in ("train.jsonl", "validation.jsonl", "test.jsonl", "vocab.json", "ddi.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["command"] == "gen-data"
    assert manifest["config"]["patients"] == "30"
    assert manifest["seeds"]["generator"] == 3


def test_exit_codes(tmp_path):
    assert run("gen-data", "--persistence", "1.5", root=tmp_path).returncode == 2
    assert run("evaluate", "--model", str(tmp_path / "none"), root=tmp_path).returncode == 2


def test_train_evaluate_explain(tmp_path, schema):
    assert run("gen-data", "--patients", "30", "--persistence", "0.9", "--out", "data", root=tmp_path).returncode == 0
    data = str(tmp_path / "data")
    r = run("train", "--data", data, "--out", "run", "--epochs", "2", "--dim", "8", "--heads", "2",
            "--gate-hidden", "4", root=tmp_path)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "run" / "metrics.csv").read_text().startswith("epoch,train_loss")
    model = str(tmp_path / "run")
    assert run("evaluate", "--model", model, "--data", data, "--rounds", "1", "--frac", "1.0", root=tmp_path).returncode == 0
    report = json.loads((tmp_path / "eval" / "report.json").read_text())
    assert all(report[k]["std"] == 0.0 for k in ("jaccard", "f1", "prauc", "ddi", "avg_drugs"))
    patient = json.loads((tmp_path / "data" / "test.jsonl").read_text().splitlines()[0])["patient_id"]
    assert run("explain", "--model", model, "--data", data, "--patient", patient, "--visit", "1", root=tmp_path).returncode == 2
    r = run("explain", "--model", model, "--data", data, "--patient", patient, "--visit", "2", root=tmp_path)
    assert r.returncode == 0, r.stderr
    out = json.loads(pathlib.Path(r.stdout.strip()).read_text())
    import jsonschema

    jsonschema.validate(out, schema)
