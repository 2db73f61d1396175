"""CLI subcommands, flag/file precedence, and exit codes."""

import json
import shutil
import subprocess

import pytest

from iqsig.cli import main


@pytest.fixture()
def sigset_file(tmp_path):
    out = tmp_path / "sigs"
    code = main(["--seed", "42", "--out", str(out), "gen-sigs", "--n", "3",
                 "--epsilon", "0.2"])
    assert code == 0
    return out / "sigset.json"


def test_gen_sigs_writes_set(sigset_file, capsys):
    doc = json.loads(sigset_file.read_text())
    assert len(doc["signatures"]) == 3
    assert doc["generation_config"]["seed"] == 42


def test_gen_sigs_exhaustion_exit_code(tmp_path):
    code = main(["--out", str(tmp_path), "gen-sigs", "--n", "4",
                 "--epsilon", "0.95", "--max-attempts", "10"])
    assert code == 3


def test_bad_config_file_exit_code(tmp_path):
    missing = tmp_path / "nope.json"
    code = main(["--config", str(missing), "--out", str(tmp_path), "gen-sigs"])
    assert code == 2


def test_unknown_config_key_exit_code(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"not_a_key": 1}))
    code = main(["--config", str(cfg), "--out", str(tmp_path), "gen-sigs"])
    assert code == 2


def test_embed_and_detect_roundtrip(tmp_path, sigset_file, capsys):
    out = tmp_path / "cap"
    code = main(["--seed", "7", "--out", str(out), "embed",
                 "--sigset", str(sigset_file), "--sig-id", "sig2",
                 "--duration-ms", "5", "--gating-prob", "1.0",
                 "--snr-db", "25"])
    assert code == 0
    capture = out / "capture.vphy"
    assert capture.exists()
    assert (out / "capture.meta.json").exists()
    capsys.readouterr()
    code = main(["detect", "--sigset", str(sigset_file), "--capture", str(capture)])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["verdict"] == "sig2"
    assert set(report["latency_ms"]) == {"capture", "processing", "classification", "total"}


def test_config_file_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_signatures": 2, "ks_epsilon": 0.2, "seed": 5}))
    out = tmp_path / "o1"
    assert main(["--config", str(cfg), "--out", str(out), "gen-sigs"]) == 0
    assert len(json.loads((out / "sigset.json").read_text())["signatures"]) == 2
    # Explicit flag wins over the file.
    out2 = tmp_path / "o2"
    assert main(["--config", str(cfg), "--out", str(out2), "gen-sigs", "--n", "4"]) == 0
    assert len(json.loads((out2 / "sigset.json").read_text())["signatures"]) == 4


def test_dataset_and_export_tensors(tmp_path, capsys):
    data = tmp_path / "data"
    code = main(["--seed", "3", "--out", str(data), "dataset", "--preset", "1",
                 "--windows-per-class", "2"])
    assert code == 0
    manifest = json.loads((data / "manifest.json").read_text())
    assert len(manifest["windows"]) == 12
    tdir = tmp_path / "tensors"
    code = main(["--out", str(tdir), "export-tensors", "--dataset", str(data)])
    assert code == 0
    tmanifest = json.loads((tdir / "tensor_manifest.json").read_text())
    assert tmanifest["shape"] == [12, 60, 36, 2]


def test_bench_subcommand(tmp_path, capsys):
    out = tmp_path / "bench"
    code = main(["--seed", "21", "--out", str(out), "bench", "--presets", "3",
                 "--windows-per-class", "2"])
    assert code == 0
    rows = json.loads((out / "bench.json").read_text())
    assert rows[0]["preset"] == "3"
    assert "accuracy" in capsys.readouterr().out


def test_covertness_subcommand(tmp_path, capsys):
    out = tmp_path / "cov"
    code = main(["--seed", "42", "--out", str(out), "covertness", "--windows", "5"])
    assert code == 0
    report = json.loads((out / "covertness.json").read_text())
    assert report["ks_stealth_vs_baseline"] < report["ks_embedded_vs_baseline"]
    assert (out / "energy_cdf.csv").exists()


def test_console_script_help():
    exe = shutil.which("iqsig")
    if exe is None:
        pytest.skip("console script not on PATH")
    out = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "gen-sigs" in out.stdout
