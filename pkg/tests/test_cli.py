import json
import subprocess
import sys

import pytest

from ddos_entropy.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def trace(tmp_path):
    out = tmp_path / "t.csv"
    assert run("generate", "--out", out, "--seed", 7) == 0
    return out


def test_generate_writes_trace_and_labels(trace, tmp_path):
    labels = [json.loads(l) for l in (tmp_path / "t.labels.jsonl").read_text().splitlines()]
    assert len(labels) == 30
    assert [l["window_index"] for l in labels if l["label"] == "attack"] == list(range(10, 20))
    assert trace.read_text().startswith("timestamp,src_addr")


def test_generate_jsonl_and_seed_determinism(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run("generate", "--out", a, "--seed", 3, "--duration", 12, "--no-attack") == 0
    assert run("generate", "--out", b, "--seed", 3, "--duration", 12, "--no-attack") == 0
    assert a.read_bytes() == b.read_bytes()
    assert json.loads(a.read_text().splitlines()[0])["timestamp"] == 0.0


def test_detect_exit_codes(trace, tmp_path):
    cal = tmp_path / "cal.json"
    assert run("calibrate", "--trace", trace, "--prefix-windows", 10, "--out", cal) == 0
    verdicts = tmp_path / "v.jsonl"
    alerts = tmp_path / "a.jsonl"
    notes = tmp_path / "n.txt"
    code = run("detect", "--config", cal, "--trace", trace, "--out", verdicts, "--alerts-out", alerts, "--notify-out", notes)
    assert code == 2
    assert alerts.read_text().strip()
    assert "ATTACK CONFIRMED" in notes.read_text()
    clean = tmp_path / "clean.csv"
    assert run("generate", "--out", clean, "--seed", 8, "--no-attack") == 0
    cal2 = tmp_path / "cal2.json"
    assert run("calibrate", "--trace", clean, "--out", cal2) == 0
    assert run("detect", "--config", cal2, "--trace", clean, "--notify-out", tmp_path / "n2.txt") == 0


def test_flags_override_config_file(trace, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"th1": 0.99, "features": ["dst_addr"], "window-seconds": 1.0}))
    v1, v2 = tmp_path / "v1.jsonl", tmp_path / "v2.jsonl"
    assert run("detect", "--config", cfg, "--trace", trace, "--out", v1, "--notify-out", tmp_path / "n") == 2
    assert run("detect", "--config", cfg, "--th1", 0.0, "--trace", trace, "--out", v2, "--notify-out", tmp_path / "n") == 0
    first = json.loads(v1.read_text().splitlines()[0])
    assert list(first["ne_values"]) == ["dst_addr"]


def test_calibrate_output_is_usable_config(trace, tmp_path):
    cal = tmp_path / "cal.json"
    assert run("calibrate", "--trace", trace, "--prefix-windows", 10, "--target-fpr", 0.05, "--calibrate-th2", "--out", cal) == 0
    doc = json.loads(cal.read_text())
    assert 0 < doc["th1"] < 1
    assert doc["th2"] > 0.2
    assert doc["baseline"]["windows"] == 10
    assert {p["feature"] for p in doc["baseline"]["profiles"]} == {"src_addr", "dst_addr"}


def test_usage_errors(tmp_path, capsys):
    assert run("detect", "--bogus") == 1
    assert run("launch") == 1
    assert run() == 1
    assert run("detect") == 1
    assert run("detect", "--trace", tmp_path / "missing.csv") == 1
    assert run("detect", "--trace", tmp_path / "x.csv", "--th1", 3) == 1
    assert run("calibrate", "--trace", tmp_path / "x.csv", "--target-fpr", "abc") == 1


def test_bad_trace_is_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("0.5,10.0.0.1,10.0.0.2,1234,99999,6,3,1800\n")
    assert run("detect", "--trace", bad) == 1


def test_evaluate_writes_metrics(trace, tmp_path):
    out = tmp_path / "m.json"
    assert run("evaluate", "--trace", trace, "--labels", tmp_path / "t.labels.jsonl", "--th1", 0.8, "--out", out) == 0
    metrics = json.loads(out.read_text())
    assert metrics["detection_rate"] == 1.0
    assert metrics["denominators"] == {"attack_windows": 10, "clean_windows": 20}


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "ddos_entropy", "generate", "--out", str(tmp_path / "t.csv"), "--duration", "11"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "ddos_entropy", "nope"], capture_output=True, text=True)
    assert proc.returncode == 1
