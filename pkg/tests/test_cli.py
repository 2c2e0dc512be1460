from __future__ import annotations

import hashlib
import json
import shutil
import subprocess

import pytest

from planverify.cli import main


@pytest.fixture(scope="module")
def planned(tmp_path_factory):
    out = tmp_path_factory.mktemp("plan")
    assert main(["plan", "--scenario", "builtin:easy", "-n", "2", "--out", str(out)]) == 0
    plans = sorted(out.glob("plan-*.json"))
    assert 1 <= len(plans) <= 2
    return plans


def manifest(out, command):
    return json.loads((out / f"manifest-{command}.json").read_text())


def test_plan_writes_plans_and_manifest(planned):
    m = manifest(planned[0].parent, "plan")
    assert m["command"][0] == "plan"
    assert set(m["outputs"]) == {str(p) for p in planned}
    for path, digest in m["outputs"].items():
        assert hashlib.sha256(open(path, "rb").read()).hexdigest() == digest
    assert list(m["scenario_digests"]) == ["easy"]
    assert m["seed_protocol"] is None


def test_verify_reports_and_records_seeds(planned, tmp_path, capsys):
    args = ["verify", "--scenario", "builtin:easy", "--plans", *map(str, planned),
            "--seeds", "1..4", "--out", str(tmp_path)]
    assert main(args) == 0
    assert "plan" in capsys.readouterr().out
    report = json.loads((tmp_path / "report.json").read_text())
    assert report
    m = manifest(tmp_path, "verify")
    assert m["seed_protocol"]["seeds"] == "1..4"
    assert m["config"]["seeds"] == "1..4"
    first = (tmp_path / "report.json").read_bytes()
    assert main([*args[:-1], str(tmp_path / "again"), "--workers", "2"]) == 0
    assert (tmp_path / "again" / "report.json").read_bytes() == first


def test_simulate_then_replay(planned, tmp_path, capsys):
    assert main(["simulate", "--scenario", "builtin:easy", "--plan", str(planned[0]), "--seed", "3",
                 "--out", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / "record.json").read_text())
    events = tmp_path / "events.jsonl"
    assert hashlib.sha256(events.read_bytes()).hexdigest() == rec["log_hash"]
    assert (tmp_path / "trajectory.csv").read_text().startswith("tick")
    capsys.readouterr()

    assert main(["replay", "--events", str(events), "--out", str(tmp_path / "r1")]) == 0
    assert "hash OK" in capsys.readouterr().out
    assert main(["replay", "--events", str(events), "--scenario", "builtin:easy",
                 "--plan", str(planned[0]), "--out", str(tmp_path / "r2")]) == 0

    tampered = tmp_path / "bad"
    tampered.mkdir()
    shutil.copy(tmp_path / "record.json", tampered / "record.json")
    (tampered / "events.jsonl").write_bytes(events.read_bytes() + b"\n")
    capsys.readouterr()
    assert main(["replay", "--events", str(tampered / "events.jsonl"), "--out", str(tampered)]) == 1
    assert "hash mismatch" in capsys.readouterr().out


def test_replay_resimulation_needs_both_inputs(tmp_path, planned):
    assert main(["simulate", "--scenario", "builtin:easy", "--plan", str(planned[0]),
                 "--out", str(tmp_path)]) == 0
    assert main(["replay", "--events", str(tmp_path / "events.jsonl"), "--plan", str(planned[0]),
                 "--out", str(tmp_path)]) == 2


def test_export_dataset(planned, tmp_path):
    assert main(["export-dataset", "--scenario", "builtin:easy", "--plans", str(planned[0]),
                 "--seeds", "1,2", "--stride", "20", "--out", str(tmp_path)]) == 0
    m = manifest(tmp_path, "export-dataset")
    assert m["config"]["dataset"]["stride"] == 20
    assert any(p.endswith(".jsonl") for p in m["outputs"])


def test_score(planned, tmp_path):
    assert main(["score", "--scenario", "builtin:easy", "--plans", *map(str, planned),
                 "--out", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "scores.json").read_text())
    assert len(rows) == len(planned)
    assert all(1.0 <= r["total"] <= 5.0 for r in rows)


def test_plot(planned, tmp_path):
    assert main(["plot", "--scenario", "builtin:easy", "--plan", str(planned[0]), "--out", str(tmp_path)]) == 0
    assert list(tmp_path.glob("*.svg"))


@pytest.mark.parametrize("argv", [
    ["verify", "--scenario", "builtin:easy", "--plans", "x.json", "--seeds", "5..1"],
    ["verify", "--scenario", "builtin:easy", "--plans", "x.json", "--seeds", "a"],
    ["plan", "--scenario", "builtin:nowhere"],
    ["plan"],
    ["frobnicate"],
])
def test_usage_errors_exit_2(argv, tmp_path):
    assert main([*argv, "--out", str(tmp_path)]) == 2


def test_domain_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "s.json"
    bad.write_text("{}")
    assert main(["plan", "--scenario", str(bad), "--out", str(tmp_path)]) == 1
    assert "planverify:" in capsys.readouterr().err
    over = tmp_path / "c.json"
    over.write_text(json.dumps({"nonsense": 1}))
    assert main(["plan", "--scenario", "builtin:easy", "--config", str(over), "--out", str(tmp_path)]) == 1


def test_console_script_version():
    exe = shutil.which("planverify")
    if exe is None:
        pytest.skip("console script not on PATH")
    out = subprocess.run([exe, "--version"], capture_output=True, text=True, check=True)
    assert out.stdout.startswith("planverify ")
