"""End-to-end command line flows and exit code mapping."""

import json
import subprocess
import sys

import pytest

from spanweave.cli import main


def _run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_gen_requires_output_directory(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["gen", "rpc_noload"])
    assert exc.value.code == 2


def test_gen_rejects_unknown_scenario(capsys, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["gen", "rpc_storm", "-o", str(tmp_path)])
    assert exc.value.code == 2


def test_gen_maps_config_error_to_exit_2(capsys, tmp_path):
    code, _, err = _run(capsys, ["gen", "rpc_noload", "--seed", "-1", "-o", str(tmp_path)])
    assert code == 2
    assert "config error" in err and "seed" in err


def test_run_reports_unknown_config_field(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"components": [], "sources": [], "wombat": 1}))
    code, _, err = _run(capsys, ["run", "--config", str(cfg)])
    assert code == 2
    assert "unknown field 'wombat'" in err


def test_run_missing_source_is_runtime_error(capsys, tmp_path):
    code, out, _ = _run(capsys, ["gen", "rpc_noload", "-n", "1", "-o", str(tmp_path)])
    assert code == 0
    (tmp_path / "switch1.log").unlink()
    code, _, err = _run(capsys, ["run", "--config", str(tmp_path / "config.json")])
    assert code == 1
    assert "switch1" in err


def test_full_pipeline_flow(capsys, tmp_path):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")

    code, out, _ = _run(capsys, ["gen", "rpc_noload", "--seed", "3", "-n", "2", "-o", a])
    assert code == 0
    gen_doc = json.loads(out)
    assert gen_doc["requests"] == 2 and gen_doc["events"]["host0"] > 0
    code, _, _ = _run(capsys, ["gen", "rpc_background", "--seed", "3", "-n", "2", "-o", b])
    assert code == 0

    for base in (a, b):
        code, out, _ = _run(
            capsys,
            ["run", "--config", f"{base}/config.json",
             "--format", "jsonl", "--out", f"{base}/spans.jsonl"],
        )
        assert code == 0
        stats = json.loads(out)
        assert stats["mode"] == "single"
        assert stats["parse_errors"] == 0 and stats["contexts_unmatched"] == 0

    for base in (a, b):
        code, out, _ = _run(
            capsys,
            ["breakdown", f"{base}/spans.jsonl",
             "--config", f"{base}/config.json", "--out", f"{base}/bd.json"],
        )
        assert code == 0
        assert json.loads(out)["traces"] == 2
        assert json.loads(open(f"{base}/bd.json").read())["request"]

    code, out, _ = _run(capsys, ["compare", f"{a}/bd.json", f"{b}/bd.json"])
    assert code == 0
    doc = json.loads(out)
    deltas = {(r["path"], r["component"]): r["delta_ps"] for r in doc["rows"]}
    assert abs(deltas[("response", "switch0")] - 50_000_000) < 1  # default --dq-us
    assert deltas[("request", "host0")] == 0.0


def test_breakdown_unknown_trace(capsys, tmp_path):
    base = str(tmp_path)
    assert _run(capsys, ["gen", "rpc_noload", "-n", "1", "-o", base])[0] == 0
    assert _run(
        capsys,
        ["run", "--config", f"{base}/config.json",
         "--format", "jsonl", "--out", f"{base}/spans.jsonl"],
    )[0] == 0
    code, _, err = _run(
        capsys,
        ["breakdown", f"{base}/spans.jsonl", "--config", f"{base}/config.json",
         "--trace", "feed"],
    )
    assert code == 1
    assert "'feed' not found" in err


def test_compare_input_errors(capsys, tmp_path):
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"request": [], "response": []}))
    code, _, err = _run(capsys, ["compare", str(good), str(tmp_path / "absent.json")])
    assert code == 1 and "cannot read" in err
    junk = tmp_path / "junk.json"
    junk.write_text("][")
    code, _, err = _run(capsys, ["compare", str(good), str(junk)])
    assert code == 2 and "not a breakdown document" in err


def test_module_entrypoint():
    proc = subprocess.run(
        [sys.executable, "-m", "spanweave.cli", "--help"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    for word in ("gen", "run", "breakdown", "compare"):
        assert word in proc.stdout
