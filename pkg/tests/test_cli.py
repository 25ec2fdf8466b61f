import json

import pytest

from linkalg.api import CheckResponse
from linkalg.cli import main
from linkalg.config import dump
from linkalg.scenarios import two_node


def test_check_failure_writes_a_counterexample(tmp_path, capsys):
    out = tmp_path / "cex.jsonl"
    code = main(["check", "--scenario", "hidden", "--protocol", "csma", "--min-prob",
                 "--counterexample", str(out)])
    assert code == 1
    text = capsys.readouterr().out
    assert "5/32" in text and "counterexample trace written" in text
    lines = out.read_text().splitlines()
    assert json.loads(lines[0])["type"] == "header" and json.loads(lines[-1])["type"] == "end"


def test_after_cts_holds(capsys):
    assert main(["check", "--scenario", "hidden", "--protocol", "csma-rts", "--query", "after-cts"]) == 0
    assert "holds" in capsys.readouterr().out


def test_unknown_verdict_exit_code(tmp_path):
    assert main(["check", "--scenario", "hidden", "--protocol", "csma", "--horizon", "4",
                 "--counterexample", str(tmp_path / "c.jsonl")]) == 2


def test_json_output_and_config_files(tmp_path, capsys):
    path = tmp_path / "link.json"
    dump(two_node(), path)
    assert main(["explore", "--scenario", str(path), "--format", "json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["scenario"] == "two-node" and report["states"] > 0


def test_simulate_and_bisim(capsys):
    assert main(["simulate", "--scenario", "two-node", "--trials", "10", "--target"]) == 0
    assert "delivered 1.0000" in capsys.readouterr().out
    assert main(["bisim", "--scenario", "two-node", "--horizon", "8", "--right-order", "B,A"]) == 0


def test_trace_export_and_replay(tmp_path, capsys):
    out = tmp_path / "run.jsonl"
    assert main(["trace", "--scenario", "hidden", "--seed", "3", "--out", str(out)]) == 0
    assert main(["trace", "--replay", str(out)]) == 0
    assert "identical" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["explore", "--scenario", "ring"],
    ["explore", "--scenario", "missing.json"],
    ["check", "--threshold", "1.5"],
    ["frobnicate"],
    ["trace", "--replay", "/nonexistent/trace.jsonl"],
])
def test_usage_errors_exit_3(argv, capsys):
    assert main(argv) == 3
    assert "error" in capsys.readouterr().err


def test_unreachable_server_is_a_usage_error():
    assert main(["explore", "--server", "http://127.0.0.1:9"]) == 3


def test_machine_readable_output_matches_the_schema(capsys):
    assert main(["check", "--scenario", "two-node", "--min-prob", "--format", "machine-readable"]) == 0
    text = capsys.readouterr().out
    report = CheckResponse.model_validate_json(text)
    assert report.value == "1" and report.verdict == "holds"
    assert json.loads(report.model_dump_json()) == json.loads(text)
