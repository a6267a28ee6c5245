"""CLI surface: flags, exit codes, output formats, report files."""

import json

import pytest

from wrnlab.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def stdout_docs(out):
    return [json.loads(line) for line in out.strip().splitlines() if line]


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def test_simulate_alg2_exhaustive(capsys):
    code, out, _ = run_cli(
        capsys,
        "simulate", "--protocol", "alg2", "--k", "3",
        "--inputs", "a,b,c", "--schedule", "exhaustive",
    )
    assert code == 0
    docs = stdout_docs(out)
    summary = docs[-1]["summary"]
    assert summary["executions"] == 6
    assert summary["max_distinct_decisions"] == 2
    assert summary["violations"] == 0
    traces = docs[:-1]
    assert len(traces) == 6
    assert all(t["protocol"] == "alg2" for t in traces)


def test_simulate_alg4_exhaustive_agreement(capsys):
    code, out, _ = run_cli(
        capsys,
        "simulate", "--protocol", "alg4", "--inputs", "0,1",
        "--schedule", "exhaustive",
    )
    assert code == 0
    summary = stdout_docs(out)[-1]["summary"]
    assert summary["executions"] == 2
    assert summary["max_distinct_decisions"] == 1


def test_simulate_alg2_k1_usage_error(capsys):
    code, _, err = run_cli(
        capsys, "simulate", "--protocol", "alg2", "--k", "1"
    )
    assert code == 2
    assert "k >= 2" in err


def test_simulate_random_requires_seed(capsys):
    code, _, err = run_cli(
        capsys,
        "simulate", "--protocol", "alg2", "--k", "3", "--schedule", "random",
    )
    assert code == 2
    assert "--seed" in err


def test_simulate_random_reproducible(capsys):
    argv = (
        "simulate", "--protocol", "grouped", "--k", "3", "--n", "6",
        "--schedule", "random", "--seed", "13", "--trials", "50",
        "--format", "csv",
    )
    code1, out1, _ = run_cli(capsys, *argv)
    code2, out2, _ = run_cli(capsys, *argv)
    assert code1 == code2 == 0
    assert out1 == out2
    header = out1.splitlines()[0]
    assert header == "schedule-id,distinct-decisions,valid,agreed"
    assert len(out1.splitlines()) == 51


def test_simulate_alg3_exhaustive(capsys):
    code, out, _ = run_cli(
        capsys,
        "simulate", "--protocol", "alg3", "--k", "3",
        "--participants", "0,3,4", "--inputs", "a,b,c",
        "--schedule", "exhaustive", "--max-traces", "0",
    )
    assert code == 0
    summary = stdout_docs(out)[-1]["summary"]
    assert summary["max_distinct_decisions"] <= 2
    assert summary["complete"] is True


def test_simulate_schedule_file(capsys, tmp_path):
    schedule_file = tmp_path / "schedules.json"
    schedule_file.write_text(json.dumps([[0, 1], [1, 0]]))
    code, out, _ = run_cli(
        capsys,
        "simulate", "--protocol", "alg4", "--inputs", "x,y",
        "--schedule", "file", "--schedule-file", str(schedule_file),
    )
    assert code == 0
    docs = stdout_docs(out)
    assert docs[0]["decisions"] == {"0": "x", "1": "x"}
    assert docs[1]["decisions"] == {"0": "y", "1": "y"}


def test_simulate_trace_format(capsys):
    code, out, _ = run_cli(
        capsys,
        "simulate", "--protocol", "alg4", "--inputs", "x,y",
        "--schedule", "exhaustive",
    )
    assert code == 0
    trace = stdout_docs(out)[0]
    assert set(trace) == {
        "protocol", "k", "inputs", "schedule", "events",
        "decisions", "crashed", "violations",
    }
    event = trace["events"][0]
    assert set(event) == {"pid", "obj", "req", "resp"}


def test_simulate_out_directory(capsys, tmp_path):
    out_dir = tmp_path / "report"
    code, _, _ = run_cli(
        capsys,
        "simulate", "--protocol", "alg2", "--k", "3",
        "--schedule", "exhaustive", "--out", str(out_dir),
    )
    assert code == 0
    assert (out_dir / "aggregate.csv").exists()
    assert (out_dir / "traces.jsonl").exists()
    assert (out_dir / "distinct_decisions.png").exists()
    header = (out_dir / "aggregate.csv").read_text().splitlines()[0]
    assert header == "schedule-id,distinct-decisions,valid,agreed"


def test_simulate_env_budget(capsys, monkeypatch):
    monkeypatch.setenv("WRNLAB_BUDGET", "2")
    code, out, _ = run_cli(
        capsys,
        "simulate", "--protocol", "alg2", "--k", "3", "--schedule", "exhaustive",
    )
    assert code == 1
    summary = stdout_docs(out)[-1]["summary"]
    assert summary["complete"] is False


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def test_analyze_alg4(capsys):
    code, out, _ = run_cli(
        capsys,
        "analyze", "--protocol", "alg4", "--inputs", "0,1",
        "--case-k-max", "4",
    )
    assert code == 0
    doc = stdout_docs(out)[0]
    assert doc["initial_valence"] == "bivalent"
    assert doc["critical"] == [doc["initial"]]
    assert doc["case_checks"]["counterexamples"] == 0
    assert doc["k2_order_dependence"] == {
        "p_response_order_dependent": True,
        "q_response_order_dependent": True,
    }


def test_analyze_unknown_protocol(capsys):
    code, _, err = run_cli(capsys, "analyze", "--protocol", "alg3")
    assert code == 2


def test_analyze_out_files(capsys, tmp_path):
    out_dir = tmp_path / "analysis"
    code, _, _ = run_cli(
        capsys,
        "analyze", "--inputs", "0,1", "--case-k-max", "3",
        "--out", str(out_dir),
    )
    assert code == 0
    assert (out_dir / "analysis.json").exists()
    assert (out_dir / "valences.png").exists()


# ---------------------------------------------------------------------------
# search
# ---------------------------------------------------------------------------


def test_search_k2_expect_solvable(capsys):
    code, out, _ = run_cli(
        capsys, "search", "--k", "2", "--depth", "1", "--expect", "solvable"
    )
    assert code == 0
    summary = stdout_docs(out)[-1]["summary"]
    assert summary["solvable"] == 2
    assert summary["patterns"] == 4


def test_search_k3_expect_unsolvable(capsys):
    code, out, _ = run_cli(
        capsys, "search", "--k", "3", "--depth", "2", "--expect", "unsolvable"
    )
    assert code == 0
    summary = stdout_docs(out)[-1]["summary"]
    assert summary["unsolvable"] == summary["patterns"] == 144


def test_search_depth_zero_usage(capsys):
    code, _, _ = run_cli(capsys, "search", "--k", "3", "--depth", "0")
    assert code == 2


def test_search_expectation_miss(capsys):
    code, _, _ = run_cli(
        capsys, "search", "--k", "3", "--depth", "1", "--expect", "solvable"
    )
    assert code == 1


# ---------------------------------------------------------------------------
# lincheck
# ---------------------------------------------------------------------------


def test_lincheck_reference_accepts(capsys):
    code, out, _ = run_cli(
        capsys,
        "lincheck", "--impl", "reference-atomic", "--threads", "4",
        "--ops", "3", "--seed", "7",
    )
    assert code == 0
    summary = stdout_docs(out)[-1]["summary"]
    assert summary["accepted"] == 1


def test_lincheck_buggy_expect_reject(capsys):
    code, out, _ = run_cli(
        capsys,
        "lincheck", "--impl", "buggy-split", "--threads", "4",
        "--ops", "2", "--seeds", "20", "--expect", "reject",
    )
    assert code == 0
    summary = stdout_docs(out)[-1]["summary"]
    assert summary["rejected"] >= 1


def test_lincheck_unknown_impl(capsys):
    code, _, err = run_cli(capsys, "lincheck", "--impl", "nosuch", "--seed", "1")
    assert code == 2
    assert "nosuch" in err


def test_lincheck_requires_seed(capsys):
    code, _, _ = run_cli(capsys, "lincheck", "--impl", "reference-atomic")
    assert code == 2


def test_lincheck_out_files(capsys, tmp_path):
    out_dir = tmp_path / "lin"
    code, _, _ = run_cli(
        capsys,
        "lincheck", "--impl", "reference-atomic", "--threads", "2",
        "--ops", "2", "--seeds", "3", "--out", str(out_dir),
    )
    assert code == 0
    assert (out_dir / "histories.jsonl").exists()
    assert (out_dir / "verdicts.jsonl").exists()
    assert (out_dir / "verdicts.png").exists()
    first = json.loads((out_dir / "histories.jsonl").read_text().splitlines()[0])
    assert first["ev"] == "inv"


# ---------------------------------------------------------------------------
# parser basics
# ---------------------------------------------------------------------------


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as excinfo:
        main(["frobnicate"])
    assert excinfo.value.code == 2


def test_unknown_protocol_choice_exits_2():
    with pytest.raises(SystemExit) as excinfo:
        main(["simulate", "--protocol", "nosuch"])
    assert excinfo.value.code == 2
