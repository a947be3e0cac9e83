import json
import subprocess
import sys

import numpy as np
import pytest

from xbargraph import cli


def _write_graph(path, lines):
    path.write_text("".join(f"{u} {v} {w}\n" for u, v, w in lines))


SMALL = [(0, 1, 1), (0, 2, 1), (1, 2, 1), (2, 0, 1), (2, 3, 1), (3, 0, 1)]


@pytest.fixture
def small_graph(tmp_path):
    p = tmp_path / "g.txt"
    _write_graph(p, SMALL)
    return p


def _run(argv):
    return cli.main([str(a) for a in argv])


def test_gen_preprocess_run_verify_pipeline(tmp_path, capsys):
    edges = tmp_path / "g.txt"
    binp = tmp_path / "g.bin"
    assert _run(["gen", "-o", edges, "--V", 40, "--density", 0.08,
                 "--seed", 3]) == 0
    assert _run(["preprocess", "-i", edges, "-o", binp,
                 "--C", 4, "--N", 2, "--G", 2]) == 0
    out = capsys.readouterr().out
    assert "vertices" in out and "edges" in out

    for prog in ("pagerank", "spmv", "bfs", "sssp"):
        rep = tmp_path / f"{prog}.json"
        code = _run(["verify", "-p", prog, "-i", binp, "-o", rep])
        assert code == 0, capsys.readouterr()
        data = json.loads(rep.read_text())
        assert data["verify"]["passed"] is True
        assert data["config"]["program"] == prog
        line = capsys.readouterr().out
        assert "-> PASS" in line


def test_run_report_structure(tmp_path, small_graph):
    rep = tmp_path / "run.json"
    assert _run(["run", "-p", "pagerank", "-i", small_graph, "-o", rep,
                 "--C", 2, "--N", 1, "--G", 1]) == 0
    data = json.loads(rep.read_text())
    assert data["format_version"] == 1
    cfg = data["config"]
    assert cfg["num_vertices"] == 4 and cfg["c"] == 2
    assert data["preprocess"]["num_edges"] == len(SMALL)
    assert set(data["counters"]) >= {"tiles_processed", "ge_cycles",
                                     "empty_stream"}
    cost = data["cost"]
    assert cost["energy_joules"] == pytest.approx(
        cost["energy_programming"] + cost["energy_compute"]
        + cost["energy_adc"] + cost["energy_registers"])
    # 4 vertices is far below the inline ceiling
    assert len(data["results"]["values"]) == 4
    assert data["results"]["format"] == "frac"
    assert len(data["iteration_log"]) == data["iterations"]
    assert data["result_hash"]


def test_reports_are_byte_identical_across_reruns(tmp_path, small_graph):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert _run(["run", "-p", "sssp", "-i", small_graph, "-o", out,
                     "--C", 2, "--N", 1, "--G", 1]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_worker_and_skip_choices_leave_result_alone(tmp_path, small_graph):
    outs = []
    for tag, extra in (("w1", []), ("w4", ["--workers", 4]),
                       ("ns", ["--no-skip-empty"]),
                       ("ref", ["--backend", "reference"])):
        out = tmp_path / f"{tag}.json"
        assert _run(["run", "-p", "pagerank", "-i", small_graph, "-o", out,
                     "--C", 2, "--N", 1, "--G", 1] + extra) == 0
        outs.append(json.loads(out.read_text()))
    hashes = {d["result_hash"] for d in outs}
    assert len(hashes) == 1
    counters = [d["counters"] for d in outs]
    assert all(c == counters[0] for c in counters)


def test_skip_empty_off_costs_more(tmp_path):
    # sparse enough that most subgraphs hold no edges
    edges = tmp_path / "sparse.txt"
    _write_graph(edges, [(0, 11, 1), (11, 3, 1), (3, 7, 1), (7, 0, 1)])
    costs = {}
    for tag, extra in (("on", []), ("off", ["--no-skip-empty"])):
        out = tmp_path / f"{tag}.json"
        assert _run(["run", "-p", "pagerank", "-i", edges, "-o", out,
                     "--C", 2, "--N", 1, "--G", 1] + extra) == 0
        costs[tag] = json.loads(out.read_text())
    assert costs["on"]["result_hash"] == costs["off"]["result_hash"]
    assert costs["on"]["counters"]["empty_stream"]["tiles"] > 0
    assert costs["off"]["cost"]["time_seconds"] > \
        costs["on"]["cost"]["time_seconds"]
    assert costs["off"]["cost"]["energy_joules"] > \
        costs["on"]["cost"]["energy_joules"]


def test_binary_header_conflicts_with_flags(tmp_path, small_graph):
    binp = tmp_path / "g.bin"
    assert _run(["preprocess", "-i", small_graph, "-o", binp,
                 "--C", 2, "--N", 1, "--G", 1]) == 0
    rep = tmp_path / "r.json"
    # matching flags are fine
    assert _run(["run", "-p", "bfs", "-i", binp, "-o", rep,
                 "--C", 2, "--N", 1, "--G", 1]) == 0
    # a different geometry contradicts the stored header
    assert _run(["run", "-p", "bfs", "-i", binp, "-o", rep,
                 "--C", 4, "--N", 1, "--G", 1]) == 2


def test_injected_fault_fails_verification(tmp_path, small_graph, capsys):
    rep = tmp_path / "r.json"
    code = _run(["verify", "-p", "sssp", "-i", small_graph, "-o", rep,
                 "--C", 2, "--N", 1, "--G", 1, "--inject-weight-error"])
    assert code == 1
    assert "FAIL" in capsys.readouterr().out
    assert json.loads(rep.read_text())["verify"]["passed"] is False


def test_bad_inputs_exit_two(tmp_path, capsys):
    rep = tmp_path / "r.json"
    assert _run(["run", "-p", "bfs", "-i", tmp_path / "missing.txt",
                 "-o", rep]) == 2
    junk = tmp_path / "junk.txt"
    junk.write_text("not numbers at all\n")
    assert _run(["run", "-p", "bfs", "-i", junk, "-o", rep]) == 2
    zero = tmp_path / "zero.txt"
    _write_graph(zero, [(0, 1, 0), (1, 0, 1)])
    assert _run(["run", "-p", "sssp", "-i", zero, "-o", rep,
                 "--C", 2, "--N", 1, "--G", 1]) == 2
    err = capsys.readouterr().err
    assert "error:" in err


def test_spmv_reads_input_vector(tmp_path, small_graph):
    xp = tmp_path / "x.txt"
    np.savetxt(xp, np.array([0.1, 0.2, 0.3, 0.4]))
    rep = tmp_path / "r.json"
    assert _run(["verify", "-p", "spmv", "-i", small_graph, "-o", rep,
                 "--C", 2, "--N", 1, "--G", 1, "--x", xp]) == 0
    short = tmp_path / "short.txt"
    np.savetxt(short, np.array([0.1, 0.2]))
    assert _run(["run", "-p", "spmv", "-i", small_graph, "-o", rep,
                 "--C", 2, "--N", 1, "--G", 1, "--x", short]) == 2


def test_trace_csv(tmp_path, small_graph):
    rep = tmp_path / "r.json"
    trace = tmp_path / "t.csv"
    assert _run(["run", "-p", "bfs", "-i", small_graph, "-o", rep,
                 "--C", 2, "--N", 1, "--G", 1, "--trace", trace]) == 0
    lines = trace.read_text().strip().splitlines()
    assert lines[0] == "iteration,tiles,cycles,metric"
    assert len(lines) == 1 + json.loads(rep.read_text())["iterations"]


def test_cost_overrides_flow_into_report(tmp_path, small_graph):
    cfg = tmp_path / "cost.cfg"
    cfg.write_text("e_adc = 7e-12\nt_reg = 1e-11\n")
    rep = tmp_path / "r.json"
    assert _run(["run", "-p", "pagerank", "-i", small_graph, "-o", rep,
                 "--C", 2, "--N", 1, "--G", 1, "--cost", cfg]) == 0
    data = json.loads(rep.read_text())
    assert data["config"]["cost_params"]["e_adc"] == 7e-12
    assert data["cost"]["time_registers"] > 0


def test_report_csv_collection(tmp_path, small_graph):
    paths = []
    for i, prog in enumerate(("sssp", "pagerank")):
        rep = tmp_path / f"{prog}.json"
        assert _run(["run", "-p", prog, "-i", small_graph, "-o", rep,
                     "--C", 2, "--N", 1, "--G", 1]) == 0
        paths.append(rep)
    out = tmp_path / "sweep.csv"
    assert _run(["report", "-i"] + paths + ["-o", out]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0].split(",") == cli._CSV_COLUMNS
    assert len(lines) == 3
    # same density, so rows order by program name
    assert lines[1].startswith("pagerank") and lines[2].startswith("sssp")

    empty = tmp_path / "none.csv"
    assert _run(["report", "-o", empty]) == 0
    assert empty.read_text().strip() == ",".join(cli._CSV_COLUMNS)

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"hello": 1}))
    assert _run(["report", "-i", bad, "-o", out]) == 2


def test_epsilon_flag_parsing(tmp_path, small_graph):
    rep = tmp_path / "r.json"
    assert _run(["run", "-p", "pagerank", "-i", small_graph, "-o", rep,
                 "--C", 2, "--N", 1, "--G", 1, "--eps", "none",
                 "--max-iter", 6]) == 0
    data = json.loads(rep.read_text())
    assert data["config"]["epsilon"] is None
    assert data["iterations"] == 6 and data["converged"] is False
    assert _run(["run", "-p", "pagerank", "-i", small_graph, "-o", rep,
                 "--C", 2, "--N", 1, "--G", 1, "--eps", "0.01"]) == 0
    assert json.loads(rep.read_text())["config"]["epsilon"] == 0.01


def test_env_var_enables_logging(tmp_path, small_graph, monkeypatch, capsys):
    rep = tmp_path / "r.json"
    monkeypatch.setenv("GRAPHR_LOG", "INFO")
    assert _run(["run", "-p", "bfs", "-i", small_graph, "-o", rep,
                 "--C", 2, "--N", 1, "--G", 1]) == 0
    err = capsys.readouterr().err
    assert "INFO xbargraph" in err and "iterations" in err

    monkeypatch.delenv("GRAPHR_LOG")
    assert _run(["run", "-p", "bfs", "-i", small_graph, "-o", rep,
                 "--C", 2, "--N", 1, "--G", 1]) == 0
    assert "INFO xbargraph" not in capsys.readouterr().err


def test_console_script_subprocess(tmp_path):
    edges = tmp_path / "g.txt"
    _write_graph(edges, SMALL)
    rep = tmp_path / "r.json"
    proc = subprocess.run(
        [sys.executable, "-m", "xbargraph.cli", "verify", "-p", "bfs",
         "-i", str(edges), "-o", str(rep), "--C", "2", "--N", "1",
         "--G", "1"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "PASS" in proc.stdout
    assert json.loads(rep.read_text())["verify"]["passed"] is True
