import json

import pytest

from dynpipe.cli import EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, fmt, main

TABLE1 = {"t_2q_ns": 50, "t_meas_ns": 100, "p_phys": 1e-3, "eps_raw": 1e-3}


def write(path, obj):
    path.write_text(json.dumps(obj), encoding="utf-8")
    return str(path)


def test_fmt():
    assert fmt(1234567.0) == "1.23457e+06"
    assert fmt(7) == "7" and fmt(True) == "1" and fmt((3, 9)) == "3-9"
    assert fmt(float("inf")) == "inf"


def test_simulate_corner(tmp_path):
    spec = write(tmp_path / "s.json", {"physical_params": TABLE1, "code_distances": [3, 9, 15]})
    out = tmp_path / "o"
    assert main(["simulate", spec, "--out", str(out)]) == EXIT_OK
    header, row = (out / "summary.csv").read_text().splitlines()
    vals = dict(zip(header.split(","), row.split(",")))
    assert vals["buffer_size"] == "15"
    rounds = float(vals["t_rounds"]) - float(vals["expected_delay_rounds"])
    # fill of the lower pipeline's outputs, then the d=15 factory runs uninterrupted
    assert int(vals["launch_round"]) + 165 == pytest.approx(rounds, abs=0.01)
    assert (out / "trace.csv").exists() and (out / "manifest.json").exists()


def test_simulate_with_monte_carlo(tmp_path, capsys):
    spec = write(tmp_path / "s.json", {"code_distances": [3, 9], "budget": 3400, "buffer_size": 4})
    out = tmp_path / "o"
    assert main(["simulate", spec, "--preset", "supercond", "--out", str(out), "--mc-samples", "2000", "--seed", "1"]) == 0
    assert "mc_delay_rounds" in (out / "summary.csv").read_text()


def test_missing_field_exit_code(tmp_path, capsys):
    spec = write(tmp_path / "s.json", {"physical_params": TABLE1})
    assert main(["simulate", spec, "--out", str(tmp_path / "o")]) == EXIT_INPUT
    assert "code_distances" in capsys.readouterr().err


def test_bad_json_reports_line(tmp_path, capsys):
    p = tmp_path / "s.json"
    p.write_text('{\n "code_distances": [3, 9],\n oops\n}')
    assert main(["pareto", str(p), "--out", str(tmp_path / "o")]) == EXIT_INPUT
    assert "s.json:3" in capsys.readouterr().err


def test_small_buffer_is_infeasible(tmp_path, capsys):
    spec = write(tmp_path / "s.json", {"code_distances": [3, 9], "budget": 5000, "buffer_size": 3})
    assert main(["simulate", spec, "--preset", "supercond", "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE
    assert "buffer too small" in capsys.readouterr().err


def test_majorana_needs_params_but_allows_distance_one(tmp_path):
    spec = write(tmp_path / "s.json", {"code_distances": [1, 3]})
    assert main(["pareto", spec, "--preset", "majorana", "--out", str(tmp_path / "a")]) == EXIT_INPUT
    params = {"t_2q_ns": 50, "t_meas_ns": 100, "p_phys": 1e-5, "eps_raw": 1e-4}
    spec = write(tmp_path / "m.json", {"physical_params": params, "code_distances": [1, 3]})
    assert main(["pareto", spec, "--preset", "majorana", "--out", str(tmp_path / "b"), "--budget-grid", "4"]) == 0
    assert main(["pareto", spec, "--out", str(tmp_path / "c")]) == EXIT_INPUT


def test_pareto_single_level(tmp_path):
    spec = write(tmp_path / "s.json", {"code_distances": [5]})
    out = tmp_path / "o"
    assert main(["pareto", spec, "--preset", "supercond", "--out", str(out)]) == 0
    lines = (out / "front.csv").read_text().splitlines()
    assert lines[0] == "q_physical,t_rounds,t_seconds,buffer_size,budget,volume,best"
    assert len(lines) == 2 and lines[1].endswith(",1")


def test_pareto_rows_sorted_with_one_best(tmp_path):
    spec = write(tmp_path / "s.json", {"code_distances": [3, 7]})
    out = tmp_path / "o"
    assert main(["pareto", spec, "--preset", "supercond", "--out", str(out), "--budget-grid", "8"]) == 0
    rows = [r.split(",") for r in (out / "front.csv").read_text().splitlines()[1:]]
    qs = [int(r[0]) for r in rows]
    ts = [float(r[1]) for r in rows]
    assert qs == sorted(qs) and ts == sorted(ts, reverse=True)
    assert sum(r[-1] == "1" for r in rows) == 1


def test_bench_usage_error(tmp_path):
    assert main(["bench-two-level", "--d-min", "9", "--d-max", "7", "--out", str(tmp_path)]) == EXIT_INPUT


def test_app_command(tmp_path):
    req = write(tmp_path / "r.json", {"preset": "supercond", "applications": [
        {"name": "ising", "required_fidelity": 7e-10, "magic_count": 1_000_000, "runtime_s": 10.0, "code_distances": [3, 9]},
    ]})
    out = tmp_path / "o"
    assert main(["app", req, "--out", str(out)]) == 0
    header, row = (out / "app.csv").read_text().splitlines()
    assert header == "name,seq_qubits,par_qubits,dyn_qubits,red_seq_pct,red_par_pct"
    slow = write(tmp_path / "slow.json", {"preset": "supercond", "required_fidelity": 7e-10, "magic_count": 5,
                                          "runtime_s": 1e-6, "code_distances": [3, 9]})
    assert main(["app", slow, "--out", str(tmp_path / "p")]) == EXIT_INFEASIBLE


def test_byte_identical_reruns(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    write(tmp_path / "s.json", {"code_distances": [3, 7], "buffer_size": 6})
    argv = ["pareto", "s.json", "--preset", "supercond", "--out", "o", "--budget-grid", "6"]
    assert main(argv) == 0
    first = {p.name: p.read_bytes() for p in (tmp_path / "o").iterdir()}
    assert main(argv) == 0
    second = {p.name: p.read_bytes() for p in (tmp_path / "o").iterdir()}
    assert first == second
    manifest = json.loads(first["manifest.json"])
    assert manifest["command"] == "pareto" and len(manifest["inputs"][0]["sha256"]) == 64
