import csv
import io
import json

import pytest

from filippov_lab.cli import main
from filippov_lab.scenarios import builtin_dict


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_classify_cubic(capsys):
    code, out, _ = run(capsys, "classify", "--scenario", "type_b_cubic", "--lo", "0", "--hi", "1", "--step", "0.1")
    assert code == 0
    assert "\r\n" in out
    kinds = {round(float(r["x"]), 6): r["kind"] for r in rows(out)}
    assert kinds[0.0] == "tangency" and kinds[0.5] == "tangency"
    assert all(kinds[x] == "crossing" for x in (0.1, 0.2, 0.3, 0.4, 0.7, 0.8, 0.9, 1.0))
    assert kinds[0.6] == "sliding"
    assert {r["multiplicity"] for r in rows(out) if r["kind"] == "tangency"} == {"2"}


def test_classify_circle(capsys):
    code, out, _ = run(capsys, "classify", "--scenario", "type_a_circle", "--param", "b=0.1")
    assert code == 0
    table = rows(out)
    tangencies = [float(r["x"]) for r in table if r["kind"] == "tangency"]
    assert tangencies == [0.0]
    # X+h = x + b H (y - 1) changes sign at the fold while X-h = 1: crossing for x > 0, sliding for x < 0
    assert all(r["kind"] == "crossing" for r in table if float(r["x"]) > 0)
    assert all(r["kind"] == "sliding" for r in table if float(r["x"]) < 0)


def test_classify_empty_grid(capsys):
    code, _, err = run(capsys, "classify", "--scenario", "type_b_cubic", "--lo", "1", "--hi", "0")
    assert code == 2 and "empty" in err


def test_simulate_zero_time(capsys):
    code, out, _ = run(capsys, "simulate", "--scenario", "type_b_cubic", "--p0", "0.1,0.2", "--t-max", "0")
    assert code == 0
    assert len(rows(out)) == 1


def test_simulate_crossing_and_sliding(tmp_path, capsys):
    code, _, _ = run(capsys, "simulate", "--scenario", "type_b_cubic", "--p0", "0.1,0", "--t-max", "1",
                     "--out", str(tmp_path))
    assert code == 0
    events = json.loads((tmp_path / "events.json").read_text(encoding="utf-8"))
    assert any(e["kind"] == "sigma-cross" for e in events)
    traj = rows((tmp_path / "trajectory.csv").read_text(encoding="utf-8"))
    assert [float(r["t"]) for r in traj] == sorted({float(r["t"]) for r in traj})
    code, out, _ = run(capsys, "simulate", "--scenario", "type_a_circle", "--p0=-0.5,0.1", "--t-max", "2",
                       "--events")
    assert code == 0 and "sliding-entry" in out


def test_simulate_outside_window(capsys):
    code, _, err = run(capsys, "simulate", "--scenario", "type_b_cubic", "--p0", "5,5")
    assert code == 2 and "window" in err


def test_numerical_failure_exit_code(capsys):
    code, _, err = run(capsys, "simulate", "--scenario", "type_b_cubic", "--p0", "0.1,0.2", "--tol", "max_steps=3")
    assert code == 3 and "numerical failure" in err


@pytest.mark.parametrize("argv", [
    ["classify", "--scenario", "nope"],
    ["classify", "--scenario", "type_a_circle", "--param", "b=0.7"],
    ["classify", "--scenario", "type_a_circle", "--param", "b"],
    ["simulate", "--scenario", "type_b_cubic", "--p0", "0,0.1", "--tol", "speed=2"],
    ["return-map", "--scenario", "type_b_cubic", "--phi", "bump:1:1.0", "--eps", "1e-3"],
])
def test_invalid_input_exit_code(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err


def test_validation_failure_lists_diagnostics(tmp_path, capsys):
    d = builtin_dict("type_b_cubic")
    d["polycycle"]["crossings"] = [[0.6, 0.0]]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(d), encoding="utf-8")
    code, _, err = run(capsys, "classify", "--scenario", str(path))
    assert code == 2 and "q_1" in err


def test_return_map_table(capsys):
    code, out, _ = run(capsys, "return-map", "--scenario", "type_b_cubic", "--u", "0.05,0.1")
    assert code == 0
    table = rows(out)
    assert list(table[0]) == ["input", "output", "derivative"]
    assert float(table[0]["output"]) == pytest.approx(0.0023863759908, rel=1e-8)


def test_transition_map_outputs(tmp_path, capsys):
    code, _, _ = run(capsys, "transition-map", "--scenario", "type_a_circle", "--eps", "2e-3,1e-3",
                     "--lambda", "0.6", "--out", str(tmp_path))
    assert code == 0
    summary = json.loads((tmp_path / "transition_map.json").read_text(encoding="utf-8"))
    assert [r["eps"] for r in summary["rows"]] == [2e-3, 1e-3]
    assert len(rows((tmp_path / "transition_map.csv").read_text(encoding="utf-8"))) == 18


def test_verify_b_on_type_a(capsys):
    code, _, err = run(capsys, "verify", "B", "--scenario", "type_a_circle")
    assert code == 2 and "type (b)" in err


def test_verify_a_nonexistence(capsys):
    code, out, _ = run(capsys, "verify", "A", "--scenario", "type_a_circle", "--param", "b=-0.1",
                       "--eps", "8e-3,4e-3,2e-3,1e-3", "--lambda", "0.75")
    assert code == 0
    v = json.loads(out)
    assert v["agree"] is True and v["inputs"]["discriminant"] > 0
    assert {"K", "S", "discriminant"} <= set(v["inputs"]) and len(v["rows"]) == 4


def test_verify_center_is_inconclusive(capsys):
    code, out, _ = run(capsys, "verify", "A", "--scenario", "type_a_circle", "--param", "b=0")
    assert code == 1 and json.loads(out)["status"] == "inconclusive"


def test_sweep_is_deterministic(tmp_path, capsys):
    argv = ["sweep", "--scenario", "type_a_circle", "--param", "b=0.1", "--eps", "8e-3,4e-3,2e-3,1e-3",
            "--lambda", "0.75"]
    a = run(capsys, *argv, "--out", str(tmp_path / "a"))
    b = run(capsys, *argv, "--out", str(tmp_path / "b"))
    assert a[0] == b[0] == 0
    ja, jb = (tmp_path / "a" / "sweep.json").read_bytes(), (tmp_path / "b" / "sweep.json").read_bytes()
    assert ja == jb
    assert len(list((tmp_path / "a").glob("cycle_*.csv"))) == 4


@pytest.mark.slow
def test_verify_a_existence(capsys):
    code, out, _ = run(capsys, "verify", "A", "--scenario", "type_a_circle", "--param", "b=0.1", "--lambda", "0.75")
    assert code == 0 and json.loads(out)["status"] == "agree"
