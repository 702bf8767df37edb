import json

import pytest

from ghlab import cli, thermo as th


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_rep_build_and_identity_deform(tmp_path, capsys):
    base = tmp_path / "base.json"
    code, out, _ = run(capsys, "rep", "build", "--type", "octagon", "-o", str(base))
    assert code == 0
    assert json.loads(out)["relator_residual"] < 1e-12
    same = tmp_path / "same.json"
    code, _, _ = run(capsys, "rep", "deform", "--input", str(base), "--t", "0", "-o", str(same))
    assert code == 0
    assert same.read_bytes() == base.read_bytes()


def test_rep_deform_too_far_is_numerical_failure(tmp_path, capsys):
    base = tmp_path / "base.json"
    run(capsys, "rep", "build", "-o", str(base))
    code, _, err = run(capsys, "rep", "deform", "--input", str(base), "--t", "10")
    assert code == cli.EXIT_NUMERIC
    assert "numerical failure" in err


def test_unknown_rep_type(capsys):
    assert run(capsys, "rep", "build", "--type", "torus")[0] == cli.EXIT_USAGE


def test_spectrum_deterministic_across_threads(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, "spectrum", "--max-word-len", "3", "--threads", "1", "-o", str(a))[0] == 0
    assert run(capsys, "spectrum", "--max-word-len", "3", "--threads", "4", "-o", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_entropy_window_beyond_data(tmp_path, capsys):
    spec = tmp_path / "s.csv"
    run(capsys, "spectrum", "--max-word-len", "1", "-o", str(spec))
    code, _, err = run(capsys, "entropy", "--spectrum", str(spec), "--window", "8:14")
    assert code == cli.EXIT_USAGE
    assert "InsufficientData" in err


def test_thermo_golden_ratio(tmp_path, capsys):
    graph = tmp_path / "g.json"
    th.save_graph(th.full_shift(2), graph)
    code, out, _ = run(capsys, "thermo", "--graph", str(graph), "--roof", "1,2")
    assert code == 0
    data = json.loads(out)
    assert data["entropy"] == pytest.approx(0.4812118250596034, abs=1e-9)
    assert data["pressure"] == pytest.approx(0.6931471805599453, abs=1e-12)


def test_thermo_pressure_form(tmp_path, capsys):
    graph = tmp_path / "g.json"
    th.save_graph(th.full_shift(2), graph)
    code, out, _ = run(capsys, "thermo", "--graph", str(graph), 
                       "--potential=-0.6931471805599453,-0.6931471805599453", "--tangent=1,-1")
    assert code == 0
    assert json.loads(out)["pressure_form"] == pytest.approx(1.4426950408889634, rel=1e-6)


def test_thermo_missing_graph(tmp_path, capsys):
    assert run(capsys, "thermo", "--graph", str(tmp_path / "nope.json"))[0] == cli.EXIT_USAGE


def test_verify_identities(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "identities")
    assert code == 0
    assert "FAIL" not in out
    assert out.strip().endswith("checks passed")
