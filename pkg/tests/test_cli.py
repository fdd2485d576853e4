import json
from importlib import resources

import jsonschema
import pytest

from obliv_kand.cli import EXIT_CHECK, EXIT_USER, main
from obliv_kand.instance import format_instance, symmetric_pair_instance


def schema(name):
    return json.loads(resources.files("obliv_kand").joinpath("schemas", f"{name}.json").read_text())


def run(capsys, *argv):
    code = main(list(argv) + ["--threads", "1"])
    out = capsys.readouterr()
    return code, out.out, out.err


def records(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def test_ratio_superoblivious(capsys):
    code, out, _ = run(capsys, "ratio", "-k", "2", "--superoblivious")
    assert code == 0
    rec = records(out)[0]
    jsonschema.validate(rec, schema("ratio"))
    assert rec["ratio"] == pytest.approx(4 / 9, abs=1e-6)


def test_ratio_methods_agree(capsys):
    _, a, _ = run(capsys, "ratio", "-k", "3", "--perturbed", "0.01", "0.001")
    _, b, _ = run(capsys, "ratio", "-k", "3", "--perturbed", "0.01", "0.001", "--method", "dual")
    assert records(a)[0]["ratio"] == pytest.approx(records(b)[0]["ratio"], abs=1e-7)


def test_ratio_explicit_and_files(capsys, tmp_path):
    w, s = tmp_path / "w.csv", tmp_path / "s.json"
    code, out, _ = run(capsys, "ratio", "-k", "2", "-t", "0,1", "-p", "0.5", "--weights-out", str(w), "--sidecar", str(s))
    assert code == 0
    assert records(out)[0]["ratio"] == pytest.approx(0.25, abs=1e-7)
    assert w.read_text().strip() and json.loads(s.read_text())["k"] == 2


def test_ratio_piecewise(capsys):
    code, out, _ = run(capsys, "ratio", "-k", "3", "--piecewise", "10", "0.7", "1.0")
    assert code == 0
    assert 0.2 < records(out)[0]["ratio"] < 0.2417


@pytest.mark.parametrize(
    "argv",
    [
        ["ratio", "-k", "2"],
        ["ratio", "-k", "2", "--superoblivious", "-p", "0.5"],
        ["ratio", "-k", "1", "--superoblivious"],
        ["ratio", "-k", "2", "-t", "0,0.5", "-p", "0.5"],
        ["ratio", "-k", "2", "-t", "0,1", "-p", "1.5"],
        ["grid", "-k", "2", "-l", "2", "--x", "0:1:0", "--y", "1"],
        ["value", "/nonexistent/file"],
        ["stream"],
    ],
)
def test_user_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == EXIT_USER
    assert err


def test_table_check(capsys, tmp_path):
    out_path = tmp_path / "t.csv"
    code, out, _ = run(capsys, "table", "-k", "2-3", "--check", "--out", str(out_path))
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("k,upper_bound,alpha_star,perturbed")
    assert len(lines) == 3 and out_path.read_text() == out


def test_grid(capsys, tmp_path):
    path = tmp_path / "g.csv"
    code, out, err = run(capsys, "grid", "-k", "2", "-l", "2", "--x", "0.5,0.6", "--y", "0.9:1:0.1", "--out", str(path))
    assert code == 0
    assert out.splitlines()[0] == "k,l,x,y,ratio,lp_iterations,seconds"
    assert len(out.splitlines()) == 5
    assert "best" in json.loads(err.strip().splitlines()[-1])
    assert json.loads((tmp_path / "g.csv.json").read_text())


def test_certify(capsys, tmp_path):
    table = tmp_path / "m.csv"
    code, out, _ = run(capsys, "certify", "-k", "3", "--margin-table", str(table))
    assert code == 0
    rec = records(out)[0]
    jsonschema.validate(rec, schema("certify"))
    assert rec["certified_lower_bound"] > rec["alpha_star"]
    assert rec["lp_primal_value"] >= rec["certified_lower_bound"] - 1e-9
    assert table.read_text().count("\n") > 10


def test_bernoulli_range(capsys, tmp_path):
    code, out, _ = run(capsys, "bernoulli", "-k", "2-6", "--table", str(tmp_path / "b.csv"))
    assert code == 0
    recs = records(out)
    assert [r["k"] for r in recs] == [2, 3, 4, 5, 6]
    for r in recs:
        jsonschema.validate(r, schema("bernoulli"))
        assert r["passed"]


def test_gen_then_value(capsys, tmp_path):
    path = tmp_path / "i.txt"
    assert run(capsys, "gen", "-k", "2", "-n", "8", "-m", "12", "--seed", "3", "-o", str(path))[0] == 0
    code, out, _ = run(capsys, "value", str(path), "--superoblivious")
    assert code == 0
    rec = records(out)[0]
    jsonschema.validate(rec, schema("value"))
    assert rec["n"] == 8 and rec["m"] == 12
    assert rec["ratio"] >= 4 / 9 - 1e-9


def test_value_symmetric_pair(capsys, tmp_path):
    path = tmp_path / "pair.txt"
    path.write_text(format_instance(symmetric_pair_instance(2)))
    code, out, _ = run(capsys, "value", str(path), "-p", "0.5", "-t", "0,1")
    assert code == 0
    rec = records(out)[0]
    assert rec["val"] == 0.5 and rec["obl"] == 0.25


@pytest.mark.parametrize("mode", ["random-order", "bounded-degree"])
def test_stream(capsys, tmp_path, mode):
    agg = tmp_path / "agg.csv"
    code, out, _ = run(
        capsys, "stream", "--mode", mode, "--gen", "2", "200", "800", "--degree-cap", "10",
        "--eps", "0.2", "--seeds", "3", "--aggregate", str(agg), "--perturbed", "0.01", "0.001",
    )
    assert code == 0
    recs = records(out)
    assert [r["seed"] for r in recs] == [0, 1, 2]
    for r in recs:
        jsonschema.validate(r, schema("stream"))
        assert 0 <= r["estimate"] <= 1.2
    assert agg.read_text().startswith("field,q1,q50,q99")


def test_stream_small_input_has_brute_force(capsys, tmp_path):
    path = tmp_path / "pair.txt"
    path.write_text(format_instance(symmetric_pair_instance(2)))
    code, out, _ = run(capsys, "stream", "--input", str(path), "--superoblivious")
    assert code == 0
    assert records(out)[0]["brute_force_value"] == 0.5


def test_exit_check_constant():
    assert EXIT_CHECK == 4
