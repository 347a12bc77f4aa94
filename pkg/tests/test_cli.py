import csv
import io
import json

import pytest

from optista.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_run_optista(capsys):
    code, out, err = _run(capsys, "run", "--method", "optista", "--instance", "lasso", "--n", "10", "--seed", "7")
    assert code == 0 and err.startswith("PASS")
    rows = _rows(out)
    assert list(rows[0]) == ["iter", "objective", "gap", "bound_at_N"]
    assert len(rows) == 11
    assert float(rows[-1]["gap"]) <= float(rows[-1]["bound_at_N"])


def test_run_fista_classical_rate(capsys):
    code, out, _ = _run(capsys, "run", "--method", "fista", "--instance", "lasso", "--n", "10")
    assert code == 0
    last = _rows(out)[-1]
    # the stated bound is at most the classical 2 L R^2 / (N+1)^2
    assert float(last["gap"]) <= float(last["bound_at_N"])


@pytest.mark.parametrize("argv", [
    ["run", "--method", "optista", "--n", "0"],
    ["run", "--method", "nope"],
    ["run", "--instance", "nope"],
    ["run", "--method", "ogm", "--instance", "lasso"],
    ["run", "--param", "oops"],
    ["table", "--methods", "optista,nope", "--n-max", "2"],
    ["lowerbound", "proximal", "--gammas", "1,-2"],
    ["certify", "--n-max", "0"],
    [],
])
def test_usage_errors(capsys, argv):
    assert _run(capsys, *argv)[0] == 2


def test_certify(capsys):
    code, out, _ = _run(capsys, "certify", "--n-max", "10")
    assert code == 0
    rows = _rows(out)
    assert list(rows[0]) == ["N", "residual", "min_eig", "nu_R2", "bound", "pass"]
    assert [r["pass"] for r in rows] == ["PASS"] * 10


def test_certify_n1_value(capsys):
    _, out, _ = _run(capsys, "certify", "--n-max", "1")
    assert float(_rows(out)[0]["nu_R2"]) == pytest.approx(1 / 6, rel=1e-15)


def test_certify_perturbed_fails(capsys):
    code, out, err = _run(capsys, "certify", "--n-max", "3", "--perturb")
    assert code == 1 and err.startswith("FAIL")
    assert all(r["pass"] == "FAIL" for r in _rows(out))


def test_certify_json(capsys):
    _, out, _ = _run(capsys, "certify", "--n-max", "2", "--format", "json")
    recs = [json.loads(line) for line in out.splitlines()]
    assert [r["N"] for r in recs] == [1, 2] and all(r["pass"] for r in recs)


def test_lowerbound_composite(capsys):
    code, out, _ = _run(capsys, "lowerbound", "composite", "--n-max", "10")
    assert code == 0
    rows = _rows(out)
    assert len(rows) == 10 and all(float(r["rel_mismatch"]) <= 1e-6 for r in rows)
    assert float(rows[0]["bound"]) == pytest.approx(1 / 6, rel=1e-15)


def test_lowerbound_proximal(capsys):
    code, out, _ = _run(capsys, "lowerbound", "proximal", "--gammas", "1")
    assert code == 0
    row = _rows(out)[0]
    assert float(row["gap"]) == pytest.approx(0.25, rel=1e-11)
    assert float(row["bound"]) == 0.25


def test_lowerbound_proximal_geometric(capsys):
    code, out, _ = _run(capsys, "lowerbound", "proximal", "--n-max", "4", "--ratio", "2")
    assert code == 0 and len(_rows(out)) == 4


def test_table(capsys):
    code, out, _ = _run(capsys, "table", "--instance", "box", "--seed", "3", "--n-max", "4",
                        "--methods", "optista,fista,ista", "--start", "random")
    assert code == 0
    rows = _rows(out)
    assert len(rows) == 12 and {r["method"] for r in rows} == {"optista", "fista", "ista"}


def test_output_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert _run(capsys, "table", "--seed", "5", "--n-max", "3", "--out", str(p))[0] == 0
    assert a.read_text() == b.read_text()
    header = a.read_text().splitlines()[0]
    assert header == "method,N,gap,bound,gap_over_bound,pass"


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# certificate sweep\nn-max = 2\nperturb = true\n")
    code, out, _ = _run(capsys, "certify", "--config", str(cfg))
    assert code == 1 and len(_rows(out)) == 2
    # command-line flags override the file
    code, out, _ = _run(capsys, "certify", "--config", str(cfg), "--perturb", "false", "--n-max", "3")
    assert code == 0 and len(_rows(out)) == 3


def test_config_instance_params(capsys, tmp_path):
    cfg = tmp_path / "r.cfg"
    cfg.write_text("method = optista\ninstance = lasso\nn = 4\nseed = 2\nparam = lam=0.3;n=8\n")
    code, out, _ = _run(capsys, "run", "--config", str(cfg))
    assert code == 0 and len(_rows(out)) == 5


def test_config_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert _run(capsys, "certify", "--config", str(cfg))[0] == 2
    assert _run(capsys, "certify", "--config", str(tmp_path / "missing.cfg"))[0] == 2
