import json
import subprocess
import sys

import pytest

from jetvar import corpus
from jetvar.cli import EX_USAGE, Inputs, UsageError, main, parse_base_point, run_check
from jetvar.expr import U
from jetvar.report import Certificate, Report

KDV = "u_xxx + u*u_x"
PCKDV = "u_xxx + (1/2)*u_x^2 - u/(2*t)"


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def test_first_order_kdv(capsys):
    code, out = run(capsys, "first-order", "--K", KDV)
    assert code == 1
    assert out.out.startswith("first-order: no_operator_not_closed")


def test_first_order_pckdv_json(capsys):
    code, out = run(capsys, "first-order", "--K", PCKDV, "--json")
    assert code == 0
    rep = json.loads(out.out)
    assert rep["verdict"] == "operator_found"
    assert rep["witnesses"]["R"] == "t"
    assert rep["ok"] is True
    assert all(c["ok"] and c["residual"] in ("0", None) for c in rep["certificates"])
    assert rep["version"] and "timing" in rep


def test_usage_errors(capsys):
    assert run(capsys, "first-order")[0] == EX_USAGE  # missing --K
    assert run(capsys, "first-order", "--K", "u_xxx +")[0] == EX_USAGE  # parse error
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == EX_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["symplectic", "--bogus", "1"])
    assert exc.value.code == EX_USAGE
    assert run(capsys)[0] == EX_USAGE


def test_base_point_parsing():
    assert parse_base_point("u_x=1, u=0") == {U(0, 1): 1, U(0, 0): 0}
    with pytest.raises(UsageError):
        parse_base_point("u_y=1")
    with pytest.raises(UsageError):
        parse_base_point("u_x")


def test_symplectic_and_not(capsys):
    code, out = run(capsys, "symplectic", "--S", "Dx^3")
    assert code == 0 and "P = u_xxx" in out.out
    code, out = run(capsys, "symplectic", "--S", "u*Dx")
    assert code == 1 and "not skew-adjoint" in out.out


def test_hamiltonian_with_declared_parameter(capsys):
    code, out = run(capsys, "hamiltonian", "--K", "c*u_xxx", "--S", "Dx", "--P", "u_x",
                    "--decls", "param c")
    assert code == 0
    assert "H = c*u_xx^2/2" in out.out or "H = (1/2)*c*u_xx^2" in out.out


def test_check_variational_with_witness(capsys):
    code, _ = run(capsys, "check-variational", "--K", PCKDV, "--E", "t*Dx",
                  "--Q=-(1/2)*t*u_x", "--L=-(1/12)*t*u_x^3")
    assert code == 0
    code, _ = run(capsys, "check-variational", "--K", PCKDV, "--E", "t*Dx",
                  "--Q=-(1/2)*t*u_x", "--L", "(1/12)*t*u_x^3")
    assert code == 1


def test_helmholtz_and_conservation(capsys):
    assert run(capsys, "helmholtz", "--Q", "u_xxxx")[0] == 0
    assert run(capsys, "helmholtz", "--Q", "u_x")[0] == 1
    code, out = run(capsys, "conservation", "--K", KDV, "--A", "u", "--B", "u_xx + (1/2)*u^2")
    assert code == 0 and "nontrivial" in out.out


def test_potentialize_and_compat(capsys):
    code, out = run(capsys, "potentialize", "--H1=-(1/2)*v_x^2/v^3")
    assert code == 0
    code, out = run(capsys, "compat", "--D0", "2*v*Dx + v_x", "--H1", "2*sqrt(v)")
    assert code == 0 and "H2 = 0" in out.out


def test_dorfman(capsys):
    code, out = run(capsys, "dorfman", "--h", "1", "--c1", "0", "--c2", "0", "--symplectic", "false")
    assert code == 0 and "D = Dx^3" in out.out


def test_exit_code_inconclusive():
    rep = Report("x")
    rep.add(Certificate.flag("undecided", None))
    assert rep.exit_code() == 2
    rep.add(Certificate.flag("bad", False))
    assert rep.exit_code() == 1


def test_run_check_shares_code_path():
    rep = run_check("first-order", Inputs({"K": KDV}))
    assert rep.verdict == "no_operator_not_closed" and rep.timing >= 0


def test_console_script_module():
    out = subprocess.run([sys.executable, "-m", "jetvar.cli", "symplectic", "--S", "Dx"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("symplectic:")


# corpus


def test_corpus_filter_schwarzian():
    names = [c.name for c in corpus.list_cases("schwarzian")]
    assert names and all("schwarzian" in n for n in names)
    assert names == sorted(names)


def test_corpus_empty_filter_passes():
    rep = corpus.corpus_run("matches-nothing-at-all")
    assert rep.results == [] and rep.exit_code() == 0


def test_corpus_parallel_matches_serial():
    a = corpus.corpus_run("fot", parallel=False).dumps(timing=False)
    b = corpus.corpus_run("fot", parallel=True).dumps(timing=False)
    assert a == b


def test_corpus_failure_is_isolated(tmp_path):
    (tmp_path / "a_broken.case").write_text(
        "[case]\nname = a_broken\ncheck = first-order\n\n[equation]\nK = u_xxx +\n")
    (tmp_path / "b_wrong.case").write_text(
        "[case]\nname = b_wrong\ncheck = first-order\n\n[equation]\nK = u_xxx + u*u_x\n\n"
        "[expect]\nverdict = operator_found\n")
    (tmp_path / "c_fine.case").write_text(
        "[case]\nname = c_fine\ncheck = symplectic\n\n[operator]\nS = Dx\n\n[expect]\nok = true\n")
    rep = corpus.corpus_run("_", dirs=[tmp_path])
    by = {r.name: r for r in rep.results}
    assert by["a_broken"].error and not by["a_broken"].passed
    assert not by["b_wrong"].passed and by["b_wrong"].error is None
    assert by["c_fine"].passed
    assert rep.exit_code() == 1


def test_corpus_cli_list(capsys):
    code, out = run(capsys, "corpus", "list", "fot")
    assert code == 0 and "fot_kdv" in out.out.split()
