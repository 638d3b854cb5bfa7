import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from fracsym.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main, run
from fracsym.config import from_echo, load
from fracsym.io import read_csv
from fracsym.operator import read_binary

SCEN = Path(__file__).resolve().parents[1] / "scenarios"
COARSE = ["grid.h=1/16"]


def _solve(tmp_path, name="torsion.ini", extra=()):
    out = tmp_path / "out"
    code = run("solve", SCEN / name, COARSE + list(extra), out)
    return code, out


def test_solve_writes_expected_files(tmp_path):
    code, out = _solve(tmp_path)
    assert code == EXIT_OK
    pre, cols, data = read_csv(out / "solution.csv")
    assert cols == ["x1", "x2", "u"]
    assert pre[0].startswith("fracsym ") and pre[0].endswith(" solve")
    assert data[:, 2].max() == pytest.approx(2 / np.pi, rel=1e-8)
    assert read_csv(out / "profile.csv")[1] == ["r", "u"]
    _, cols, scan = read_csv(out / "scan.csv")
    assert cols == ["lambda", "sigma_minus_measure", "min_w", "claim_residual"]
    assert np.all(scan[:, 1] == 0)
    assert "[PASS]" in (out / "summary.txt").read_text()


def test_csv_preamble_reproduces_configuration(tmp_path):
    code, out = _solve(tmp_path)
    pre, _, _ = read_csv(out / "solution.csv")
    cfg = load(SCEN / "torsion.ini", COARSE + [f"output.dir={out}"])
    assert from_echo(pre[1:]).resolved() == cfg.resolved()


def test_repeated_runs_are_byte_identical(tmp_path):
    out = tmp_path / "o"
    assert run("scan", SCEN / "bumps.ini", ["grid.h=1/8", "diagnostics.bumps=5"], out, seed=3) == EXIT_OK
    first = (out / "claims.csv").read_bytes()
    assert run("scan", SCEN / "bumps.ini", ["grid.h=1/8", "diagnostics.bumps=5"], out, seed=3) == EXIT_OK
    assert (out / "claims.csv").read_bytes() == first
    assert run("scan", SCEN / "bumps.ini", ["grid.h=1/8", "diagnostics.bumps=5"], out, seed=4) == EXIT_OK
    assert (out / "claims.csv").read_bytes() != first


def test_empty_diagnostics_list_gives_header_only_csv(tmp_path):
    out = tmp_path / "o"
    assert run("scan", SCEN / "bumps.ini", ["grid.h=1/8", "diagnostics.bumps=0"], out) == EXIT_OK
    _, cols, data = read_csv(out / "claims.csv")
    assert cols[0] == "bump" and data.shape == (0, len(cols))


def test_invalid_order_is_a_config_error(tmp_path, capsys):
    code, _ = _solve(tmp_path, extra=["kernel.alpha=1.5"])
    assert code == EXIT_CONFIG
    assert "α∈(0,1)" in capsys.readouterr().err


@pytest.mark.parametrize("bad", [["grid.nope=1"], ["diagnostics.checks=swap"], ["domain.shape=torus"],
                                 ["grid.h=0.3"]])
def test_bad_scenarios_exit_with_config_code(tmp_path, bad):
    assert _solve(tmp_path, extra=bad)[0] == EXIT_CONFIG


def test_failed_check_exit_code(tmp_path):
    code, out = _solve(tmp_path, extra=["problem.g=radial", "problem.g_radii=0, 1", "problem.g_values=2, 1",
                                        "problem.g_center=0.25, 0"])
    assert code == EXIT_CHECK
    assert "[FAIL]" in (out / "summary.txt").read_text()


def test_solver_failure_exit_code(tmp_path):
    code, out = _solve(tmp_path, "quadratic.ini", ["solver.max_iter=1", "solver.fallback=none"])
    assert code == EXIT_SOLVER
    assert "solver failure" in (out / "summary.txt").read_text()


def test_binary_dump_is_readable(tmp_path):
    code, out = _solve(tmp_path, extra=["output.binary=true"])
    assert code == EXIT_OK
    header, _ = read_binary(out / "operator.bin")
    _, _, sol = read_csv(out / "solution.csv")
    assert np.prod(header["dims"]) >= sol.shape[0]
    header, payload = read_binary(out / "solution.bin")
    assert payload.size == np.prod(header["dims"])
    assert np.isclose(payload.max(), sol[:, 2].max(), rtol=0, atol=0)


@pytest.mark.parametrize("command, scenario, extra, csv, cols", [
    ("kernel-table", "kernel_mu.ini", [], "kernel.csv", ["r", "K", "tail"]),
    ("probe-smalldomain", "smalldomain.ini", ["grid.h=1/16"], "smalldomain.csv",
     ["domain_id", "measure", "d", "neg_inf_w", "ratio2", "kappa"]),
    ("converge", "converge.ini", [], "converge.csv", ["h", "error", "order_estimate"]),
    ("abp", "abp.ini", ["grid.h=1/16", "diagnostics.checks=ratio_spread"], "abp.csv",
     ["domain_id", "inf_w", "d", "hinf", "hLN", "ratio1", "ratio2"]),
])
def test_other_commands_and_schemas(tmp_path, command, scenario, extra, csv, cols):
    out = tmp_path / "o"
    assert run(command, SCEN / scenario, extra, out) == EXIT_OK
    body = [ln for ln in (out / csv).read_text().splitlines() if not ln.startswith("#")]
    assert body[0].split(",") == cols and len(body) > 1
    assert all(len(ln.split(",")) == len(cols) for ln in body[1:])


def test_main_argument_handling(tmp_path):
    out = tmp_path / "o"
    assert main(["kernel-table", "--config", str(SCEN / "kernel_mu.ini"), "--out", str(out)]) == EXIT_OK
    assert main(["kernel-table", "--config", str(SCEN / "kernel_mu.ini"), "--out", str(out), "--seed", "-1"]) == EXIT_CONFIG
    assert main(["kernel-table", "--config", str(tmp_path / "missing.ini")]) == EXIT_CONFIG
    with pytest.raises(SystemExit):
        main(["nonsense"])


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "fracsym", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("fracsym ")
