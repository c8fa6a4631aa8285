import math
import re
import subprocess
import sys

import pytest

from quasitunnel.cli import EXIT_CHECK, EXIT_OK, EXIT_SOLVER, EXIT_USAGE, main, run


def report(path):
    values, checks = {}, {}
    for line in (path / "report.txt").read_text().splitlines():
        m = re.match(r"CHECK (\S+): (PASS|FAIL)", line)
        if m:
            checks[m.group(1)] = m.group(2) == "PASS"
        elif " = " in line and not line.startswith("warning"):
            k, v = line.split(" = ", 1)
            values[k.strip()] = v
    return values, checks


def scenario(tmp_path, text, name="s.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_alpha_report(tmp_path):
    cfg = scenario(tmp_path, "[alpha]\ne_alpha = 4.7\n")
    assert run(cfg, out_dir=str(tmp_path / "o")) == EXIT_OK
    values, checks = report(tmp_path / "o")
    assert float(values["r_in_fm"]) == pytest.approx(7.40, abs=0.05)
    assert float(values["r_out_fm"]) == pytest.approx(55.3, abs=0.1)
    assert -40.0 <= float(values["log10_P"]) <= -37.0
    assert all(checks.values())


def test_flow_three_way_agreement(tmp_path):
    cfg = scenario(tmp_path, "[flow]\nfield = double-well\n")
    assert run(cfg, out_dir=str(tmp_path / "o")) == EXIT_OK
    values, checks = report(tmp_path / "o")
    exact = 4.0 * math.sqrt(2.0) / 3.0
    for key in ("s_closed_form", "s_quadrature", "s_wkb"):
        assert float(values[key]) == pytest.approx(exact, rel=1e-4), key
    assert checks == {k: True for k in checks} and len(checks) >= 4
    assert (tmp_path / "o" / "trajectory_flow.csv").exists()


@pytest.mark.parametrize(
    "text,sub",
    [
        ("[wkb]\nfield = double-well\n", None),
        ("[instanton]\nfield = double-well\n", None),
        ("[compare]\nfield = saddle-to-min\nn_grid = 512\n", None),
        ("[manifold]\nsurface = spheroid\nfield = sphere-height\n", None),
        ("[morse]\nfield = sphere-tilted\nn_theta = 8\nn_phi = 8\n", None),
        ("[sweep]\nn_energies = 5\n", None),
        ("", "alpha"),
    ],
)
def test_every_subcommand_runs(tmp_path, text, sub):
    cfg = scenario(tmp_path, text) if text else None
    assert run(cfg, sub, out_dir=str(tmp_path / "o")) == EXIT_OK
    assert (tmp_path / "o" / "report.txt").exists()


def test_sweep_reports_span(tmp_path):
    assert run(None, "sweep", out_dir=str(tmp_path)) == EXIT_OK
    values, _ = report(tmp_path)
    rows = (tmp_path / "sweep.csv").read_text().splitlines()
    assert rows[0] == "E_MeV,two_S,log10_P,log10_tau_s"
    assert len(rows) == 26
    assert float(values["log10_tau_span"]) > 0


def test_empty_config_is_rejected(tmp_path, capsys):
    cfg = scenario(tmp_path, "")
    assert run(cfg, out_dir=str(tmp_path / "o")) == EXIT_USAGE
    assert "error" in capsys.readouterr().err
    assert run(None, None, out_dir=str(tmp_path / "o")) == EXIT_USAGE


def test_unknown_key_is_located(tmp_path, capsys):
    cfg = scenario(tmp_path, "[flow]\nfield = double-well\nbogus = 1\n", "b.ini")
    assert run(cfg, out_dir=str(tmp_path / "o")) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "b.ini:3:9" in err and "bogus" in err
    assert not (tmp_path / "o").exists() or not list((tmp_path / "o").iterdir())


def test_bad_value_is_located(tmp_path, capsys):
    cfg = scenario(tmp_path, "[alpha]\ne_alpha = -1\n", "b2.ini")
    assert run(cfg, out_dir=str(tmp_path / "o")) == EXIT_USAGE
    assert "b2.ini:2:11" in capsys.readouterr().err


def test_unknown_field_parameter(tmp_path, capsys):
    cfg = scenario(tmp_path, "[flow]\nfield = double-well\nkappa = 2\n")
    assert run(cfg, out_dir=str(tmp_path / "o")) == EXIT_USAGE


def test_solver_failure_leaves_no_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    assert run(None, "morse", ["field=constant"], out_dir=str(out)) == EXIT_SOLVER
    assert "morse failed" in capsys.readouterr().err
    assert list(out.iterdir()) == []


def test_check_failure_exit_status(tmp_path):
    # demanding every seed is classified fails on a grid that straddles the separatrix
    cfg = scenario(tmp_path, "[morse]\nfield = sphere-tilted\nn_theta = 6\nn_phi = 8\nmin_classified = 1.5\n")
    assert run(cfg, out_dir=str(tmp_path / "o")) == EXIT_CHECK
    _, checks = report(tmp_path / "o")
    assert checks["classified_fraction"] is False


def test_overrides(tmp_path):
    cfg = scenario(tmp_path, "[alpha]\ne_alpha = 4.7\n")
    run(cfg, overrides=["alpha.e_alpha=6.0"], out_dir=str(tmp_path / "a"))
    run(cfg, overrides=["e_alpha=4.7"], out_dir=str(tmp_path / "b"))
    pa, pb = (float(report(tmp_path / d)[0]["log10_P"]) for d in "ab")
    assert pa > pb
    assert run(cfg, overrides=["e_alpha"], out_dir=str(tmp_path / "c")) == EXIT_USAGE


def test_outputs_are_deterministic(tmp_path):
    cfg = scenario(tmp_path, "[compare]\nfield = random-polynomial\nn_grid = 256\n")
    for d in "ab":
        code = run(cfg, out_dir=str(tmp_path / d), seed=3)
        assert code in (EXIT_OK, EXIT_CHECK)
    for name in ("report.txt", "trajectory_instanton.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    run(None, "sweep", out_dir=str(tmp_path / "c"))
    run(None, "sweep", out_dir=str(tmp_path / "d"))
    assert (tmp_path / "c" / "sweep.csv").read_bytes() == (tmp_path / "d" / "sweep.csv").read_bytes()


def test_main_and_module_entry(tmp_path):
    assert main(["alpha", "--out", str(tmp_path)]) == EXIT_OK
    proc = subprocess.run([sys.executable, "-m", "quasitunnel", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "quasitunnel" in proc.stdout
