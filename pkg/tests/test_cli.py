"""Command-line interface: matrix file format, subcommands, exit codes."""

import numpy as np
import pytest

from robustmimo import cli
from robustmimo.cli import format_matrix, main, read_matrix


def _write(path, text):
    path.write_text(text)
    return str(path)


# --- matrix files --------------------------------------------------------------


def test_matrix_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    mat = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    path = tmp_path / "m.txt"
    path.write_text(format_matrix(mat) + "\n")
    back = read_matrix(str(path))
    assert back.shape == (3, 2)
    assert np.allclose(back, mat, atol=1e-11)


def test_read_matrix_plain_reals(tmp_path):
    path = _write(tmp_path / "m.txt", "# channel\n2 2\n2 0\n0 1\n")
    mat = read_matrix(path)
    assert np.array_equal(mat, np.diag([2.0, 1.0]).astype(complex))


def test_read_matrix_errors(tmp_path):
    with pytest.raises(ValueError, match="empty"):
        read_matrix(_write(tmp_path / "a.txt", "\n"))
    with pytest.raises(ValueError, match="header"):
        read_matrix(_write(tmp_path / "b.txt", "2\n1 0\n0 1\n"))
    with pytest.raises(ValueError, match="rows"):
        read_matrix(_write(tmp_path / "c.txt", "2 2\n1 0\n"))
    with pytest.raises(ValueError, match="entries"):
        read_matrix(_write(tmp_path / "d.txt", "1 2\n1 0 0\n"))


# --- design subcommand -----------------------------------------------------------


def test_design_worked_instance(tmp_path, capsys):
    chan = _write(tmp_path / "h.txt", "1 1\n2\n")
    rc = main(["design", "--channel", chan, "--epsilon", "0.5",
               "--power-dbw", "0", "--noise-var", "1"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "worst-case MSE = 0.307692" in out
    assert "omega" in out and "E* =" in out


def test_design_seeded_deterministic(capsys):
    rc1 = main(["design", "--seed", "7", "--L", "2", "--rho", "0.01"])
    out1 = capsys.readouterr().out
    rc2 = main(["design", "--seed", "7", "--L", "2", "--rho", "0.01"])
    out2 = capsys.readouterr().out
    assert rc1 == rc2 == 0
    assert out1 == out2
    assert "method = robust_optimal" in out1


def test_design_alternating_method(capsys):
    rc = main(["design", "--seed", "3", "--L", "2", "--rho", "0.02",
               "--method", "alternating_II"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "method = alternating_II" in out


def test_design_seed_without_dim_is_runtime_error(capsys):
    rc = main(["design", "--seed", "7"])
    err = capsys.readouterr().err
    assert rc == 2
    assert "error" in err


def test_design_missing_channel_file(capsys):
    rc = main(["design", "--channel", "/nonexistent/h.txt"])
    assert rc == 2


# --- worstcase subcommand ----------------------------------------------------------


def test_worstcase_worked_instance(tmp_path, capsys):
    chan = _write(tmp_path / "h.txt", "1 1\n2\n")
    fmat = _write(tmp_path / "f.txt", "1 1\n1\n")
    gmat = _write(tmp_path / "g.txt", f"1 1\n{6.0 / 13.0!r}\n")
    rc = main(["worstcase", "--f", fmat, "--g", gmat, "--channel", chan,
               "--epsilon", "0.5"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "worst-case MSE = 0.307692" in out
    assert "hard case = False" in out


# --- bench subcommand ---------------------------------------------------------------


def test_bench_subcommand(tmp_path, capsys):
    cfg = _write(tmp_path / "bench.cfg",
                 "dims = 2\npower_dBW = 20\nrho = 0.01\ntrials = 2\nseed = 5\n"
                 "methods = nonrobust, robust_optimal\n")
    out_csv = tmp_path / "rows.csv"
    rc = main(["bench", "--config", cfg, "--out", str(out_csv)])
    stdout = capsys.readouterr().out
    assert rc == 0
    assert "wrote 4 rows" in stdout
    assert out_csv.exists()
    summary = tmp_path / "rows_summary.csv"
    assert summary.exists()
    assert len(out_csv.read_text().splitlines()) == 5


def test_bench_bad_config_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path / "bench.cfg", "dims = 2\n")
    rc = main(["bench", "--config", cfg])
    assert rc == 2


# --- argument errors ----------------------------------------------------------------


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bench"])  # --config is required
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["design"])  # channel source is required
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main([])  # a subcommand is required
    assert exc.value.code == 1


def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    assert "design" in capsys.readouterr().out
