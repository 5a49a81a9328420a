import subprocess
import sys

import pytest

from nmrqec.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main

CONFIG = """
[system]
builtin: malonic
[noise]
kind: dephasing
q: 0.1
[sweep]
modes: unencoded corrected
delays_ms: 0 1 2
"""


def write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_run_writes_csv(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["run", write(tmp_path, CONFIG), "--out", str(out)]) == EXIT_OK
    text = out.read_text()
    assert text.startswith("delay_ms,mode,f_x,f_y,f_z,F_e,s00,s10,s01,s11\n")
    assert "0.972" in text
    assert "fit corrected" in capsys.readouterr().out


def test_run_to_stdout(tmp_path, capsys):
    assert main(["run", write(tmp_path, CONFIG)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("delay_ms,")


def test_gnuplot_output(tmp_path):
    text = CONFIG + f"[output]\ncsv: {tmp_path / 'a.csv'}\ngnuplot: {tmp_path / 'a.gp'}\n"
    assert main(["run", write(tmp_path, text)]) == EXIT_OK
    assert "plot" in (tmp_path / "a.gp").read_text()


def test_config_error_exit_code(tmp_path, capsys):
    bad = CONFIG.replace("q: 0.1", "q: 1.5")
    assert main(["run", write(tmp_path, bad)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "line 6" in err and "'q'" in err


def test_missing_file_exit_code(tmp_path):
    assert main(["run", str(tmp_path / "none.cfg")]) == EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    import nmrqec.cli as cli

    def boom(*a, **k):
        raise FloatingPointError("nan")

    monkeypatch.setattr(cli, "run_sweep", boom)
    assert main(["run", write(tmp_path, CONFIG)]) == EXIT_NUMERICAL


def test_bad_threads(tmp_path):
    assert main(["run", write(tmp_path, CONFIG), "--threads", "0"]) == EXIT_CONFIG


def test_grape_command(tmp_path, capsys):
    text = """
[system]
builtin: malonic
[grape]
target: identity
duration_ms: 0.02
n_slices: 4
n_offsets: 1
rf_scales: 1.0
max_iter: 3
initial: zero
"""
    out = tmp_path / "p.txt"
    assert main(["grape", write(tmp_path, text), "--out", str(out)]) == EXIT_OK
    assert "# n_slices=4" in out.read_text()
    assert "mean fidelity" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nmrqec", "run", write(tmp_path, CONFIG)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("delay_ms,")


@pytest.mark.parametrize("argv", [[], ["fly"]])
def test_usage_errors(argv):
    with pytest.raises(SystemExit):
        main(argv)
