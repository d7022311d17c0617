import json
import subprocess
import sys

import numpy as np
import pytest

from quasisym import io as qio
from quasisym.cli import run
from quasisym.nonlin import DerivativeBundle
from quasisym.radial import morse_index, nodal_report, read_solution


def call(argv, capsys):
    code = run([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def summary(text):
    return dict(line.split(": ", 1) for line in text.strip().splitlines())


def test_certify_example(tmp_path, capsys):
    out = tmp_path / "c.json"
    code, text, _ = call(["certify", "--k", 2, "--p", 5, "--mode", "sharp", "--out", out], capsys)
    assert code == 0 and summary(text)["certified"] == "true"
    doc = json.loads(out.read_text())
    assert doc["certified"] is True and doc["q"]["c2"] == 32


def test_certify_failure_is_exit_zero(capsys):
    code, text, _ = call(["certify", "--k", 2, "--p", 4], capsys)
    assert code == 0 and summary(text)["certified"] == "false"


def test_scan_example(tmp_path, capsys):
    out = tmp_path / "fig1.csv"
    code, _, _ = call(["scan", "--k", 3, "--p", 3, "--order", 2, "--smin", 0.001, "--smax", 2,
                       "--samples", 1000, "--out", out], capsys)
    assert code == 0
    _, header, data = qio.read_csv(out)
    assert header == ["s", "value"] and data.shape == (1000, 2)
    assert data[:, 1].min() < 0


def test_growth_check_example(capsys):
    code, text, _ = call(["growth-check", "--k", 2, "--N", 3, "--p", 12], capsys)
    s = summary(text)
    assert code == 0 and s["subcritical"] == "false" and s["bound"] == "11"


def test_find_pk(capsys):
    code, text, _ = call(["find-pk", "--k", 2], capsys)
    assert code == 0 and abs(float(summary(text)["p_k"]) - 5) <= 1e-3
    code, _, err = call(["find-pk", "--k", 2, "--ceiling", 4], capsys)
    assert code == 3 and "ceiling" in err


def test_tabulate_g(tmp_path, capsys):
    out = tmp_path / "g.csv"
    assert call(["tabulate-g", "--k", 2, "--s-max", 5, "--out", out], capsys)[0] == 0
    _, header, data = qio.read_csv(out)
    assert header == ["s", "g", "gprime"] and data[0].tolist() == [0, 0, 1]


def test_number_format():
    assert qio.fmt(1 / 3) == "0.333333333333"
    assert qio.fmt(1.5e-20) == "1.5e-20"
    assert qio.fmt(0.0) == "0" and qio.fmt(float("nan")) == "nan"


def test_determinism(tmp_path, capsys):
    argv = ["solve-radial", "--grid-points", 2000]
    call(argv + ["--out", tmp_path / "a.csv"], capsys)
    call(argv + ["--out", tmp_path / "b.csv"], capsys)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    argv = ["solve-planar", "--n1", 16, "--n2", 8]
    call(argv + ["--out", tmp_path / "c.csv"], capsys)
    call(argv + ["--out", tmp_path / "d.csv"], capsys)
    assert (tmp_path / "c.csv").read_bytes() == (tmp_path / "d.csv").read_bytes()


def test_radial_round_trip(tmp_path, capsys):
    sol_path, m_path, n_path = tmp_path / "s.csv", tmp_path / "m.json", tmp_path / "n.json"
    assert call(["solve-radial", "--grid-points", 4000, "--out", sol_path], capsys)[0] == 0
    assert call(["morse", "--solution", sol_path, "--modes-grid", 2000, "--out", m_path],
                capsys)[0] == 0
    assert call(["nodal-check", "--solution", sol_path, "--modes-grid", 2000, "--out", n_path],
                capsys)[0] == 0
    sol = read_solution(sol_path)
    bundle = DerivativeBundle(sol.meta["spec"], s_max=sol.meta["s_max"])
    morse = morse_index(sol, bundle, modes_grid=2000)
    assert json.loads(m_path.read_text()) == json.loads(qio.report_text(morse.as_dict()))
    nodal = json.loads(n_path.read_text())["nodal"]
    assert nodal == json.loads(qio.report_text(nodal_report(sol, morse).as_dict()))
    assert nodal["morse_index"] == 1 and nodal["satisfied"] is True


def test_planar_and_diagnose(tmp_path, capsys):
    field, rep = tmp_path / "f.csv", tmp_path / "d.json"
    assert call(["solve-planar", "--n1", 16, "--n2", 8, "--out", field], capsys)[0] == 0
    code, text, _ = call(["diagnose", "--field", field, "--out", rep], capsys)
    assert code == 0
    doc = json.loads(rep.read_text())
    assert doc["reflection"]["label"] == "solution diagnostics"
    assert doc["symmetry"]["even_deviation"] <= 1e-10


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    out = tmp_path / "g.csv"
    cfg.write_text(f"# tabulation\nk = 3\ns-max = 2   # short\nout = {out}\n")
    assert call(["tabulate-g", "--config", cfg], capsys)[0] == 0
    _, _, data = qio.read_csv(out)
    assert data[-1, 0] == 2
    # the command line wins over the file
    assert call(["tabulate-g", "--config", cfg, "--s-max", 1], capsys)[0] == 0
    _, _, data = qio.read_csv(out)
    assert data[-1, 0] == 1


@pytest.mark.parametrize("text,key", [("bogus = 1\n", "bogus"), ("k = two\n", "k"),
                                      ("mode = fast\n", "mode")])
def test_bad_config(tmp_path, capsys, text, key):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    code, _, err = call(["certify", "--config", cfg], capsys)
    assert code == 2 and repr(key) in err


def test_malformed_config_line(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("just words\n")
    assert call(["certify", "--config", cfg], capsys)[0] == 2


def test_exit_codes(tmp_path, capsys):
    assert call(["frobnicate"], capsys)[0] == 2
    assert call(["certify", "--unknown"], capsys)[0] == 2
    assert call(["certify", "--k", 1.0], capsys)[0] == 2
    assert call(["growth-check", "--p", 0.5], capsys)[0] == 2
    assert call(["morse", "--solution", tmp_path / "missing.csv"], capsys)[0] == 4
    assert call(["solve-radial", "--s-max", 2, "--out", tmp_path / "x.csv"], capsys)[0] == 3
    assert call(["tabulate-g", "--out", tmp_path / "no" / "dir.csv"], capsys)[0] == 4
    assert not (tmp_path / "x.csv").exists()


def test_threads_env(monkeypatch, capsys):
    monkeypatch.setenv("QUASISYM_THREADS", "-2")
    with pytest.raises(ValueError):
        qio.thread_count()
    monkeypatch.setenv("QUASISYM_THREADS", "3")
    assert qio.thread_count() == 3


def test_atomic_write_leaves_no_temp(tmp_path):
    path = tmp_path / "x.txt"
    qio.atomic_write(path, "a\n")
    qio.atomic_write(path, "b\n")
    assert path.read_text() == "b\n"
    assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "quasisym", "growth-check", "--k", "2", "--N", "2",
                           "--p", "100"], capture_output=True, text=True)
    assert proc.returncode == 0 and "bound: inf" in proc.stdout
