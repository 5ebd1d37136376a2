"""Command-line drivers: files, determinism, exit codes."""

import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from coinlab.cli import ic_lattice, load_config_file, main


def run(args):
    return main(args)


def test_portrait_csv_and_svg(tmp_path):
    out = tmp_path / "p"
    code = run([
        "portrait", "--table", "circle", "--ell", "1.3", "--ics", "16",
        "--iters", "20", "--classify-iters", "1200",
        "--out", str(out),
    ])
    assert code == 0
    csv = (out.with_suffix(".csv")).read_text().splitlines()
    assert csv[0].startswith("#")
    assert csv[2] == "orbit_id,step,phi,theta,class"
    body = [line for line in csv if not line.startswith(("#", "orbit_id"))]
    assert len(body) == 16 * 21
    phis = np.array([float(line.split(",")[2]) for line in body])
    thetas = np.array([float(line.split(",")[3]) for line in body])
    assert np.all((phis >= 0) & (phis < 2 * np.pi))
    assert np.all((thetas > 0) & (thetas < np.pi))

    tree = ET.parse(out.with_suffix(".svg"))
    ns = "{http://www.w3.org/2000/svg}"
    groups = tree.getroot().findall(f"{ns}g")
    assert len(groups) == 16          # one marker group per orbit


def test_portrait_zero_iterations(tmp_path):
    out = tmp_path / "z"
    code = run([
        "portrait", "--table", "circle", "--ics", "9", "--iters", "0",
        "--classify-iters", "1000", "--out", str(out),
    ])
    assert code == 0
    body = [
        line
        for line in (out.with_suffix(".csv")).read_text().splitlines()
        if not line.startswith(("#", "orbit_id"))
    ]
    assert len(body) == 9             # exactly the initial points


def test_portrait_deterministic(tmp_path):
    args = [
        "portrait", "--table", "ellipse", "--a", "1.4", "--ell", "1.3",
        "--ics", "9", "--iters", "15", "--classify-iters", "1000",
        "--seed", "3",
    ]
    run(args + ["--out", str(tmp_path / "a")])
    run(args + ["--out", str(tmp_path / "b")])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_lattice_is_even_and_padded():
    phi, theta = ic_lattice(144, pad=0.1)
    assert phi.size == 144
    assert np.isclose(np.min(np.diff(np.unique(phi))), 2 * np.pi / 12)
    assert theta.min() > 0.1 and theta.max() < np.pi - 0.1


def test_usage_error_exit_code():
    assert run(["portrait", "--table", "donut"]) == 2
    assert run(["portrait", "--ics", "0"]) == 2


def test_ell0_disc_and_ellipse(tmp_path, capsys):
    assert run(["ell0", "--table", "circle"]) == 0
    assert "undefined (disc)" in capsys.readouterr().out
    out = tmp_path / "e.csv"
    assert run(["ell0", "--table", "ellipse", "--a", "2", "--out", str(out)]) == 0
    captured = capsys.readouterr().out
    assert "0.8646978" in captured
    assert "ell0,0.86469785" in out.read_text()


def test_twist_csv(tmp_path):
    out = tmp_path / "twist.csv"
    code = run([
        "twist", "--table", "circle", "--ell", "2", "--points", "101",
        "--out", str(out),
    ])
    assert code == 0
    rows = [
        line.split(",")
        for line in out.read_text().splitlines()
        if not line.startswith(("#", "theta"))
    ]
    thetas = np.array([float(r[0]) for r in rows])
    vals = np.array([float(r[1]) for r in rows])
    # closed form 2 - 2/sin^2 is nonpositive with a single touch at pi/2
    assert np.all(vals <= 1e-12)
    assert vals[np.argmin(np.abs(thetas - np.pi / 2))] > -1e-6


def test_graphs_csv_residuals(tmp_path):
    out = tmp_path / "g.csv"
    code = run([
        "graphs", "--table", "ellipse", "--a", "1.4", "--ell", "1.3",
        "--m", "20", "--out", str(out),
    ])
    assert code == 0
    rows = [
        line.split(",")
        for line in out.read_text().splitlines()
        if not line.startswith(("#", "phi"))
    ]
    resid = np.array([float(r[2]) for r in rows])
    assert resid.max() < 1e-10


def test_kamscan_csv(tmp_path):
    out = tmp_path / "scan.csv"
    code = run([
        "kamscan", "--table", "circle", "--ell", "1.3", "--ics", "12",
        "--iters", "1500", "--strip-lo", "0.3", "--strip-hi", "0.8",
        "--out", str(out),
    ])
    assert code == 0
    text = out.read_text()
    assert "curve_fraction=1.0" in text


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("table=ellipse\na=1.4\nell=1.3\nics=9\niters=5\n# comment\n")
    values = load_config_file(cfg)
    assert values["a"] == "1.4"
    out = tmp_path / "c"
    code = run([
        "portrait", "--config", str(cfg), "--iters", "3",
        "--classify-iters", "1000", "--out", str(out),
    ])
    assert code == 0
    body = [
        line
        for line in (out.with_suffix(".csv")).read_text().splitlines()
        if not line.startswith(("#", "orbit_id"))
    ]
    assert len(body) == 9 * 4         # flag overrides the config iters


def test_verify_circle_passes(capsys):
    assert run(["verify", "--table", "circle", "--ell", "1.3"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert "disc-integrability" in out
