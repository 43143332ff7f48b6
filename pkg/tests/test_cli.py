import json
import os
import subprocess
import sys

import numpy as np
import pytest

from submodreg.cli import (EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main, read_csv,
                           read_signal, run_bench, write_svg)


def _write(path, text):
    path.write_text(text)
    return str(path)


@pytest.fixture
def out(tmp_path):
    return str(tmp_path / "out")


def test_prox_example(tmp_path, out):
    z = _write(tmp_path / "z.csv", "1\n0\n")
    rc = main(["prox", "--family", "chain-tv", "--signal", z,
               "--lambda", "0.25", "--out", out])
    assert rc == EXIT_OK
    run_dir = next(d for d in os.listdir(out) if d.startswith("prox-"))
    w = read_signal(os.path.join(out, run_dir, "w.csv"))
    assert w.tolist() == [0.75, 0.25]
    header, rows = read_csv(os.path.join(out, run_dir, "lattice.csv"))
    assert header == ["block", "value", "members"]
    assert rows[0][2] == "1" and rows[1][2] == "2"   # 1-based members


def test_eval_example(tmp_path, out, capsys):
    h = _write(tmp_path / "h.csv", "0\n2\n2\n0\n")
    w = _write(tmp_path / "w.csv", "1\n1\n1\n")
    rc = main(["eval", "--family", "cardinality", "--profile", h, "--w", w])
    assert rc == EXIT_OK
    printed = capsys.readouterr().out
    assert printed.startswith("f(w) = 0")


def test_path_example(tmp_path, out):
    z = _write(tmp_path / "z.csv", "1\n0\n")
    rc = main(["path", "--family", "chain-tv", "--signal", z, "--out", out])
    assert rc == EXIT_OK
    run_dir = next(d for d in os.listdir(out) if d.startswith("path-"))
    header, rows = read_csv(os.path.join(out, run_dir, "breakpoints.csv"))
    assert header == ["lambda"]
    assert [r[0] for r in rows] == ["0.5"]


def test_solve_trace_and_outputs(tmp_path, out):
    z = _write(tmp_path / "z.csv", "2.0\n1.0\n0.0\n")
    rc = main(["solve", "--family", "chain-tv", "--signal", z,
               "--lambda", "0.1", "--method", "fista", "--iters", "50",
               "--out", out])
    assert rc == EXIT_OK
    run_dir = next(d for d in os.listdir(out) if d.startswith("solve-"))
    header, rows = read_csv(os.path.join(out, run_dir, "trace.csv"))
    assert header == ["iter", "objective", "gap", "wall_time_ms"]
    w = read_signal(os.path.join(out, run_dir, "w.csv"))
    assert w == pytest.approx([1.9, 1.0, 0.1], abs=1e-6)


def test_cut_family_from_graph_file(tmp_path, out):
    g = _write(tmp_path / "g.txt", "1 2 1.0\n2 3 1.0\n")
    z = _write(tmp_path / "z.csv", "2.0\n1.0\n0.0\n")
    rc = main(["prox", "--family", "cut", "--graph", g, "--signal", z,
               "--lambda", "0.1", "--out", out])
    assert rc == EXIT_OK
    run_dir = next(d for d in os.listdir(out) if d.startswith("prox-"))
    w = read_signal(os.path.join(out, run_dir, "w.csv"))
    assert w == pytest.approx([1.9, 1.0, 0.1], abs=1e-9)


def test_recover_theorem_csv(tmp_path, out):
    rc = main(["recover", "--mode", "theorem", "--blocks", "4,4",
               "--values", "1,0", "--sigma", "0.05,0.2", "--trials", "20",
               "--seed", "3", "--out", out])
    assert rc == EXIT_OK
    run_dir = next(d for d in os.listdir(out) if d.startswith("recover-"))
    header, rows = read_csv(os.path.join(out, run_dir, "recover.csv"))
    assert header == ["sigma", "lambda", "method", "error_mean", "error_std",
                      "recovery_rate", "bound"]
    assert len(rows) == 4   # 2 sigmas x 2 default lambdas
    for row in rows:
        assert 0.0 <= float(row[5]) <= 1.0


def test_determinism_byte_identical(tmp_path, out):
    z = _write(tmp_path / "z.csv", "1\n0\n")
    args = ["prox", "--family", "chain-tv", "--signal", z,
            "--lambda", "0.25", "--out", out]
    assert main(args) == EXIT_OK
    run_dir = next(d for d in os.listdir(out) if d.startswith("prox-"))
    target = os.path.join(out, run_dir, "w.csv")
    first = open(target, "rb").read()
    assert main(args) == EXIT_OK
    assert open(target, "rb").read() == first

    rec = ["recover", "--mode", "theorem", "--blocks", "3,3", "--values", "1,0",
           "--sigma", "0.1", "--trials", "10", "--seed", "1", "--out", out]
    assert main(rec) == EXIT_OK
    rdir = next(d for d in os.listdir(out) if d.startswith("recover-"))
    rfile = os.path.join(out, rdir, "recover.csv")
    blob = open(rfile, "rb").read()
    assert main(rec) == EXIT_OK
    assert open(rfile, "rb").read() == blob


def test_config_file_with_flag_override(tmp_path, out):
    z = _write(tmp_path / "z.csv", "1\n0\n")
    cfg = _write(tmp_path / "cfg.json", json.dumps(
        {"family": "chain-tv", "signal": z, "lam": 0.75, "out": out}))
    rc = main(["prox", "--config", cfg, "--lambda", "0.25"])
    assert rc == EXIT_OK
    run_dir = next(d for d in os.listdir(out) if d.startswith("prox-"))
    w = read_signal(os.path.join(out, run_dir, "w.csv"))
    assert w.tolist() == [0.75, 0.25]   # the flag wins over the config


def test_usage_errors(tmp_path, out):
    z = _write(tmp_path / "z.csv", "1\n0\n")
    assert main(["prox", "--family", "chain-tv", "--signal", z,
                 "--out", out]) == EXIT_USAGE          # missing lambda
    assert main(["prox", "--family", "cut", "--signal", z,
                 "--lambda", "1", "--out", out]) == EXIT_USAGE  # missing graph
    assert main(["prox", "--family", "chain-tv", "--signal",
                 str(tmp_path / "missing.csv"), "--lambda", "1",
                 "--out", out]) == EXIT_USAGE
    assert main(["eval", "--w", z]) == EXIT_USAGE      # no family
    # no partial directories left behind
    assert not os.path.isdir(out) or not os.listdir(out)


def test_path_plot_svg(tmp_path, out):
    z = _write(tmp_path / "z.csv", "2\n1\n0\n")
    rc = main(["path", "--family", "chain-tv", "--signal", z, "--out", out,
               "--plot"])
    assert rc == EXIT_OK
    run_dir = next(d for d in os.listdir(out) if d.startswith("path-"))
    svg = open(os.path.join(out, run_dir, "path.svg")).read()
    assert svg.startswith("<svg") and "polyline" in svg


def test_write_svg_logscale(tmp_path):
    path = tmp_path / "p.svg"
    write_svg(str(path), {"a": ([1, 2, 3], [1.0, 0.1, 0.01])},
              xlabel="x", ylabel="y", logy=True)
    text = path.read_text()
    assert "<svg" in text and "</svg>" in text


def test_console_entry_point(tmp_path):
    z = tmp_path / "z.csv"
    z.write_text("1\n0\n")
    proc = subprocess.run(
        [sys.executable, "-m", "submodreg.cli", "prox", "--family", "chain-tv",
         "--signal", str(z), "--lambda", "0.25", "--out", str(tmp_path / "o")],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


def test_run_bench_smoke():
    grid, sampled = run_bench(p=30, n=30, budget=0.4, grid_step=0.2, seed=0)
    assert set(sampled) == {"fista-dedicated", "fista-mnp",
                            "subgradient-1/t", "subgradient-1/sqrt"}
    for vals in sampled.values():
        assert vals.shape == grid.shape
        assert np.isfinite(vals).all()
