"""Tests for the command-line front end: artifacts, exit codes, reproducibility.

Core claims:
    - simulate writes run.json, snapshots, three heat-map pairs, and bounds.txt
    - rerunning the same config, or the recorded run.json, is byte-identical
    - flag validation fails with exit 1 and a message naming the flag
    - divergence exits 3; the enumeration cap exits 4
    - stationary reports counts, residuals, the minimal==bistable check,
      and a Hasse edge list
    - verify reports bound compliance and compares two run directories
    - denoise and heat produce PGMs plus metrics
"""

import filecmp
import json
from pathlib import Path

import numpy as np
import pytest

from padic_cnn.cli import main
from padic_cnn.imaging import GrayImage, read_pgm, write_pgm

EDGE_TOY = ["simulate", "--preset", "edge1d_p3l5", "--dt", "0.25",
            "--t-end", "5.0", "--stride", "5"]


def run_cli(args, capsys=None):
    return main([str(a) for a in args])


def assert_dirs_identical(d1, d2):
    cmp = filecmp.dircmp(d1, d2)
    assert not cmp.left_only and not cmp.right_only
    mismatched = [
        name for name in cmp.common_files
        if (Path(d1) / name).read_bytes() != (Path(d2) / name).read_bytes()
    ]
    assert mismatched == []


def edge_config_path(tmp_path, a=2.0, w_values=(2.0, -2.0, 0.0, 0.5), l=2):
    doc = {
        "schema": 1, "kind": "edge", "p": 2, "l": l, "a": a,
        "network": {
            "B": {"type": "scale", "coeff": float(2**l),
                  "of": {"type": "omega", "scale_exp": l}},
            "U": {"type": "values", "values": list(w_values)},
            "Z": {"type": "const", "value": 0.0},
        },
    }
    path = tmp_path / "edge.json"
    path.write_text(json.dumps(doc))
    return path


# -- simulate -------------------------------------------------------------------

def test_simulate_writes_expected_artifacts(tmp_path):
    out = tmp_path / "run"
    assert run_cli(EDGE_TOY + ["--out", out]) == 0
    names = {p.name for p in out.iterdir()}
    assert "run.json" in names and "bounds.txt" in names
    for stem in ("heatmap_U", "heatmap_X", "heatmap_Y"):
        assert f"{stem}.ppm" in names
        assert f"{stem}.png" in names
        assert f"{stem}.scale.txt" in names
    snaps = sorted(p.name for p in out.glob("snapshot_*.csv"))
    assert snaps[0] == "snapshot_000000.csv"
    assert len(snaps) == 5  # 20 steps, stride 5, plus t = 0
    bounds = (out / "bounds.txt").read_text()
    assert "satisfied = true" in bounds


def test_simulate_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_cli(EDGE_TOY + ["--out", a])
    run_cli(EDGE_TOY + ["--out", b])
    assert_dirs_identical(a, b)


def test_simulate_reproduces_from_recorded_run_json(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_cli(EDGE_TOY + ["--out", a])
    assert run_cli(["simulate", "--config", a / "run.json", "--out", b]) == 0
    assert_dirs_identical(a, b)


def test_simulate_validation_exit_codes(tmp_path, capsys):
    assert run_cli(["simulate", "--preset", "edge1d_p3l5", "--dt", "-1",
                    "--out", tmp_path / "x"]) == 1
    assert "--dt" in capsys.readouterr().err
    assert run_cli(["simulate", "--preset", "bogus",
                    "--out", tmp_path / "y"]) == 1
    assert run_cli(["simulate", "--out", tmp_path / "z"]) == 1


def test_delay_overrides_recorded(tmp_path):
    out = tmp_path / "d"
    assert run_cli(["delay", "--out", out, "--lambda", "2.0", "--r", "0",
                    "--dt", "0.5", "--t-end", "5", "--stride", "10"]) == 0
    doc = json.loads((out / "run.json").read_text())
    assert doc["resolved"]["lambda"] == 2.0
    assert doc["resolved"]["r"] == 0


def test_divergence_exits_three(tmp_path, capsys):
    clean = tmp_path / "clean.pgm"
    write_pgm(GrayImage(np.zeros((8, 8)), "symmetric"), clean)
    rc = run_cli(["denoise", "--clean", clean, "--noise-variance", "0.05",
                  "--mu", "300", "--out", tmp_path / "boom"])
    assert rc == 3
    assert "divergence" in capsys.readouterr().err


# -- stationary --------------------------------------------------------------------

def test_stationary_nine_state_report(tmp_path, capsys):
    cfg = edge_config_path(tmp_path)
    out = tmp_path / "stat"
    assert run_cli(["stationary", "--config", cfg, "--out", out]) == 0
    assert "9 states, 4 bistable" in capsys.readouterr().out
    report = (out / "report.txt").read_text()
    assert "minimal_equals_bistable = true" in report
    assert "lattice_ok = true" in report
    states = (out / "states.csv").read_text().splitlines()
    assert states[0].startswith("state_id,bistable")
    assert len(states) == 10
    hasse = (out / "hasse.csv").read_text().splitlines()
    assert hasse[0] == "parent,child"
    assert len(hasse) == 13
    assert (out / "hasse.png").exists()


def test_stationary_unique_regime(tmp_path):
    cfg = edge_config_path(tmp_path, a=0.5)
    out = tmp_path / "stat"
    assert run_cli(["stationary", "--config", cfg, "--out", out]) == 0
    report = (out / "report.txt").read_text()
    assert "regime = unique" in report
    assert "residual = 0" in report


def test_stationary_cap_exits_four(tmp_path, capsys):
    cfg = edge_config_path(
        tmp_path, a=2.0, w_values=[0.0] * 32, l=5
    )  # 32 free cells: 3^32 states
    rc = run_cli(["stationary", "--config", cfg, "--out", tmp_path / "s"])
    assert rc == 4
    assert "free cells" in capsys.readouterr().err


# -- verify --------------------------------------------------------------------------

def test_verify_flags_bound_violation(tmp_path, capsys):
    out = tmp_path / "run"
    run_cli(EDGE_TOY + ["--out", out])
    bounds = (out / "bounds.txt").read_text().splitlines()
    doctored = [
        "a_priori_bound = 0.001" if line.startswith("a_priori_bound") else line
        for line in bounds
    ]
    (out / "bounds.txt").write_text("\n".join(doctored) + "\n")
    assert run_cli(["verify", out]) == 2
    assert "bound_ok = false" in capsys.readouterr().out


def test_verify_single_and_pair(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    run_cli(["delay", "--out", a, "--lambda", "2.0", "--r", "0",
             "--dt", "0.05", "--t-end", "5"])
    run_cli(["delay", "--out", b, "--lambda", "2.0", "--r", "4",
             "--dt", "0.05", "--t-end", "5"])
    capsys.readouterr()
    assert run_cli(["verify", a]) == 0
    text = capsys.readouterr().out
    assert "bound_ok = true" in text
    assert run_cli(["verify", a, b]) == 0
    text = capsys.readouterr().out
    assert "final_state_diff_vs_b" in text
    assert (a / "verify.txt").exists()


# -- images ---------------------------------------------------------------------------

def make_blocks_pgm(path, side=16):
    img = np.zeros((side, side))
    half = side // 2
    img[:half, :half] = -0.6
    img[:half, half:] = 0.2
    img[half:, :half] = 0.6
    img[half:, half:] = -0.2
    write_pgm(GrayImage(img, "symmetric"), path)
    return img


def test_denoise_outputs_and_metrics(tmp_path):
    clean = tmp_path / "clean.pgm"
    make_blocks_pgm(clean)
    out = tmp_path / "den"
    assert run_cli(["denoise", "--clean", clean, "--noise-variance", "0.05",
                    "--noise-seed", "7", "--t-end", "0.1", "--out", out]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["psnr_denoised_db"] > metrics["psnr_noisy_db"]
    assert (out / "denoised.pgm").exists()
    assert (out / "noisy.pgm").exists()
    assert (out / "denoised.png").exists()


def test_denoise_zero_variance_degenerate_input(tmp_path):
    clean = tmp_path / "clean.pgm"
    make_blocks_pgm(clean)
    out = tmp_path / "z"
    assert run_cli(["denoise", "--clean", clean, "--noise-variance", "0",
                    "--t-end", "0.05", "--out", out]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["psnr_noisy_db"] == 200.0  # identical-image sentinel
    assert np.isfinite(metrics["psnr_denoised_db"])


def test_denoise_requires_an_input(tmp_path, capsys):
    assert run_cli(["denoise", "--out", tmp_path / "x"]) == 1
    assert "error" in capsys.readouterr().err


def test_denoise_deterministic_per_seed(tmp_path):
    clean = tmp_path / "clean.pgm"
    make_blocks_pgm(clean)
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["denoise", "--clean", clean, "--noise-variance", "0.05",
            "--noise-seed", "3", "--t-end", "0.05"]
    run_cli(args + ["--out", a])
    run_cli(args + ["--out", b])
    assert_dirs_identical(a, b)


def test_heat_filter_smooths(tmp_path):
    clean = tmp_path / "clean.pgm"
    pixels = make_blocks_pgm(clean)
    out = tmp_path / "heat"
    assert run_cli(["heat", "--input", clean, "--alpha", "1.0", "--t", "3",
                    "--out", out]) == 0
    filtered = read_pgm(out / "filtered.pgm", "symmetric")
    assert np.std(filtered.pixels) < np.std(pixels)


def test_edge_detect_2d_runs(tmp_path):
    clean = tmp_path / "clean.pgm"
    make_blocks_pgm(clean)
    out = tmp_path / "edges"
    assert run_cli(["edge-detect", "--input", clean, "--t-end", "5",
                    "--dt", "0.05", "--out", out]) == 0
    edges = read_pgm(out / "edges.pgm", "symmetric")
    assert edges.pixels.shape == (16, 16)


def test_edge_detect_reproduces_from_run_json(tmp_path):
    clean = tmp_path / "clean.pgm"
    make_blocks_pgm(clean)
    a, b = tmp_path / "a", tmp_path / "b"
    run_cli(["edge-detect", "--input", clean, "--t-end", "5", "--dt", "0.05",
             "--out", a])
    assert run_cli(["edge-detect", "--config", a / "run.json", "--out", b]) == 0
    assert_dirs_identical(a, b)


def test_edge_detect_preset_reports_stationary_gap(tmp_path):
    out = tmp_path / "e1"
    assert run_cli(["edge-detect", "--out", out]) == 0
    gap = float((out / "stationary.txt").read_text().split(" = ")[1])
    assert gap <= 1e-3


def test_rejects_non_square_image(tmp_path, capsys):
    bad = tmp_path / "bad.pgm"
    write_pgm(GrayImage(np.zeros((4, 8)), "symmetric"), bad)
    assert run_cli(["heat", "--input", bad, "--out", tmp_path / "h"]) == 1
    assert "square" in capsys.readouterr().err


def test_thread_cap_env_var_is_honored(tmp_path, monkeypatch):
    monkeypatch.setenv("PADIC_CNN_THREADS", "1")
    out = tmp_path / "t"
    assert run_cli(EDGE_TOY + ["--out", out]) == 0
    assert (out / "bounds.txt").exists()


def test_run_json_records_seed(tmp_path):
    out = tmp_path / "s"
    run_cli(EDGE_TOY + ["--out", out, "--seed", "42"])
    doc = json.loads((out / "run.json").read_text())
    assert doc["seed"] == 42
