"""Command-line front end: run presets and configs, emit artifacts.

Commands: simulate, delay, edge-detect, denoise, heat, stationary, verify.
Every run writes a self-describing run.json; re-running with that file as
--config reproduces all artifacts byte for byte.  Heavy imports happen
inside the command functions so the PADIC_CNN_THREADS cap can be applied
to the numerics libraries before they load.

Exit codes: 0 success, 1 usage/validation error, 2 stability-bound
violation, 3 divergence, 4 enumeration cap.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BOUND = 2
EXIT_DIVERGENCE = 3
EXIT_ENUMERATION = 4

FLOAT_FMT = "%.17g"


def _apply_thread_cap() -> None:
    cap = os.environ.get("PADIC_CNN_THREADS")
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, cap)


def _fmt(x: float) -> str:
    return FLOAT_FMT % (x,)


def _write_json(path, doc) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------


def _resolve_config(args, default_preset=None):
    from .errors import ConfigError
    from .presets import preset_config, validate_config

    preset = getattr(args, "preset", None)
    config_path = getattr(args, "config", None)
    if preset and config_path:
        raise ConfigError("pass exactly one of --preset and --config")
    if config_path:
        doc = _load_json(config_path)
        if "resolved" in doc:  # a run.json from an earlier run
            doc = doc["resolved"]
    elif preset:
        doc = preset_config(preset)
    elif default_preset:
        doc = preset_config(default_preset)
    else:
        raise ConfigError("pass one of --preset and --config")
    return validate_config(doc)


def _apply_overrides(doc, args) -> None:
    from .errors import ConfigError

    def positive(flag, value):
        if value <= 0:
            raise ConfigError(f"{flag} must be > 0, got {value}")
        return value

    if getattr(args, "dt", None) is not None:
        doc["dt"] = positive("--dt", args.dt)
    if getattr(args, "t_end", None) is not None:
        if args.t_end < 0:
            raise ConfigError(f"--t-end must be >= 0, got {args.t_end}")
        doc["t_end"] = args.t_end
    if getattr(args, "scheme", None) is not None:
        doc["scheme"] = args.scheme
    if getattr(args, "stride", None) is not None:
        doc["stride"] = int(positive("--stride", args.stride))
    if getattr(args, "lam", None) is not None:
        if args.lam < 0:
            raise ConfigError(f"--lambda must be >= 0, got {args.lam}")
        doc["lambda"] = args.lam
    if getattr(args, "r", None) is not None:
        if args.r < 0:
            raise ConfigError(f"--r must be >= 0, got {args.r}")
        doc["r"] = args.r
    if getattr(args, "alpha", None) is not None:
        doc["alpha"] = positive("--alpha", args.alpha)
    if getattr(args, "mu", None) is not None:
        doc["mu"] = args.mu
    if getattr(args, "a", None) is not None:
        doc["a"] = args.a
    if getattr(args, "x0", None) is not None:
        if doc["kind"] == "delay":
            doc["network"]["history"] = {"type": "const", "value": args.x0}
        else:
            doc["network"]["X0"] = {"type": "const", "value": args.x0}


def _prepare_out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Artifact emission
# ---------------------------------------------------------------------------


def _emit_trajectory(outdir: Path, doc, traj, input_grid, command: str,
                     seed: int = 0):
    from .funcspace import write_grid_csv
    from .imaging import grid_rows, save_heatmap, save_heatmap_png, trajectory_rows
    from .networks import SIGMOID

    _write_json(outdir / "run.json", {
        "schema": 1,
        "command": command,
        "seed": seed,
        "resolved": doc,
    })
    dt = float(doc["dt"])
    for k, t in enumerate(traj.times):
        step = int(round(t / dt))
        write_grid_csv(traj.states[k], outdir / f"snapshot_{step:06d}.csv")

    if input_grid is not None:
        save_heatmap(grid_rows(input_grid), outdir / "heatmap_U.ppm",
                     outdir / "heatmap_U.scale.txt")
        save_heatmap_png(grid_rows(input_grid), outdir / "heatmap_U.png",
                         title="input U")
    x_rows = trajectory_rows(traj)
    save_heatmap(x_rows, outdir / "heatmap_X.ppm", outdir / "heatmap_X.scale.txt")
    save_heatmap_png(x_rows, outdir / "heatmap_X.png", title="state X",
                     ylabel="snapshot")
    y_rows = SIGMOID(x_rows)
    save_heatmap(y_rows, outdir / "heatmap_Y.ppm", outdir / "heatmap_Y.scale.txt")
    save_heatmap_png(y_rows, outdir / "heatmap_Y.png", title="output Y",
                     ylabel="snapshot")


def _emit_bounds(outdir: Path, kind: str, bound, observed: float) -> bool:
    """Write bounds.txt; returns True when the bound is satisfied or absent."""
    ok = bound is None or observed <= bound + 1e-9
    lines = [
        f"bound_kind = {kind}",
        "a_priori_bound = " + ("none" if bound is None else _fmt(bound)),
        f"observed_sup = {_fmt(observed)}",
        "satisfied = " + ("not-applicable" if bound is None
                          else ("true" if ok else "false")),
    ]
    (outdir / "bounds.txt").write_text("\n".join(lines) + "\n", encoding="ascii")
    return ok


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(args, default_preset=None) -> int:
    from .dynamics import DelayState, integrate, integrate_delay
    from .errors import ConfigError
    from .networks import (
        rhs_continuous,
        rhs_delay,
        stability_bound_continuous,
        stability_bound_delay,
    )
    from .presets import build_continuous, build_delay, stepper_config

    doc = _resolve_config(args, default_preset)
    _apply_overrides(doc, args)
    outdir = _prepare_out(args)
    cfg = stepper_config(doc)

    if doc["kind"] == "continuous":
        net, x0 = build_continuous(doc)
        traj = integrate(rhs_continuous(net), x0, cfg)
        bound = stability_bound_continuous(net, x0)
        kind = "continuous-sup"
        input_grid = net.U
    elif doc["kind"] == "delay":
        net = build_delay(doc)
        traj = integrate_delay(
            rhs_delay(net), DelayState(net.r, net.history), cfg
        )
        base = stability_bound_delay(net)
        x0_sup = net.history(0.0).sup_norm()
        bound = None if base is None else base + x0_sup
        kind = "delay-envelope"
        input_grid = net.U
    else:
        raise ConfigError(
            f"kind {doc['kind']!r} is not simulatable here; use the "
            "denoise or edge-detect commands for image pipelines"
        )

    _emit_trajectory(outdir, doc, traj, input_grid, "simulate",
                     seed=getattr(args, "seed", 0))
    observed = traj.sup_norm()
    ok = _emit_bounds(outdir, kind, bound, observed)
    print(f"wrote {outdir} (sup {_fmt(observed)}, bound "
          f"{'none' if bound is None else _fmt(bound)})")
    return EXIT_OK if ok else EXIT_BOUND


def cmd_delay(args) -> int:
    return cmd_simulate(args, default_preset="delay_p2l5")


def cmd_edge_detect(args) -> int:
    from .dynamics import integrate
    from .imaging import read_pgm
    from .networks import rhs_continuous
    from .presets import build_continuous, stepper_config, validate_config

    if args.input is not None:
        # The input image is U; feedforward = center value minus the mean
        # over the surrounding radius-p^{-2} ball, thresholded at z0.
        from .imaging import encode

        img = read_pgm(args.input, "symmetric")
        emap, params = _image_map(img)
        u_grid = encode(img, emap)
        doc = validate_config({
            "schema": 1,
            "kind": "edge",
            "p": params.p,
            "l": params.l,
            "scheme": "rk4",
            "dt": args.dt if args.dt else 0.05,
            "t_end": args.t_end if args.t_end is not None else 10.0,
            "stride": 1,
            "a": args.a if args.a is not None else 2.0,
            "network": {
                "B": {"type": "sum", "terms": [
                    {"type": "scale", "coeff": float(params.n_leaves),
                     "of": {"type": "omega", "scale_exp": params.l}},
                    {"type": "scale", "coeff": -float(params.p**2),
                     "of": {"type": "omega", "scale_exp": 2}},
                ]},
                "U": {"type": "values", "values": u_grid.values.tolist()},
                "Z": {"type": "const", "value": args.z0},
            },
        })
        return _run_edge_image(doc, args)

    doc = _resolve_config(args, "edge1d_p3l5")
    _apply_overrides(doc, args)
    if doc["kind"] == "edge":
        # a recorded 2-D edge run: the image values are embedded
        return _run_edge_image(doc, args)

    # 1-D preset path: run the continuous network, then report the gap to
    # its closed-form stationary state (the preset's pointwise gain is
    # 2 p^{-l} < 1, so the state is unique).
    rc = cmd_simulate(args, default_preset="edge1d_p3l5")
    if rc != EXIT_OK or doc["kind"] != "continuous":
        return rc
    net, x0 = build_continuous(doc)
    traj = integrate(rhs_continuous(net), x0, stepper_config(doc))
    gap = _edge_stationary_gap(net, traj)
    (Path(args.out) / "stationary.txt").write_text(
        f"gap_sup = {_fmt(gap)}\n", encoding="ascii"
    )
    print(f"stationary gap at t_end: {_fmt(gap)}")
    return EXIT_OK


def _run_edge_image(doc, args) -> int:
    """Integrate a kind-'edge' config from zero state and decode the output."""
    from .dynamics import integrate
    from .funcspace import GridFunction
    from .imaging import EncodingMap, decode, save_heatmap_png, write_pgm
    from .networks import SIGMOID, rhs_edge
    from .presets import build_edge, stepper_config, tree_params

    params = tree_params(doc)
    side = params.p ** (params.l // 2)
    emap = EncodingMap("morton_2d", params, side, side)
    net = build_edge(doc)
    outdir = _prepare_out(args)
    traj = integrate(rhs_edge(net), GridFunction.zeros(params),
                     stepper_config(doc))
    y_final = GridFunction(params, SIGMOID(traj.final().values))
    edges, clamped = decode(y_final, emap, "symmetric")
    _write_json(outdir / "run.json", {"schema": 1, "command": "edge-detect",
                                      "resolved": doc})
    write_pgm(edges, outdir / "edges.pgm")
    save_heatmap_png(edges.pixels, outdir / "edges.png", title="edge map",
                     xlabel="column", ylabel="row")
    print(f"wrote {outdir / 'edges.pgm'} (clamped {clamped})")
    return EXIT_OK


def _edge_stationary_gap(net, traj) -> float:
    """Sup-norm gap between the final state and the closed-form fixed point.

    Valid for presets whose feedback kernel is supported on the smallest
    ball, where A acts as the pointwise gain p^{-l} A(0).
    """
    import numpy as np

    from .networks import EdgeCnn, stationary_edge

    a_grid = net.A.as_grid().values
    if np.count_nonzero(a_grid) > 1 or a_grid[0] < 0:
        raise ValueError("stationary gap needs a smallest-ball feedback kernel")
    a_eff = net.params.haar_weight * a_grid[0]
    edge = EdgeCnn(a=a_eff, B=net.B, U=net.U, Z=net.Z)
    state = stationary_edge(edge)
    return float(np.max(np.abs(traj.final().values - state.values.values)))


def _image_map(img):
    from .errors import ConfigError
    from .imaging import EncodingMap
    from .ptree import TreeParams

    if img.width == img.height and img.width & (img.width - 1) == 0:
        m = img.width.bit_length() - 1
        params = TreeParams(2, 2 * m)
        return EncodingMap("morton_2d", params, img.width, img.height), params
    raise ConfigError(
        f"image must be square with power-of-two side for the Morton codec; "
        f"got {img.width}x{img.height}"
    )


def cmd_denoise(args) -> int:
    from .dynamics import integrate
    from .errors import ConfigError
    from .imaging import (
        add_gaussian_noise,
        decode,
        encode,
        psnr,
        read_pgm,
        save_heatmap_png,
        write_pgm,
    )
    from .networks import rhs_denoise
    from .presets import build_denoise, stepper_config

    doc = _resolve_config(args, "denoise_a075")
    _apply_overrides(doc, args)

    clean = read_pgm(args.clean, "symmetric") if args.clean else None
    if args.input:
        noisy = read_pgm(args.input, "symmetric")
    elif clean is not None and args.noise_variance is not None:
        noisy = add_gaussian_noise(
            clean, 0.0, args.noise_variance, seed=args.noise_seed
        )
    else:
        raise ConfigError(
            "pass --input, or --clean with --noise-variance to pollute it"
        )

    emap, params = _image_map(noisy)
    doc["p"], doc["l"] = params.p, params.l
    outdir = _prepare_out(args)
    x0 = encode(noisy, emap)
    net = build_denoise(doc, x0)
    cfg = stepper_config(doc)
    traj = integrate(rhs_denoise(net), x0, cfg)
    denoised, clamped = decode(traj.final(), emap, "symmetric")

    _write_json(outdir / "run.json", {"schema": 1, "command": "denoise",
                                      "resolved": doc,
                                      "noise_seed": args.noise_seed})
    write_pgm(noisy, outdir / "noisy.pgm")
    write_pgm(denoised, outdir / "denoised.pgm")
    save_heatmap_png(denoised.pixels, outdir / "denoised.png",
                     title="denoised", xlabel="column", ylabel="row")
    metrics = {"clamped_pixels": clamped}
    if clean is not None:
        metrics["psnr_noisy_db"] = psnr(noisy, clean)
        metrics["psnr_denoised_db"] = psnr(denoised, clean)
    _write_json(outdir / "metrics.json", metrics)
    print(f"wrote {outdir / 'denoised.pgm'}"
          + (f" (PSNR {metrics.get('psnr_denoised_db'):.2f} dB vs noisy "
             f"{metrics.get('psnr_noisy_db'):.2f} dB)" if clean else ""))
    return EXIT_OK


def cmd_heat(args) -> int:
    from .dynamics import evolve_semigroup
    from .funcspace import build_vladimirov_generator
    from .imaging import decode, encode, read_pgm, save_heatmap_png, write_pgm

    img = read_pgm(args.input, "symmetric")
    emap, params = _image_map(img)
    outdir = _prepare_out(args)
    L = build_vladimirov_generator(params, args.alpha)
    out = evolve_semigroup(L, encode(img, emap), args.t)
    filtered, clamped = decode(out, emap, "symmetric")
    doc = {"schema": 1, "kind": "heat", "p": params.p, "l": params.l,
           "alpha": args.alpha, "t": args.t}
    _write_json(outdir / "run.json", {"schema": 1, "command": "heat",
                                      "resolved": doc})
    write_pgm(filtered, outdir / "filtered.pgm")
    save_heatmap_png(filtered.pixels, outdir / "filtered.png",
                     title=f"heat filter t={args.t}", xlabel="column",
                     ylabel="row")
    print(f"wrote {outdir / 'filtered.pgm'} (clamped {clamped})")
    return EXIT_OK


def cmd_stationary(args) -> int:
    from .errors import ConfigError
    from .networks import (
        enumerate_stationary,
        hasse_edges,
        lattice_check,
        minimal_states,
        poset_compare,
        rhs_edge,
        stationary_edge,
    )
    from .presets import build_edge

    doc = _resolve_config(args)
    _apply_overrides(doc, args)
    if doc["kind"] != "edge":
        raise ConfigError(f"stationary analysis needs kind 'edge', "
                          f"got {doc['kind']!r}")
    net = build_edge(doc)
    outdir = _prepare_out(args)
    _write_json(outdir / "run.json", {"schema": 1, "command": "stationary",
                                      "resolved": doc})

    if net.a <= 1.0:
        state = stationary_edge(net)
        residual = rhs_edge(net)(0.0, state.values).sup_norm()
        lines = [
            "regime = unique",
            f"a = {_fmt(net.a)}",
            f"residual = {_fmt(residual)}",
            "values = " + " ".join(_fmt(v) for v in state.values.values),
        ]
        (outdir / "states.csv").write_text(
            _states_csv([state], net), encoding="ascii"
        )
        (outdir / "report.txt").write_text("\n".join(lines) + "\n",
                                           encoding="ascii")
        print(f"unique stationary state, residual {_fmt(residual)}")
        print("values:", " ".join(_fmt(v) for v in state.values.values))
        return EXIT_OK

    states = enumerate_stationary(net)
    residuals = [rhs_edge(net)(0.0, s.values).sup_norm() for s in states]
    minimal = minimal_states(states)
    bistable = [s for s in states if s.bistable]
    minimal_is_bistable = {id(s) for s in minimal} == {id(s) for s in bistable}
    audit = lattice_check(states)
    (outdir / "states.csv").write_text(_states_csv(states, net),
                                       encoding="ascii")
    edges = hasse_edges(states)
    hasse = "parent,child\n" + "".join(f"{i},{j}\n" for i, j in edges)
    (outdir / "hasse.csv").write_text(hasse, encoding="ascii")
    _render_hasse_png(states, edges, outdir / "hasse.png")
    lines = [
        "regime = multiple",
        f"a = {_fmt(net.a)}",
        f"states = {len(states)}",
        f"bistable = {len(bistable)}",
        f"max_residual = {_fmt(max(residuals))}",
        f"minimal_equals_bistable = {str(minimal_is_bistable).lower()}",
        f"lattice_ok = {str(audit['ok']).lower()}",
        f"hasse_edges = {len(edges)}",
    ]
    (outdir / "report.txt").write_text("\n".join(lines) + "\n",
                                       encoding="ascii")
    print(f"{len(states)} states, {len(bistable)} bistable; "
          f"minimal==bistable: {minimal_is_bistable}")
    return EXIT_OK


def _render_hasse_png(states, edges, path) -> None:
    """Layered drawing of the state order: bistable states at the bottom."""
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    layers: dict[int, list[int]] = {}
    for k, s in enumerate(states):
        layers.setdefault(len(s.middle()), []).append(k)
    pos = {}
    for depth, members in sorted(layers.items()):
        for col, k in enumerate(sorted(members)):
            pos[k] = (col - (len(members) - 1) / 2.0, depth)

    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=110)
    for parent, child in edges:
        (x1, y1), (x2, y2) = pos[parent], pos[child]
        ax.plot([x1, x2], [y1, y2], color="0.6", lw=1.0, zorder=1)
    for k, s in enumerate(states):
        x, y = pos[k]
        color = "#b4231f" if s.bistable else "#2a6fbb"
        ax.scatter([x], [y], s=160, color=color, zorder=2)
        ax.annotate(str(k), (x, y), ha="center", va="center",
                    color="white", fontsize=8, zorder=3)
    ax.set_ylabel("middle cells (certainty gap)")
    ax.set_xticks([])
    ax.set_title("stationary states: red = bistable (minimal)")
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def _states_csv(states, net) -> str:
    from .networks import edge_residual

    rows = ["state_id,bistable,n_plus,n_minus,n_middle,residual,i_plus,i_minus"]
    for k, s in enumerate(states):
        res = edge_residual(s.gain, s.drive_values, s.values.values)
        rows.append(
            f"{k},{int(s.bistable)},{len(s.i_plus)},{len(s.i_minus)},"
            f"{len(s.middle())},{_fmt(res)},"
            f"{'|'.join(str(v) for v in sorted(s.i_plus))},"
            f"{'|'.join(str(v) for v in sorted(s.i_minus))}"
        )
    return "\n".join(rows) + "\n"


def cmd_verify(args) -> int:
    import numpy as np

    from .funcspace import read_grid_csv
    from .networks import SIGMOID

    reports = []
    ok = True
    for run_dir in args.run_dirs:
        run_dir = Path(run_dir)
        run = _load_json(run_dir / "run.json")
        snaps = sorted(run_dir.glob("snapshot_*.csv"))
        states = [read_grid_csv(p) for p in snaps]
        sup = max(s.sup_norm() for s in states) if states else float("nan")
        y_sup = max(float(np.max(np.abs(SIGMOID(s.values)))) for s in states)
        lines = [f"run = {run_dir}", f"snapshots = {len(states)}",
                 f"observed_sup = {_fmt(sup)}", f"output_sup = {_fmt(y_sup)}"]
        bounds_file = run_dir / "bounds.txt"
        if bounds_file.exists():
            bounds = dict(
                line.split(" = ", 1)
                for line in bounds_file.read_text().splitlines()
            )
            lines.append(f"recorded_bound = {bounds['a_priori_bound']}")
            if bounds["a_priori_bound"] != "none":
                bound_ok = sup <= float(bounds["a_priori_bound"]) + 1e-9
                lines.append(f"bound_ok = {str(bound_ok).lower()}")
                ok = ok and bound_ok
        reports.append((run_dir, states, run, lines))

    if len(reports) == 2:
        (d1, s1, _, lines), (d2, s2, _, _) = reports
        n = min(len(s1), len(s2))
        diff = float(np.max(np.abs(s1[n - 1].values - s2[n - 1].values)))
        lines.append(f"final_state_diff_vs_{d2.name} = {_fmt(diff)}")

    text = "\n".join("\n".join(lines) for _, _, _, lines in reports) + "\n"
    out_path = Path(args.run_dirs[0]) / "verify.txt"
    out_path.write_text(text, encoding="ascii")
    print(text, end="")
    return EXIT_OK if ok else EXIT_BOUND


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common_run_flags(p):
    p.add_argument("--preset", help="embedded preset name")
    p.add_argument("--config", help="path to a run config or run.json")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--dt", type=float, help="time step")
    p.add_argument("--t-end", dest="t_end", type=float, help="horizon")
    p.add_argument("--scheme", choices=("euler", "rk4"))
    p.add_argument("--stride", type=int, help="snapshot stride")
    p.add_argument("--lambda", dest="lam", type=float, help="leak rate")
    p.add_argument("--r", type=float, help="delay horizon")
    p.add_argument("--x0", type=float, help="constant initial state override")
    p.add_argument("--seed", type=int, default=0,
                   help="recorded in run.json (simulations are deterministic)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="padic-cnn",
        description="Hierarchical (p-adic) cellular neural network simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a preset or config")
    _add_common_run_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("delay", help="run the delay preset")
    _add_common_run_flags(p)
    p.set_defaults(func=cmd_delay)

    p = sub.add_parser("edge-detect", help="edge detection (1-D preset or image)")
    _add_common_run_flags(p)
    p.add_argument("--input", help="input PGM image (2-D mode)")
    p.add_argument("--a", type=float, help="feedback gain (2-D mode)")
    p.add_argument("--z0", type=float, default=-1.0, help="threshold constant")
    p.set_defaults(func=cmd_edge_detect)

    p = sub.add_parser("denoise", help="reaction-diffusion image denoiser")
    p.add_argument("--preset", help="embedded preset name")
    p.add_argument("--config", help="path to a run config or run.json")
    p.add_argument("--out", required=True)
    p.add_argument("--input", help="noisy PGM image")
    p.add_argument("--clean", help="clean PGM image for metrics")
    p.add_argument("--noise-variance", dest="noise_variance", type=float,
                   help="pollute --clean with this Gaussian variance")
    p.add_argument("--noise-seed", dest="noise_seed", type=int, default=0)
    p.add_argument("--alpha", type=float, help="diffusion exponent")
    p.add_argument("--mu", type=float, help="reaction gain")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("heat", help="pure fractional heat filter")
    p.add_argument("--input", required=True, help="PGM image")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--t", type=float, default=3.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_heat)

    p = sub.add_parser("stationary", help="stationary-state analysis")
    p.add_argument("--config", required=True, help="edge-network config")
    p.add_argument("--out", required=True)
    p.add_argument("--a", type=float, help="gain override")
    p.set_defaults(func=cmd_stationary)

    p = sub.add_parser("verify", help="verify one run dir, or compare two")
    p.add_argument("run_dirs", nargs="+", metavar="RUN_DIR")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = build_parser()
    args = parser.parse_args(argv)

    from .errors import (
        AccuracyError,
        ConfigError,
        DivergenceError,
        EnumerationLimitError,
        ParameterError,
        ValidationError,
    )

    try:
        return args.func(args)
    except (ConfigError, ParameterError, ValidationError, AccuracyError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except EnumerationLimitError as exc:
        print(f"enumeration limit: {exc}", file=sys.stderr)
        return EXIT_ENUMERATION


if __name__ == "__main__":
    sys.exit(main())
