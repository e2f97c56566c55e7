"""Command-line interface.

Subcommands mirror the workflow: `generate` manufactures measurement data
from a phantom, `reconstruct` runs the descent loop against measurement
data, `gradcheck` validates the adjoint gradient against finite
differences, `compare` counts differing nodes of two binary fields, and
`examples` reproduces the built-in benchmarks end to end.

Exit codes are stable: 0 success, 1 meaningful difference / failed check,
2 configuration error, 3 solver failure, 4 iteration cap reached.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import fem, fieldio, figures, forward, gradient, optimizer, phantoms
from .errors import (ConfigError, InvalidArgumentError, MagreconError,
                     NewtonFailureError, ParseError, ReconstructionAborted,
                     SolverFailureError)

EXIT_OK = 0
EXIT_DIFFERENCE = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_ITERATION_CAP = 4

ENV_OUT_DIR = "MAGRECON_OUT"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magrecon",
        description="Two-phase reconstruction of air gaps in a nonlinear "
                    "magnetic workpiece from induction measurements.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="path to a JSON run configuration")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry (dotted or bare key)")
        p.add_argument("--out", help="output directory (default: config, "
                                     f"then ${ENV_OUT_DIR}, then ./magrecon_out)")
        p.add_argument("--seed", type=int,
                       help="set both noise.seed and pcls.phi0_seed")

    p_gen = sub.add_parser("generate", help="solve the forward problem for a "
                                            "phantom and write measurement data")
    add_common(p_gen)
    p_gen.add_argument("--binary", action="store_true",
                       help="write the measurement payload in binary")

    p_rec = sub.add_parser("reconstruct", help="run the descent loop against "
                                               "measurement data")
    add_common(p_rec)
    p_rec.add_argument("--progress-log", metavar="PATH",
                       help="write one JSON record per outer iteration")
    p_rec.add_argument("--no-figures", action="store_true",
                       help="skip rendering figures")

    p_chk = sub.add_parser("gradcheck", help="validate the adjoint gradient "
                                             "against finite differences")
    add_common(p_chk, config_required=False)
    p_chk.add_argument("--dim", type=int, help="grid size (default 10, "
                                               "or the config's grid.dim)")
    p_chk.add_argument("--directions", type=int, default=5,
                       help="number of random directions (default 5)")
    p_chk.add_argument("--eps", type=float, default=1e-4,
                       help="finite-difference step (default 1e-4)")
    p_chk.add_argument("--flip-sign", action="store_true", help=argparse.SUPPRESS)

    p_cmp = sub.add_parser("compare", help="count nodes where two binary "
                                           "phase fields differ")
    p_cmp.add_argument("phi_a")
    p_cmp.add_argument("phi_b")

    p_ex = sub.add_parser("examples", help="run the built-in benchmarks")
    p_ex.add_argument("--only", action="append", default=[],
                      help="restrict to the named example (repeatable)")
    p_ex.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                      help="override config entries of every example run")
    p_ex.add_argument("--out", help="output root directory")
    p_ex.add_argument("--no-figures", action="store_true")
    return parser


def _resolve_out_dir(args, cfg: dict | None) -> Path:
    if getattr(args, "out", None):
        base = args.out
    elif cfg and cfg["output"]["dir"]:
        base = cfg["output"]["dir"]
    elif os.environ.get(ENV_OUT_DIR):
        base = os.environ[ENV_OUT_DIR]
    else:
        base = "magrecon_out"
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_effective_config(args) -> dict:
    if getattr(args, "config", None):
        cfg = cfgmod.load_config(args.config)
    else:
        cfg = cfgmod.default_config()
    cfg = cfgmod.apply_overrides(cfg, args.override)
    if getattr(args, "seed", None) is not None:
        cfg = cfgmod.apply_overrides(
            cfg, [f"noise.seed={args.seed}", f"pcls.phi0_seed={args.seed}"])
    return cfg


def _write_effective_config(out_dir: Path, cfg: dict):
    cfgmod.save_config(out_dir / "effective_config.json", cfg)


def cmd_generate(args) -> int:
    cfg = _load_effective_config(args)
    phantom = cfgmod.make_phantom(cfg)
    if phantom is None:
        raise ConfigError("generate requires phantom.shapes to be non-empty")
    out_dir = _resolve_out_dir(args, cfg)
    grid = cfgmod.make_grid(cfg)
    curve = cfgmod.make_curve(cfg)
    source = cfgmod.make_source(cfg)
    newton = cfgmod.make_newton(cfg)
    refine = cfg["grid"]["generate_refine"]

    solve_grid = grid if refine == 1 else fem.build_grid(grid.dim * refine)
    phi_solve = phantoms.rasterize(phantom, solve_grid)
    potential, iters = _forward(phi_solve, source, curve, newton)
    print(f"forward solve: {iters} newton iterations on dim={solve_grid.dim}")
    if refine == 1:
        mbar = fem.gradient_at_quad(potential)
    else:
        vectors = fem.gradient_at_points(potential, grid.quad_xy.reshape(-1, 2))
        mbar = fem.QuadVectorField(grid, vectors.reshape(grid.n_cells, -1, 2),
                                   grid.qp_weights)
    noise = cfgmod.make_noise(cfg)
    mbar = phantoms.add_noise(mbar, noise)

    phi_exact = phantoms.rasterize(phantom, grid)
    fieldio.write_field(out_dir / "mbar.field", mbar, binary=args.binary)
    fieldio.write_field(out_dir / "phi_exact.field", phi_exact)
    _write_effective_config(out_dir, cfg)
    print(f"wrote {out_dir / 'mbar.field'} and {out_dir / 'phi_exact.field'}")
    return EXIT_OK


def _forward(phi, source, curve, newton):
    try:
        return forward.newton_solve(phi, source, curve, newton)
    except (NewtonFailureError, SolverFailureError) as exc:
        raise _SolverStage("forward solve", exc) from exc


class _SolverStage(MagreconError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"solver failure during {stage}: {cause}")


def _obtain_measurements(cfg, grid, curve, source, newton):
    """Measurement data plus the exact phase field when it is known."""
    meas = cfg["measurement"]
    phantom = cfgmod.make_phantom(cfg)
    if meas["path"]:
        mbar = fieldio.read_field(meas["path"])
        if not isinstance(mbar, fem.QuadVectorField):
            raise ConfigError(f"measurement.path {meas['path']!r} is not "
                              "a quad-vector field file")
        if mbar.grid != grid:
            raise ConfigError(f"measurement grid dim={mbar.grid.dim} does not "
                              f"match grid.dim={grid.dim}")
        phi_exact = None
        if meas["phi_exact_path"]:
            phi_exact = fieldio.read_field(meas["phi_exact_path"])
            if not isinstance(phi_exact, fem.NodalField) or phi_exact.grid != grid:
                raise ConfigError("measurement.phi_exact_path is not a nodal "
                                  "field on the run grid")
    elif phantom is not None:
        try:
            mbar = phantoms.generate_measurements(
                phantom, source, curve, grid, newton,
                refine=cfg["grid"]["generate_refine"])
        except (NewtonFailureError, SolverFailureError) as exc:
            raise _SolverStage("measurement generation", exc) from exc
        phi_exact = phantoms.rasterize(phantom, grid)
    else:
        raise ConfigError("reconstruct requires either measurement.path or "
                          "phantom.shapes")
    return phantoms.add_noise(mbar, cfgmod.make_noise(cfg)), phi_exact


def cmd_reconstruct(args) -> int:
    cfg = _load_effective_config(args)
    out_dir = _resolve_out_dir(args, cfg)
    grid = cfgmod.make_grid(cfg)
    curve = cfgmod.make_curve(cfg)
    source = cfgmod.make_source(cfg)
    newton = cfgmod.make_newton(cfg)
    pcls = cfgmod.make_pcls(cfg)
    mbar, phi_exact = _obtain_measurements(cfg, grid, curve, source, newton)

    progress_fh = None
    progress = None
    if args.progress_log:
        progress_fh = open(args.progress_log, "w", encoding="utf-8")

        def progress(record):
            progress_fh.write(json.dumps(record) + "\n")

    report = None
    exit_code = EXIT_OK
    try:
        report = optimizer.run_reconstruction(
            mbar, source, curve, pcls, grid, phi_exact,
            newton=newton, progress=progress)
    except ReconstructionAborted as exc:
        report = exc.partial_report
        _write_outputs(out_dir, cfg, report, phi_exact, not args.no_figures)
        print(f"solver failure during reconstruction: {exc.cause}", file=sys.stderr)
        return EXIT_SOLVER
    finally:
        if progress_fh is not None:
            progress_fh.close()

    _write_outputs(out_dir, cfg, report, phi_exact, not args.no_figures)
    summary = (f"{report.stop_reason} after {report.iterations} iterations, "
               f"final misfit {report.f1_history[-1]:.3e}")
    if report.mismatch_count is not None:
        summary += f", mismatch {report.mismatch_count} nodes"
    print(summary)
    if report.stop_reason == optimizer.STOP_ITERATION_CAP:
        exit_code = EXIT_ITERATION_CAP
    return exit_code


def _write_outputs(out_dir: Path, cfg: dict, report, phi_exact, render: bool):
    fieldio.write_report(out_dir / "report.json", report, effective_config=cfg)
    fieldio.write_field(out_dir / "phi_final.field", report.final_phi)
    fieldio.write_history_csv(out_dir / "f1_history.csv", report.f1_history)
    _write_effective_config(out_dir, cfg)
    if render and cfg["output"]["figures"]:
        figures.save_phase_figure(out_dir / "phase.png", report.final_phi, phi_exact)
        figures.save_history_figure(out_dir / "f1_history.png", report.f1_history)


def _smooth_direction(rng, grid) -> fem.NodalField:
    """A random smooth field vanishing on the boundary (low-order sine modes)."""
    x = grid.nodes[:, 0] - grid.x_min
    y = grid.nodes[:, 1] - grid.y_min
    values = np.zeros(grid.n_nodes)
    for m in range(1, 4):
        for n in range(1, 4):
            values += rng.normal() * np.sin(m * np.pi * x) * np.sin(n * np.pi * y)
    return fem.NodalField(grid, values)


def cmd_gradcheck(args) -> int:
    cfg = _load_effective_config(args)
    if args.dim is not None:
        cfg = cfgmod.apply_overrides(cfg, [f"grid.dim={args.dim}"])
    elif args.config is None:
        cfg = cfgmod.apply_overrides(cfg, ["grid.dim=10"])
    grid = cfgmod.make_grid(cfg)
    curve = cfgmod.make_curve(cfg)
    source = cfgmod.make_source(cfg)
    alpha = cfg["pcls"]["alpha"]
    newton = forward.NewtonConfig(rel_residual_tol=1e-12)
    phantom = cfgmod.make_phantom(cfg)
    if phantom is None:
        phantom = phantoms.Phantom((phantoms.Circle((0.2, 0.15), 0.1),))
    try:
        mbar = phantoms.generate_measurements(phantom, source, curve, grid, newton)
    except (NewtonFailureError, SolverFailureError) as exc:
        raise _SolverStage("measurement generation", exc) from exc

    seed = args.seed if args.seed is not None else cfg["pcls"]["phi0_seed"]
    rng = np.random.default_rng(seed)
    phi = fem.NodalField(grid, rng.uniform(1.1, 1.9, grid.n_nodes))
    eps = args.eps

    def objective(field):
        potential, _ = _forward(field, source, curve, newton)
        return (gradient.evaluate_misfit(potential, mbar)
                + alpha * gradient.smoothing_energy(field))

    potential, _ = _forward(phi, source, curve, newton)
    bundle = gradient.gradient_bundle(phi, potential, mbar, curve, alpha)
    df = bundle.df.values if not args.flip_sign else -bundle.df.values
    mass = fem.assemble_mass(grid)

    print(f"gradient check: dim={grid.dim} alpha={alpha} eps={eps:g} "
          f"directions={args.directions}")
    print(f"{'dir':>3} {'fd_slope':>15} {'<DF,h>':>15} {'rel_error':>10}  verdict")
    all_ok = True
    for t in range(args.directions):
        h = _smooth_direction(rng, grid)
        f_plus = objective(phi.with_values(phi.values + eps * h.values))
        f_minus = objective(phi.with_values(phi.values - eps * h.values))
        fd = (f_plus - f_minus) / (2 * eps)
        inner = float(h.values @ (mass @ df))
        rel = abs(fd - inner) / max(abs(fd), 1e-300)
        ok = rel <= 1e-3
        all_ok &= ok
        print(f"{t:>3} {fd:>15.6e} {inner:>15.6e} {rel:>10.2e}  "
              f"{'pass' if ok else 'FAIL'}")
    print("gradient check " + ("passed" if all_ok else "FAILED"))
    return EXIT_OK if all_ok else EXIT_DIFFERENCE


def cmd_compare(args) -> int:
    a = fieldio.read_field(args.phi_a)
    b = fieldio.read_field(args.phi_b)
    if not isinstance(a, fem.NodalField) or not isinstance(b, fem.NodalField):
        raise InvalidArgumentError("compare expects nodal field files")
    count = fieldio.compare_fields(a, b)
    print(count)
    return EXIT_OK if count == 0 else EXIT_DIFFERENCE


def cmd_examples(args) -> int:
    out_root = Path(args.out) if args.out else _resolve_out_dir(args, None)
    selected = phantoms.builtin_examples()
    if args.only:
        names = {e.name for e in selected}
        unknown = [n for n in args.only if n not in names]
        if unknown:
            raise ConfigError(f"unknown example name(s): {', '.join(unknown)}")
        selected = [e for e in selected if e.name in args.only]

    worst = EXIT_OK
    for example in selected:
        cfg = _example_config(example)
        cfg = cfgmod.apply_overrides(cfg, args.override)
        levels = example.noise_levels or (0.0,)
        for level in levels:
            run_dir = out_root / example.name
            if len(levels) > 1:
                run_dir = run_dir / f"noise_{int(round(level * 100)):02d}"
            run_cfg = cfgmod.apply_overrides(cfg, [f"noise.level={level}"])
            ns = argparse.Namespace(config=None, override=[], out=str(run_dir),
                                    seed=None, progress_log=None,
                                    no_figures=args.no_figures)
            code = _run_example(ns, run_cfg, example.name, level)
            worst = max(worst, code)
    return worst


def _run_example(ns, run_cfg, name, level) -> int:
    out_dir = _resolve_out_dir(ns, run_cfg)
    grid = cfgmod.make_grid(run_cfg)
    curve = cfgmod.make_curve(run_cfg)
    source = cfgmod.make_source(run_cfg)
    newton = cfgmod.make_newton(run_cfg)
    pcls = cfgmod.make_pcls(run_cfg)
    mbar, phi_exact = _obtain_measurements(run_cfg, grid, curve, source, newton)
    try:
        report = optimizer.run_reconstruction(mbar, source, curve, pcls, grid,
                                              phi_exact, newton=newton)
    except ReconstructionAborted as exc:
        _write_outputs(out_dir, run_cfg, exc.partial_report, phi_exact,
                       not ns.no_figures)
        print(f"{name} (noise {level:.0%}): solver failure: {exc.cause}",
              file=sys.stderr)
        return EXIT_SOLVER
    _write_outputs(out_dir, run_cfg, report, phi_exact, not ns.no_figures)
    print(f"{name} noise={level:.0%}: {report.stop_reason} after "
          f"{report.iterations} iterations, mismatch={report.mismatch_count}")
    return (EXIT_ITERATION_CAP
            if report.stop_reason == optimizer.STOP_ITERATION_CAP else EXIT_OK)


def _example_config(example) -> dict:
    cfg = cfgmod.default_config()
    cfg["grid"]["dim"] = example.grid.dim
    cfg["source"]["kind"] = example.source.kind
    cfg["source"]["j1"] = example.source.j1
    cfg["material"].update(a1=example.curve.a1, b1=example.curve.b1,
                           c1=example.curve.c1, d1=example.curve.d1,
                           v_air=example.curve.v_air)
    cfg["phantom"]["shapes"] = cfgmod.shapes_to_json(example.phantom)
    cfg["pcls"].update(sigma=example.pcls.sigma, alpha=example.pcls.alpha,
                       osci_max=example.pcls.osci_max,
                       max_outer_iters=example.pcls.max_outer_iters,
                       phi0=example.pcls.phi0, phi0_seed=example.pcls.phi0_seed)
    cfgmod.validate_config(cfg)
    return cfg


_COMMANDS = {
    "generate": cmd_generate,
    "reconstruct": cmd_reconstruct,
    "gradcheck": cmd_gradcheck,
    "compare": cmd_compare,
    "examples": cmd_examples,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ParseError, InvalidArgumentError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _SolverStage as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_SOLVER
    except (NewtonFailureError, SolverFailureError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
