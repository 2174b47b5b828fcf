"""Command-line entry points: validate | run | resume | analyze | steady-check.

Exit codes: 0 success, 1 validation failure (bad config or inadmissible
coefficients), 2 runtime error.  Every failure prints a single
machine-parsable line "error: <category>: <reason>" to stderr first.

ELS2_THREADS, when set, caps the linear-algebra thread pools; it must take
effect before numpy loads, so the heavy modules are imported lazily inside
main().
"""

from __future__ import annotations

import argparse
import os
import sys


def _apply_thread_cap() -> None:
    cap = os.environ.get("ELS2_THREADS")
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, cap)


def _fail(category: str, message: str, code: int) -> int:
    first_line = str(message).splitlines()[0] if str(message) else "unknown"
    print(f"error: {category}: {first_line}", file=sys.stderr)
    rest = str(message).splitlines()[1:]
    for line in rest:
        print(f"  {line}", file=sys.stderr)
    return code


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="els2",
        description="Nematic liquid-crystal flow on the unit sphere: "
                    "spectral solver and long-time diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check Leslie coefficients and print derived constants")
    p.add_argument("config", help="config file (only the mu keys are required)")

    p = sub.add_parser("run", help="integrate a configured problem")
    p.add_argument("config")

    p = sub.add_parser("resume", help="continue a run from a checkpoint")
    p.add_argument("config")
    p.add_argument("--checkpoint", default=None,
                   help="checkpoint path (default: <output_dir>/checkpoint.els2)")

    p = sub.add_parser("analyze", help="summarize a diagnostics CSV")
    p.add_argument("csv")
    p.add_argument("--eps0", type=float, default=0.3)
    p.add_argument("--e-ref", type=float, default=None,
                   help="reference energy of the limit map (default: final E)")
    p.add_argument("--out", default=None, help="output directory (default: CSV directory)")

    p = sub.add_parser("steady-check",
                       help="report residual and one-step drift of a named harmonic map")
    p.add_argument("config")
    p.add_argument("--map", dest="map_name", default="identity",
                   choices=("identity", "antipodal", "constant"))
    p.add_argument("--checkpoint", default=None, help="load the state instead")
    p.add_argument("--dt", type=float, default=1e-3)
    return parser


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------


def _cmd_validate(args) -> int:
    from .config import parse_mu_config
    from .leslie import derived_constants, validate_coefficients

    with open(args.config, "r", encoding="utf-8") as fh:
        mus = parse_mu_config(fh.read())
    report = validate_coefficients(*mus)
    print(report.summary())
    if not report.weak_ok:
        print("coefficients are not admissible")
        return 1
    co = derived_constants(*mus)
    print(f"lambda1 = {co.lambda1:.17g}")
    print(f"lambda2 = {co.lambda2:.17g}")
    print(f"Delta0 = {co.delta0:.17g}")
    print(f"gamma1 = {co.gamma1:.17g}")
    print(f"alpha0 = {co.alpha0:.17g}")
    return 0


def _run_common(cfg, state0, append_csv: bool) -> int:
    """Shared driver for run/resume: CSV streaming, checkpoints, metadata."""
    from . import analysis, dynamics, io

    os.makedirs(cfg.output_dir, exist_ok=True)
    csv_path = os.path.join(cfg.output_dir, "diagnostics.csv")
    ckpt_path = os.path.join(cfg.output_dir, "checkpoint.els2")

    with io.OutputLock(cfg.output_dir):
        mode = "a" if (append_csv and os.path.exists(csv_path)) else "w"
        with open(csv_path, mode, encoding="utf-8", newline="") as csv_stream:
            if mode == "w":
                io.write_diagnostics_header(csv_stream)

            def on_report(report, step_report, state):
                io.write_diagnostics_row(
                    report, csv_stream,
                    dt=step_report.dt,
                    energy_residual=step_report.energy_residual,
                )
                csv_stream.flush()
                io.write_checkpoint(state, ckpt_path)

            traj = dynamics.run(cfg, state0=state0, on_report=on_report)

        if traj.final_state is not None:
            io.write_checkpoint(traj.final_state, ckpt_path)

        meta_lines = [
            f"stop_reason: {traj.stop_reason}",
            f"t_final: {traj.times[-1]:.17g}" if traj.times else "t_final: nan",
            f"reports: {len(traj.reports)}",
            f"steps: {len(traj.step_dts)}",
            f"smallness_t0: {traj.smallness_t0}",
        ]
        if traj.stop_reason == "converged":
            result = analysis.convergence_detect(traj, cfg.conv_tol, cfg.eps0)
            if result is not None:
                meta_lines += [
                    f"converged_at: {result.fired_at:.17g}",
                    f"M0: {result.m0}",
                    f"quant_residual: {result.quant_residual:.6g}",
                ]
                if result.fit_u_d is not None:
                    meta_lines += [
                        f"C1: {result.fit_u_d.c1:.6g}",
                        f"C2: {result.fit_u_d.c2:.6g}",
                        f"rms_log_residual: {result.fit_u_d.rms_log_residual:.6g}",
                    ]
        with open(os.path.join(cfg.output_dir, "run_meta.txt"), "w",
                  encoding="utf-8") as fh:
            fh.write("\n".join(meta_lines) + "\n")

    for line in meta_lines:
        print(line)
    if traj.stop_reason == "degeneracy":
        return _fail("runtime", "director degeneracy halted the run "
                                f"(state snapshot in {ckpt_path})", 2)
    return 0


def _cmd_run(args) -> int:
    from .config import parse_config
    from .leslie import validate_coefficients

    with open(args.config, "r", encoding="utf-8") as fh:
        cfg = parse_config(fh.read())
    report = validate_coefficients(*cfg.mus)
    if not report.weak_ok:
        return _fail("coefficients",
                     "inadmissible Leslie coefficients\n" + report.summary(), 1)
    return _run_common(cfg, state0=None, append_csv=False)


def _cmd_resume(args) -> int:
    from .config import parse_config
    from .dynamics import build_grid
    from .io import read_checkpoint
    from .leslie import validate_coefficients

    with open(args.config, "r", encoding="utf-8") as fh:
        cfg = parse_config(fh.read())
    report = validate_coefficients(*cfg.mus)
    if not report.weak_ok:
        return _fail("coefficients",
                     "inadmissible Leslie coefficients\n" + report.summary(), 1)
    ckpt = args.checkpoint or os.path.join(cfg.output_dir, "checkpoint.els2")
    grid = build_grid(cfg.lmax)
    state0 = read_checkpoint(ckpt, grid)
    return _run_common(cfg, state0=state0, append_csv=True)


def _cmd_analyze(args) -> int:
    from .analysis import analyze_series
    from .io import read_diagnostics

    data = read_diagnostics(args.csv)
    if data["t"].size == 0:
        return _fail("io", f"no rows in {args.csv}", 2)
    summary = analyze_series(data, eps0=args.eps0, e_ref=args.e_ref)

    out_dir = args.out or (os.path.dirname(os.path.abspath(args.csv)))
    os.makedirs(out_dir, exist_ok=True)
    lines = [f"{key}: {value}" for key, value in summary.items()]
    with open(os.path.join(out_dir, "analysis_summary.txt"), "w",
              encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

    if summary.get("C2_u") is not None:
        import numpy as np

        t = data["t"]
        y = np.sqrt(2.0 * data["KE"])
        fit = summary["C1_u"] * np.exp(-summary["C2_u"] * t)
        with open(os.path.join(out_dir, "decay_fit.csv"), "w",
                  encoding="utf-8", newline="") as fh:
            fh.write("t,u_norm,u_fit\n")
            for k in range(t.size):
                fh.write(f"{t[k]:.17g},{y[k]:.17g},{fit[k]:.17g}\n")

    for line in lines:
        print(line)
    return 0


def _cmd_steady_check(args) -> int:
    import numpy as np

    from .config import parse_config
    from .dynamics import step
    from .energy import degree, dirichlet_energy, harmonic_residual
    from .fields import DirectorField, State, initial_state
    from .io import read_checkpoint
    from .leslie import derived_constants
    from .sphere import ScalarField, build_grid

    with open(args.config, "r", encoding="utf-8") as fh:
        cfg = parse_config(fh.read())
    co = derived_constants(*cfg.mus)
    grid = build_grid(cfg.lmax)

    if args.checkpoint:
        state = read_checkpoint(args.checkpoint, grid)
        label = args.checkpoint
    else:
        if args.map_name == "identity":
            d = DirectorField(grid, grid.nodes.copy())
        elif args.map_name == "antipodal":
            d = DirectorField(grid, -grid.nodes.copy())
        else:
            state0 = initial_state("constant-director", {}, grid)
            d = state0.d
        state = State(0.0, ScalarField(grid, np.zeros(grid.shape)), d)
        label = args.map_name

    resid = harmonic_residual(state.d)
    deg, raw = degree(state.d)
    energy0 = dirichlet_energy(state.d)
    new_state, rep = step(state, co, args.dt)
    d_drift = np.sqrt(grid.integrate(np.einsum(
        "jka,jka->jk", new_state.d.values - state.d.values,
        new_state.d.values - state.d.values)))
    u = grid.rot_values(new_state.psi.values)
    u_norm = np.sqrt(grid.integrate(np.einsum("jki,jki->jk", u, u)))

    print(f"map: {label}")
    print(f"Lmax: {cfg.lmax}")
    print(f"energy: {energy0:.17g}")
    print(f"degree: {deg} (raw {raw:.12g})")
    print(f"harmonic_residual: {resid:.6g}")
    print(f"one_step_dt: {args.dt:.6g}")
    print(f"director_drift: {d_drift:.6g}")
    print(f"velocity_norm_after: {u_norm:.6g}")
    print(f"energy_residual: {rep.energy_residual:.6g}")
    return 0


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = _build_parser()
    args = parser.parse_args(argv)

    from .errors import (BlowupError, CheckpointError, ConfigError,
                         InvalidCoefficientsError)

    handlers = {
        "validate": _cmd_validate,
        "run": _cmd_run,
        "resume": _cmd_resume,
        "analyze": _cmd_analyze,
        "steady-check": _cmd_steady_check,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as err:
        return _fail("config", str(err), 1)
    except InvalidCoefficientsError as err:
        return _fail("coefficients", str(err), 1)
    except FileNotFoundError as err:
        return _fail("io", str(err), 2)
    except CheckpointError as err:
        return _fail("io", str(err), 2)
    except (IOError, OSError) as err:
        return _fail("io", str(err), 2)
    except BlowupError as err:
        return _fail("runtime", str(err), 2)
    except Exception as err:  # pragma: no cover - last-resort guard
        return _fail("runtime", f"{type(err).__name__}: {err}", 2)


if __name__ == "__main__":
    sys.exit(main())
