"""Command-line runner.

    nmrqec run <config> [--out results.csv] [--threads N]
    nmrqec grape <config> [--out pulse.txt]

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

import argparse
import logging
import sys

import numpy as np

from . import grape
from .code import build_code_circuit
from .config import ConfigError, GrapeSpec, load_config
from .sweep import dominant_syndrome, fit_quadratic, format_csv, gnuplot_script, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2

log = logging.getLogger("nmrqec")


def _grape_target(name, swap_ancillae=False):
    circuit = build_code_circuit(swap_ancillae)
    return {
        "encode": circuit.u_encode,
        "decode": circuit.u_decode,
        "correct": circuit.u_correct,
        "identity": np.eye(8, dtype=complex),
    }[name]


def cmd_run(args):
    cfg = load_config(args.config)
    rows = run_sweep(cfg, threads=args.threads)
    text = format_csv(rows)
    out = args.out or cfg.csv
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    report = sys.stderr if not out else sys.stdout
    fits = []
    if cfg.fit and len(cfg.delays_ms) >= 3:
        for mode in cfg.modes:
            fit = fit_quadratic(rows, mode)
            fits.append(fit)
            c0, c1, c2 = fit.coefficients
            print(f"fit {mode}: F_e = {c0:.6g} + {c1:.6g} t + {c2:.6g} t^2 (rms residual {fit.rms:.3g})", file=report)
    if "corrected" in cfg.modes:
        print(f"dominant syndrome (corrected): {dominant_syndrome(rows)}", file=report)
    if cfg.gnuplot:
        with open(cfg.gnuplot, "w") as fh:
            fh.write(gnuplot_script(out or "results.csv", cfg.modes, fits))
    return EXIT_OK


def cmd_grape(args):
    cfg = load_config(args.config)
    spec = cfg.grape or GrapeSpec()
    target = _grape_target(spec.target, cfg.swap_ancillae)
    ensemble = grape.RobustnessEnsemble.grid(spec.offset_width_khz, spec.n_offsets, spec.rf_scales)
    if spec.initial == "smooth":
        initial = grape.ControlPulse.smooth_guess(
            spec.n_slices, spec.duration_ms, spec.initial_amplitude_khz, spec.max_amplitude_khz
        )
    elif spec.initial == "zero":
        initial = grape.ControlPulse.zeros(spec.n_slices, spec.duration_ms, spec.max_amplitude_khz)
    else:
        try:
            initial = grape.ControlPulse.load(spec.initial)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load initial pulse: {exc}", key="initial") from None
    settings = grape.GrapeSettings(
        max_iter=spec.max_iter,
        target_fidelity=spec.target_fidelity,
        time_budget_s=spec.time_budget_s,
        direction=spec.direction,
    )

    def progress(it, fid):
        if it % 25 == 0:
            log.info("iteration %d: mean fidelity %.6f", it, fid)

    result = grape.optimize_multilevel(
        initial, cfg.system, target, ensemble, settings, spec.coarse_slices, callback=progress
    )
    if not np.isfinite(result.fidelity):
        raise FloatingPointError("optimizer produced a non-finite fidelity")
    out = args.out or spec.pulse_out or "pulse.txt"
    result.pulse.save(out)
    print(f"status: {result.status}")
    print(f"iterations: {result.iterations}")
    print(f"mean fidelity: {result.fidelity:.6f}")
    print(f"pulse written to {out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="nmrqec", description="Phase-code QEC simulator and GRAPE pulse design.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a delay sweep and write CSV")
    run.add_argument("config")
    run.add_argument("--out", help="CSV path (default: [output] csv, else stdout)")
    run.add_argument("--threads", type=int, default=1, help="worker threads for sweep points")
    run.set_defaults(func=cmd_run)
    gr = sub.add_parser("grape", help="optimize a control pulse")
    gr.add_argument("config")
    gr.add_argument("--out", help="pulse file path")
    gr.add_argument("--threads", type=int, default=1, help="accepted for symmetry; the optimizer is sequential")
    gr.set_defaults(func=cmd_grape)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
