"""
Bipolar Euler-Poisson spectral lab - command-line front door

Subcommands:
    verify-symbols   eigenvalue, propagator, determinant and semigroup checks
    linear-decay     whole-space decay rates by radial quadrature
    simulate         nonlinear pseudospectral run from a JSON config

Exit codes: 0 all checks passed, 1 numerical or check failure, 2 usage,
validation or I/O error. Every run writes manifest.json to its output folder.
"""

import argparse
import json
import logging
import os
import sys
import time
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from config.settings import (
    APP_NAME,
    APP_VERSION,
    FORM_EQUIVALENCE_TOL,
    LOG_LEVEL,
    OUTPUT_DIR,
    QUADRATURE_TOL,
    VERIFY_EIGEN_TOL,
    VERIFY_IDENTITY_TOL,
    VERIFY_ORACLE_TOL,
    VERIFY_R_RANGE,
    VERIFY_SAMPLES,
    VERIFY_SEED,
    VERIFY_SEMIGROUP_TRIPLES,
    VERIFY_TIMES,
)
from utils.decay_lab import lemma_report
from utils.errors import SimulationError, SpectralLabError
from utils.export import RunManifest, norm_table_frame, write_csv, write_json
from utils.nonlinear_solver import SimConfig, energy_M, simulate, snapshot_deviations
from utils.oracle import ode_propagator
from utils.propagators import SymbolKind, eigenvalues, propagator_matrices

logger = logging.getLogger(APP_NAME)

KINDS = (SymbolKind.EULER_DAMPED, SymbolKind.EULER_POISSON_DAMPED)


# ---------------------------------------------------------------------------
# verify-symbols
# ---------------------------------------------------------------------------

def _physical_det(kind: SymbolKind, r: float) -> float:
    return r ** 2 if kind is SymbolKind.EULER_DAMPED else r ** 2 + 2.0


def _check(errors: List[float], tolerance: float) -> Dict:
    worst = float(max(errors)) if errors else 0.0
    return {"max_error": worst, "tolerance": tolerance, "passed": bool(worst <= tolerance)}


def run_symbol_checks(samples: int, times: List[float], poisson_sign: float = 1.0) -> Dict:
    """
    Verification suite for both linear blocks

    The closed forms are built with `poisson_sign`; the references (characteristic
    polynomial coefficients and the RK4 oracle) always use the physical sign.

    Returns:
        Report dict with per-check results, the propagator comparisons and an overall flag
    """
    radii = np.geomspace(VERIFY_R_RANGE[0], VERIFY_R_RANGE[1], samples)

    eigen_errors = []
    for kind in KINDS:
        for r in radii:
            pair = eigenvalues(kind, r, poisson_sign)
            det = _physical_det(kind, r)
            scale = max(1.0, abs(pair.plus) + abs(pair.minus))
            eigen_errors.append(abs(pair.plus + pair.minus + 1.0) / scale)
            eigen_errors.append(abs(pair.plus * pair.minus - det) / max(1.0, det))

    comparisons, oracle_errors, det_errors = [], [], []
    for t in times:
        errs = {}
        for kind in KINDS:
            closed = propagator_matrices(kind, radii, t, poisson_sign)
            reference = ode_propagator(kind, radii, t)
            scale = np.max(np.abs(reference), axis=(1, 2))
            errs[kind] = np.max(np.abs(closed - reference), axis=(1, 2)) / scale
            det_errors.extend(np.abs(np.linalg.det(closed) - np.exp(-t)).tolist())
        for i, r in enumerate(radii):
            e_err = float(errs[SymbolKind.EULER_DAMPED][i])
            p_err = float(errs[SymbolKind.EULER_POISSON_DAMPED][i])
            comparisons.append({"r": float(r), "t": float(t), "euler_err": e_err, "ep_err": p_err})
            oracle_errors.extend([e_err, p_err])

    rng = np.random.default_rng(VERIFY_SEED)
    semigroup_errors = []
    for kind in KINDS:
        r = np.exp(rng.uniform(np.log(VERIFY_R_RANGE[0]), np.log(VERIFY_R_RANGE[1]), VERIFY_SEMIGROUP_TRIPLES))
        t = rng.uniform(0.0, 5.0, VERIFY_SEMIGROUP_TRIPLES)
        s = rng.uniform(0.0, 5.0, VERIFY_SEMIGROUP_TRIPLES)
        for ri, ti, si in zip(r, t, s):
            joint = propagator_matrices(kind, np.array([ri]), ti + si, poisson_sign)[0]
            split = (
                propagator_matrices(kind, np.array([ri]), ti, poisson_sign)[0]
                @ propagator_matrices(kind, np.array([ri]), si, poisson_sign)[0]
            )
            semigroup_errors.append(float(np.max(np.abs(joint - split)) / max(1.0, np.max(np.abs(joint)))))

    checks = {
        "eigenvalues": _check(eigen_errors, VERIFY_EIGEN_TOL),
        "oracle": _check(oracle_errors, VERIFY_ORACLE_TOL),
        "determinant": _check(det_errors, VERIFY_IDENTITY_TOL),
        "semigroup": _check(semigroup_errors, VERIFY_IDENTITY_TOL),
    }
    passed = all(c["passed"] for c in checks.values())
    for name, result in checks.items():
        level = logging.INFO if result["passed"] else logging.WARNING
        logger.log(level, f"{name}: max error {result['max_error']:.3e} (tolerance {result['tolerance']:.0e})")
    return {"checks": checks, "comparisons": comparisons, "passed": passed}


def cmd_verify_symbols(args: argparse.Namespace, out_dir: str, manifest: RunManifest) -> int:
    poisson_sign = -1.0 if args.inject_fault == "sign-flip" else 1.0
    if poisson_sign < 0:
        logger.warning("Fault injection active: Poisson coupling sign flipped in the closed forms")
    report = run_symbol_checks(args.samples, args.times, poisson_sign)
    manifest.seed = VERIFY_SEED

    manifest.record_output(write_csv(pd.DataFrame(report["comparisons"]), os.path.join(out_dir, "comparisons.csv")))
    manifest.record_output(write_json(report, os.path.join(out_dir, "verify_report.json")))
    return 0 if report["passed"] else 1


# ---------------------------------------------------------------------------
# linear-decay
# ---------------------------------------------------------------------------

def cmd_linear_decay(args: argparse.Namespace, out_dir: str, manifest: RunManifest) -> int:
    report = lemma_report(SymbolKind(args.kind), args.k, args.amplitude, args.sigma, args.tol)
    manifest.record_output(write_csv(report.series, os.path.join(out_dir, "decay_series.csv")))
    manifest.record_output(write_json(report.summary(), os.path.join(out_dir, "decay_summary.json")))
    for row in report.fits.itertuples():
        logger.info(f"{row.component}: fitted {row.fitted:.4f}, predicted {row.predicted:.4f}")
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def load_config(path: str) -> SimConfig:
    with open(path, "r") as f:
        return SimConfig.model_validate(json.load(f))


def cmd_simulate(args: argparse.Namespace, out_dir: str, manifest: RunManifest) -> int:
    config = load_config(args.config)
    forms = ["primitive", "sumdiff"] if args.form == "both" else [args.form or config.form]
    manifest.config.update({"simulation": config.model_dump(mode="json")})
    manifest.seed = config.initial.seed

    runs = {}
    for form in forms:
        runs[form] = simulate(config.model_copy(update={"form": form}))

    main_form = "sumdiff" if "sumdiff" in runs else forms[0]
    trajectory = runs[main_form]
    frame = norm_table_frame(trajectory, energy_M(trajectory))

    exit_code = 0
    if len(runs) == 2:
        deviations = snapshot_deviations(runs["primitive"], runs["sumdiff"])
        frame["form_deviation"] = deviations
        worst = float(np.max(deviations))
        logger.info(f"Form equivalence: max relative deviation {worst:.3e}")
        if worst > FORM_EQUIVALENCE_TOL:
            logger.warning(f"Form deviation {worst:.3e} exceeds {FORM_EQUIVALENCE_TOL:.0e}")
            exit_code = 1

    manifest.record_output(write_csv(frame, os.path.join(out_dir, "trajectory.csv")))
    return exit_code


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

COMMANDS = {
    "verify-symbols": cmd_verify_symbols,
    "linear-decay": cmd_linear_decay,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=APP_NAME, description="Spectral lab for the damped bipolar Euler-Poisson system")
    parser.add_argument("--version", action="version", version=f"%(prog)s {APP_VERSION}")
    parser.add_argument("--out", default=OUTPUT_DIR, help="Output root; each subcommand writes to a subfolder")
    parser.add_argument("--log-level", default=LOG_LEVEL, choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify-symbols", help="Check eigenvalues and Green matrices against references")
    verify.add_argument("--samples", type=int, default=VERIFY_SAMPLES, help="Log-spaced radii per time")
    verify.add_argument("--times", type=float, nargs="+", default=list(VERIFY_TIMES))
    verify.add_argument("--inject-fault", choices=["sign-flip"], default=None, help=argparse.SUPPRESS)

    decay = sub.add_parser("linear-decay", help="Fit whole-space linear decay exponents")
    decay.add_argument("--kind", choices=[k.value for k in KINDS], default=SymbolKind.EULER_DAMPED.value)
    decay.add_argument("--k", type=int, choices=[0, 1], default=0, help="Derivative order")
    decay.add_argument("--amplitude", type=float, default=1.0, help="Gaussian amplitude")
    decay.add_argument("--sigma", type=float, default=1.0, help="Gaussian width")
    decay.add_argument("--tol", type=float, default=QUADRATURE_TOL, help="Relative quadrature tolerance")

    sim = sub.add_parser("simulate", help="Run the nonlinear solver from a JSON config")
    sim.add_argument("config", help="Path to a simulation config (JSON)")
    sim.add_argument("--form", choices=["primitive", "sumdiff", "both"], default=None)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    out_dir = os.path.join(args.out, args.command)
    echo = {k: v for k, v in vars(args).items() if k not in ("out", "log_level")}
    manifest = RunManifest(subcommand=args.command, config=echo)
    started = time.perf_counter()
    exit_code, error = 2, None

    try:
        if getattr(args, "samples", 1) < 1:
            raise ValueError("--samples must be at least 1")
        exit_code = COMMANDS[args.command](args, out_dir, manifest)
    except SimulationError as e:
        exit_code, error = 1, f"SimulationError at t={e.t:.6g}: {e}"
    except SpectralLabError as e:
        exit_code, error = 1, f"{type(e).__name__}: {e}"
    except (ValidationError, ValueError, OSError, json.JSONDecodeError) as e:
        exit_code, error = 2, f"{type(e).__name__}: {e}"
    finally:
        manifest.finish(exit_code, time.perf_counter() - started, error)
        manifest.write(out_dir)

    if error:
        logger.error(error)
    logger.info(f"{args.command} finished with exit code {exit_code}")
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
