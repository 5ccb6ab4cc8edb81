"""Command-line workflows: simulate, optimize, verify, probe, spectrum.

Run as ``python -m qudit_control <command> --config PATH|builtin:NAME``.

Exit status: 0 success, 1 usage or configuration error, 2 a numerical
check failed, 3 the optimizer stopped without converging (results are
still written).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .config import ConfigError, RunConfig, build_problem, load_config, optimizer_config
from .controls import peak_amplitudes
from .integrator import round_trip_error
from .model import QuditHamiltonian
from .optimizer import initial_guess, optimize
from .results import LayoutError, load_alpha, save_alpha, write_csv, write_json

EXIT_OK, EXIT_CONFIG, EXIT_CHECK, EXIT_NOT_CONVERGED = 0, 1, 2, 3

TWO_PI = 2.0 * math.pi


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out if args.out else cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _alpha(args, cfg, problem, required=False):
    if args.alpha:
        return load_alpha(args.alpha, problem.controls)
    if required:
        raise ConfigError("--alpha", "a parameter file is required for this command")
    return np.zeros(problem.num_params)


def _breakdown_report(problem, alpha, obj) -> dict:
    pmax, qmax = peak_amplitudes(problem.controls, alpha)
    out = obj.to_dict()
    out.update(
        {
            "steps": problem.grid.M,
            "time_step_ns": problem.grid.h,
            "num_params": problem.num_params,
            "p_max_mhz": pmax / TWO_PI * 1e3,
            "q_max_mhz": qmax / TWO_PI * 1e3,
            "alpha_max_rad_per_ns": problem.alpha_max,
        }
    )
    return out


def _write_populations(path, obj, E):
    tr = obj.population_trace
    M, N, _ = tr.shape
    header = ["t_ns"] + [f"pop_level{i}_from{j}" for j in range(E) for i in range(N)]
    rows = ([t] + tr[k].T.ravel().tolist() for k, t in enumerate(obj.trace_times))
    write_csv(path, header, rows)


# -- commands ---------------------------------------------------------------


def run_simulate(cfg: RunConfig, args) -> int:
    problem = build_problem(cfg)
    alpha = _alpha(args, cfg, problem)
    want_trace = "populations" in cfg.output.artifacts
    obj = problem.objective(alpha, trace=want_trace)
    out = _out_dir(args, cfg)
    write_json(out / "breakdown.json", _breakdown_report(problem, alpha, obj))
    if want_trace:
        _write_populations(out / "populations.csv", obj, problem.model.E)
    print(f"J1h={obj.J1h:.6e} J2h={obj.J2h:.6e} steps={problem.grid.M}")
    return EXIT_OK


def run_optimize(cfg: RunConfig, args) -> int:
    problem = build_problem(cfg)
    ocfg = optimizer_config(cfg, args.seed)
    alpha0 = _alpha(args, cfg, problem) if args.alpha else initial_guess(problem.num_params, ocfg)
    res = optimize(problem.value_and_gradient, alpha0, ocfg)
    out = _out_dir(args, cfg)
    arts = cfg.output.artifacts
    obj = problem.objective(res.alpha, trace="populations" in arts)
    if "history" in arts:
        res.history.write_csv(out / "history.csv")
    if "alpha" in arts:
        save_alpha(out / "alpha.json", problem.controls, res.alpha)
    if "breakdown" in arts:
        write_json(out / "breakdown.json", _breakdown_report(problem, res.alpha, obj))
    if "populations" in arts:
        _write_populations(out / "populations.csv", obj, problem.model.E)
    summary = res.summary()
    summary.update({"seed": ocfg.seed, "tol": ocfg.tol, "max_iter": ocfg.max_iter})
    if "summary" in arts:
        write_json(out / "summary.json", summary)
    if "spectrum" in arts:
        _write_spectrum(out, cfg, problem, res.alpha)
    print(
        f"status={res.status} iterations={res.iterations} J1h={obj.J1h:.6e} "
        f"J2h={obj.J2h:.6e} pg={res.pg_norm:.3e}"
    )
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    den = np.maximum(np.abs(a), np.abs(b))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(den > 0, np.abs(a - b) / den, 0.0)
    return float(np.max(r, initial=0.0))


def run_verify(cfg: RunConfig, args) -> int:
    problem = build_problem(cfg)
    if args.alpha:
        alpha = _alpha(args, cfg, problem)
    else:
        ocfg = optimizer_config(cfg, args.seed)
        alpha = initial_guess(problem.num_params, ocfg)
    an = cfg.analysis
    g_adj = problem.gradient(alpha)
    if args.corrupt_gradient:
        g_adj = g_adj.copy()
        g_adj[0] += args.corrupt_gradient * (1.0 + abs(g_adj[0]))
    g_fs = analysis.forward_sensitivity_gradient(problem, alpha)
    g_fd = analysis.fd_gradient(problem, alpha, an.fd_eps)
    ham = QuditHamiltonian(problem.model, problem.controls, alpha)
    rt = round_trip_error(ham, problem.grid)
    checks = {
        "adjoint_vs_sensitivity": (_rel(g_adj, g_fs), an.gradient_rtol_sensitivity),
        "adjoint_vs_fd": (_rel(g_adj, g_fd), an.gradient_rtol_fd),
        "reversibility": (rt, an.reversibility_tol),
    }
    report = {
        "steps": problem.grid.M,
        "num_params": problem.num_params,
        "checks": {k: {"value": v, "tol": t, "pass": bool(v <= t)} for k, (v, t) in checks.items()},
    }
    report["pass"] = all(c["pass"] for c in report["checks"].values())
    out = _out_dir(args, cfg)
    write_json(out / "verify.json", report)
    write_csv(
        out / "gradients.csv",
        ["index", "adjoint", "sensitivity", "finite_difference"],
        ([i, a, s, f] for i, (a, s, f) in enumerate(zip(g_adj, g_fs, g_fd))),
    )
    for k, c in report["checks"].items():
        print(f"{'PASS' if c['pass'] else 'FAIL'} {k}: {c['value']:.3e} (tol {c['tol']:.1e})")
    return EXIT_OK if report["pass"] else EXIT_CHECK


def run_probe(cfg: RunConfig, args) -> int:
    if args.test_quadratic:
        A = np.asarray(json.loads(Path(args.test_quadratic).read_text()), dtype=float)
        grad = lambda a: A @ a  # noqa: E731
        alpha = np.zeros(A.shape[0])
    else:
        problem = build_problem(cfg)
        alpha = _alpha(args, cfg, problem, required=True)
        grad = problem.gradient
    out = _out_dir(args, cfg)
    table, spectra = [], {}
    for eps in cfg.analysis.probe_eps:
        H = analysis.hessian_probe(grad, alpha, eps, workers=args.parallel)
        table.append([eps, H.norm_symmetric, H.norm_antisymmetric, H.asymmetry_ratio])
        spectra[eps] = H.eigenvalues
        if "probe" in cfg.output.artifacts:
            write_json(out / f"probe_eps{eps:.0e}.json", H.to_dict(include_matrix=True))
        print(f"eps={eps:.0e} |Ls|={H.norm_symmetric:.4e} |La|={H.norm_antisymmetric:.4e} ratio={H.asymmetry_ratio:.3e}")
    write_csv(out / "probe_asymmetry.csv", ["eps", "norm_symmetric", "norm_antisymmetric", "ratio"], table)
    eps_list = list(spectra)
    write_csv(
        out / "probe_eigenvalues.csv",
        ["rank"] + [f"eps_{e:.0e}" for e in eps_list],
        ([i] + [spectra[e][i] for e in eps_list] for i in range(len(alpha))),
    )
    return EXIT_OK


def _write_spectrum(out, cfg, problem, alpha):
    sp = analysis.pulse_spectrum(problem.controls, alpha, problem.model.omega_a, cfg.analysis.spectrum_samples)
    write_csv(out / "spectrum.csv", ["frequency_ghz", "magnitude"], sp.rows())
    fk = analysis.transition_frequencies(problem.model.omega_a, problem.model.xi_a, problem.controls.n_carriers)
    peaks = sp.peaks()
    dist = [float(np.min(np.abs(fk - f)) / sp.resolution) for f in peaks]
    info = {
        "resolution_ghz": sp.resolution,
        "transition_frequencies_ghz": fk,
        "peaks_ghz": peaks,
        "peak_distance_bins": dist,
        "all_within_one_bin": bool(all(d <= 1.0 + 1e-9 for d in dist)),
        "parseval_error": sp.parseval_error(),
    }
    write_json(out / "spectrum_peaks.json", info)
    return info


def run_spectrum(cfg: RunConfig, args) -> int:
    problem = build_problem(cfg)
    alpha = _alpha(args, cfg, problem, required=True)
    info = _write_spectrum(_out_dir(args, cfg), cfg, problem, alpha)
    for f, d in zip(info["peaks_ghz"], info["peak_distance_bins"]):
        print(f"peak {f:.5f} GHz  ({d:.2f} bins from nearest transition)")
    return EXIT_OK


COMMANDS = {
    "simulate": run_simulate,
    "optimize": run_optimize,
    "verify": run_verify,
    "probe": run_probe,
    "spectrum": run_spectrum,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qudit_control", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="config file or builtin:NAME")
        p.add_argument("--alpha", help="parameter file (JSON with layout header)")
        p.add_argument("--out", help="output directory (default: from config)")
        p.add_argument("--seed", type=int, help="override optimizer.seed")
        p.add_argument("--parallel", type=int, default=1, help="worker threads for probes")
        if name == "verify":
            p.add_argument("--corrupt-gradient", type=float, default=0.0, help=argparse.SUPPRESS)
        if name == "probe":
            p.add_argument("--test-quadratic", help=argparse.SUPPRESS)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.parallel < 1:
        print("error: --parallel must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, LayoutError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except np.linalg.LinAlgError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
