"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Run alone with ``python3 -m pytest tests/test_acceptance.py -v -s`` (about
fifteen minutes on one core, dominated by the SWAP optimizations and the
Hessian sweep).  The optimized controls are computed once per session and
shared by the SWAP, Hessian and spectrum checks.
"""
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rel_diff, report_criterion
from qudit_control import _kernels, load_config
from qudit_control.adjoint import compute_gradient
from qudit_control.analysis import (
    fd_gradient,
    forward_sensitivity_gradient,
    hessian_probe,
    pulse_spectrum,
    transition_frequencies,
)
from qudit_control.config import build_problem, optimizer_config
from qudit_control.controls import CarrierSet, ControlParameterization, SplineGrid
from qudit_control.integrator import StepState, TimeGrid, _kernel_args, initial_state, propagate, round_trip_error
from qudit_control.model import QuditHamiltonian, QuditModel, assemble_K_S
from qudit_control.optimizer import OptimizerConfig, initial_guess, optimize

SEEDS = (0, 1, 2)


# -- 1-4: gradient, integrator, reversibility, reconstruction ----------------


def test_criterion_01_gradient_exactness(small_problem, small_alpha):
    p = small_problem
    assert (p.model.N, p.model.E, p.controls.n_carriers, p.controls.grid.D1, p.grid.M) == (4, 2, 2, 6, 200)
    t0 = time.perf_counter()
    g = p.gradient(small_alpha)
    r_fs = rel_diff(g, forward_sensitivity_gradient(p, small_alpha))
    r_fd = rel_diff(g, fd_gradient(p, small_alpha, 1e-6))
    dt = time.perf_counter() - t0
    ok = r_fs <= 1e-10 and r_fd <= 1e-6 and dt < 10
    report_criterion(1, ok, f"adjoint vs sensitivity {r_fs:.2e} (<=1e-10), vs FD {r_fd:.2e} (<=1e-6), {dt:.2f} s")
    assert ok


class _Diagonal:
    def __init__(self, gammas):
        self.K = np.diag(gammas)
        self.S = np.zeros_like(self.K)

    def assemble(self, t):
        return self.K, self.S


def test_criterion_02_integrator_order():
    gammas = np.array([0.0, -1.38, -4.14, 2.5])
    T = 10.0
    t0 = time.perf_counter()
    errs = []
    for M in (200, 400, 800):
        fin = propagate(_Diagonal(gammas), TimeGrid(T, M), initial_state(4, 4))
        errs.append(np.max(np.abs(fin.psi - np.diag(np.exp(-1j * gammas * T)))))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    dt = time.perf_counter() - t0
    ok = all(1.9 <= q <= 2.1 for q in orders) and dt < 5
    report_criterion(2, ok, f"observed orders {orders[0]:.4f}, {orders[1]:.4f} (in [1.9, 2.1]), {dt:.2f} s")
    assert ok


def test_criterion_03_reversibility():
    cfg = load_config("builtin:cnot")
    p = build_problem(cfg)
    a = np.random.default_rng(0).uniform(-p.alpha_max, p.alpha_max, p.num_params)
    ham = QuditHamiltonian(p.model, p.controls, a)
    t0 = time.perf_counter()
    err = round_trip_error(ham, TimeGrid(p.grid.T, 10_000))
    dt = time.perf_counter() - t0
    ok = err <= 1e-10 and dt < 10
    report_criterion(3, ok, f"10^4 steps forward and back, max error {err:.2e} (<=1e-10), {dt:.2f} s")
    assert ok


def test_criterion_04_stage_reconstruction(small_problem, small_alpha):
    p = small_problem
    ham = QuditHamiltonian(p.model, p.controls, small_alpha)
    init = initial_state(p.model.N, p.model.E)
    *_, stored = _kernels.forward_sweep(*_kernel_args(ham, p.grid), p.model.weights.copy(), init.u, init.v, True, 0)
    _, _, rebuilt = compute_gradient(p.model, p.controls, small_alpha, p.grid, p.target, store_stages=True)
    err = float(np.max(np.abs(stored - rebuilt)))
    ok = err <= 1e-10
    report_criterion(4, ok, f"reconstructed vs stored stages over {p.grid.M} steps, max diff {err:.2e} (<=1e-10)")
    assert ok


# -- 5-8: optimization runs and diagnostics -----------------------------------


def _run(cfg, seed):
    prob = build_problem(cfg)
    ocfg = optimizer_config(cfg, seed)
    t0 = time.perf_counter()
    res = optimize(prob.value_and_gradient, initial_guess(prob.num_params, ocfg), ocfg)
    return prob, res, time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_05_cnot():
    cfg = load_config("builtin:cnot")
    assert cfg.controls.alpha_max_mhz == 3.0 and cfg.optimizer.max_iter <= 200
    lines, ok, total = [], False, 0.0
    for seed in SEEDS:
        prob, res, dt = _run(cfg, seed)
        total += dt
        b = res.breakdown
        forbidden = float(b.max_guard_population[-1])
        hit = b.J1h <= 5e-4 and b.J2h <= 2e-4 and forbidden <= 1e-5
        lines.append(
            f"seed {seed}: {res.status} after {res.iterations} it, J1h {b.J1h:.2e}, J2h {b.J2h:.2e}, "
            f"forbidden pop {forbidden:.2e}"
        )
        if hit:
            ok = True
            break
    report_criterion(5, ok, "; ".join(lines) + f" ({total:.0f} s; need J1h<=5e-4, J2h<=2e-4, pop<=1e-5 on one seed)")
    assert ok


@pytest.fixture(scope="module")
def swap3_runs():
    cfg = load_config("builtin:swap3")
    return cfg, [_run(cfg, seed) for seed in SEEDS]


@pytest.fixture(scope="module")
def swap3_optimum(swap3_runs):
    """Lowest-objective locally optimal point among the criterion-6 runs."""
    cfg, runs = swap3_runs
    prob, res, _ = min(runs, key=lambda r: (not r[1].converged, r[1].value))
    return cfg, prob, res


@pytest.mark.slow
def test_criterion_06_swap3(swap3_runs):
    cfg, runs = swap3_runs
    prob = runs[0][0]
    assert prob.num_params == 60 and prob.grid.T == 140.0 and cfg.controls.control_limit_mhz == 9.0
    lines, ok = [], False
    for seed, (_, res, dt) in zip(SEEDS, runs):
        b = res.breakdown
        guard = float(b.max_guard_population.max())
        at_bound = int(np.sum(np.abs(res.alpha) >= prob.alpha_max * (1 - 1e-12)))
        ok |= b.J1h <= 1e-4 and guard <= 5e-3 and res.iterations <= 250
        lines.append(
            f"seed {seed}: {res.status} after {res.iterations} it, J1h {b.J1h:.2e}, guard pop {guard:.2e}, "
            f"{at_bound}/60 at bound, {dt:.0f} s"
        )
    report_criterion(6, ok, "; ".join(lines) + " (need J1h<=1e-4 and guard pop<=5e-3 on one seed)")
    assert ok


@pytest.mark.slow
def test_criterion_07_hessian_probe(swap3_optimum):
    cfg, prob, res = swap3_optimum
    ratios = {}
    probe = None
    for eps in (1e-4, 1e-5, 1e-6, 1e-7):
        H = hessian_probe(prob, res.alpha, eps)
        ratios[eps] = H.asymmetry_ratio
        if eps == 1e-6:
            probe = H
    eps_list = list(ratios)
    best = int(np.argmin([ratios[e] for e in eps_list]))
    interior = 0 < best < len(eps_list) - 1
    w = probe.eigenvalues
    cluster = float(w[:15].mean() / np.abs(w[15:]).mean())
    ok = ratios[1e-6] <= 1e-7 and interior and cluster >= 10 and res.converged
    sweep = ", ".join(f"{e:.0e}: {r:.2e}" for e, r in ratios.items())
    report_criterion(
        7,
        ok,
        f"at {res.status} point (pg {res.pg_norm:.1e}): |Ls|={probe.norm_symmetric:.3e}, ratio by eps {sweep}; "
        f"minimum at {eps_list[best]:.0e}; top-15 mean / mean|rest| = {cluster:.1f} (>=10)",
    )
    assert ok


@pytest.mark.slow
def test_criterion_08_spectrum(swap3_optimum):
    cfg, prob, res = swap3_optimum
    sp = pulse_spectrum(prob.controls, res.alpha, prob.model.omega_a, cfg.analysis.spectrum_samples)
    fk = transition_frequencies(prob.model.omega_a, prob.model.xi_a, prob.controls.n_carriers)
    peaks = sp.peaks()
    mags = np.interp(peaks, sp.frequencies, sp.magnitudes)
    dist = np.array([np.min(np.abs(fk - f)) / sp.resolution for f in peaks])
    ok = peaks.size > 0 and bool(np.all(dist <= 1.0 + 1e-9))
    strongest = np.argsort(-mags)[: len(fk)]
    report_criterion(
        8,
        ok,
        f"{peaks.size} local maxima above 1% of max; {int(np.sum(dist <= 1 + 1e-9))} within one bin "
        f"({sp.resolution:.4f} GHz) of f_k={np.round(fk, 4).tolist()}; worst {dist.max():.1f} bins; "
        f"strongest {len(fk)} at {np.round(peaks[strongest], 4).tolist()} GHz "
        f"({np.round(dist[strongest], 2).tolist()} bins)",
    )
    assert ok


# -- 9: invariants --------------------------------------------------------------

_checked = {"unity": 0.0, "sym": 0, "phase": 0.0, "feasible": True, "parseval": 0.0}


@settings(max_examples=100, deadline=None)
@given(D1=st.integers(3, 30), T=st.floats(1.0, 400.0), s=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=20))
def _partition_of_unity(D1, T, s):
    err = float(np.max(np.abs(SplineGrid(D1, T).basis(np.array(s) * T).sum(axis=-1) - 1.0)))
    _checked["unity"] = max(_checked["unity"], err)
    assert err <= 1e-14


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), t=st.floats(0.0, 1.0))
def _symmetry_classes(seed, t):
    rng = np.random.default_rng(seed)
    m = QuditModel(6, 4, 25.8, 1.38)
    c = ControlParameterization(SplineGrid(10, 100.0), CarrierSet((0.0, -1.38, -2.76)))
    K, S = assemble_K_S(t * 100.0, m, c, rng.normal(size=c.num_params))
    bad = int(np.count_nonzero(K - K.T) + np.count_nonzero(S + S.T))
    _checked["sym"] += bad
    assert bad == 0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), theta=st.floats(0.0, 2 * math.pi))
def _phase_invariance(problem, seed, theta):
    a = np.random.default_rng(seed).uniform(-0.05, 0.05, problem.num_params)
    from qudit_control.objective import evaluate_objective

    j = evaluate_objective(problem.model, problem.controls, a, problem.grid, problem.target).J1h
    jt = evaluate_objective(problem.model, problem.controls, a, problem.grid, problem.target.phased(theta)).J1h
    _checked["phase"] = max(_checked["phase"], abs(j - jt))
    assert abs(j - jt) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def _feasibility(problem, seed):
    amax = 0.03
    cfg = OptimizerConfig(alpha_max=amax, max_iter=8, seed=seed, init_amplitude=0.05)
    seen = []
    optimize(problem.value_and_gradient, initial_guess(problem.num_params, cfg), cfg, callback=lambda k, x, f: seen.append(x))
    ok = all(np.all(np.abs(x) <= amax) for x in seen)
    _checked["feasible"] &= ok
    assert ok


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), logn=st.integers(12, 15))
def _parseval(seed, logn):
    c = ControlParameterization(SplineGrid(10, 140.0), CarrierSet((0.0, -1.38, -2.76)))
    a = np.random.default_rng(seed).uniform(-0.02, 0.02, c.num_params)
    err = pulse_spectrum(c, a, 2 * math.pi * 4.8, 1 << logn).parseval_error()
    _checked["parseval"] = max(_checked["parseval"], err)
    assert err <= 1e-10


def test_criterion_09_invariants(small_problem):
    failures = []
    for name, fn in [
        ("partition of unity", _partition_of_unity),
        ("K/S symmetry", _symmetry_classes),
        ("phase invariance", lambda: _phase_invariance(small_problem)),
        ("box feasibility", lambda: _feasibility(small_problem)),
        ("Parseval", _parseval),
    ]:
        try:
            fn()
        except AssertionError:
            failures.append(name)
    c = _checked
    ok = not failures
    report_criterion(
        9,
        ok,
        f"partition of unity {c['unity']:.1e} (<=1e-14), K/S asymmetric entries {c['sym']}, "
        f"phase {c['phase']:.1e} (<=1e-12), iterates feasible {c['feasible']}, Parseval {c['parseval']:.1e} (<=1e-10)"
        + (f"; failed: {failures}" if failures else ""),
    )
    assert ok


# -- 10: time-step estimate -------------------------------------------------------


def test_criterion_10_timestep():
    M = build_problem(load_config("builtin:cnot")).grid.M
    dev = M / 8796 - 1
    ok = abs(dev) <= 0.02
    report_criterion(10, ok, f"CNOT configuration gives M = {M} ({dev:+.2%} from 8796, tolerance 2%)")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v", "-s"]))
