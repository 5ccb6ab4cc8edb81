import math

import numpy as np
import pytest

from qudit_control import load_config
from qudit_control.config import build_problem
from qudit_control.controls import CarrierSet, ControlParameterization, SplineGrid
from qudit_control.integrator import (
    StepState,
    TimeGrid,
    estimate_timestep,
    initial_state,
    propagate,
    round_trip_error,
    spectral_radius_bound,
    step_forward,
    step_reverse,
)
from qudit_control.model import QuditHamiltonian, QuditModel


class Frozen:
    """Time-independent ``(K, S)``."""

    def __init__(self, K, S=None):
        self.K = np.asarray(K, dtype=float)
        self.S = np.zeros_like(self.K) if S is None else np.asarray(S, dtype=float)
        self.N = self.K.shape[0]

    def assemble(self, t):
        return self.K, self.S


def random_state(rng, N, E):
    return StepState(0, rng.normal(size=(N, E)), rng.normal(size=(N, E)))


def diag_error(gammas, T, M):
    N = len(gammas)
    final = propagate(Frozen(np.diag(gammas)), TimeGrid(T, M), initial_state(N, N))
    exact = np.diag(np.exp(-1j * np.asarray(gammas) * T))
    return np.max(np.abs(final.psi - exact))


def test_second_order_on_diagonal_hamiltonian():
    gammas = [0.0, -1.3, -3.9, 2.2]
    errs = [diag_error(gammas, 5.0, M) for M in (100, 200, 400)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(1.9 <= p <= 2.1 for p in orders), orders


def test_zero_hamiltonian_is_identity():
    rng = np.random.default_rng(0)
    st = random_state(rng, 4, 2)
    H = Frozen(np.zeros((4, 4)))
    g = TimeGrid(3.0, 7)
    out = step_forward(st, g, H)
    np.testing.assert_array_equal(out.u, st.u)
    np.testing.assert_array_equal(out.v, st.v)
    back = step_reverse(StepState(1, st.u, st.v), g, H)
    np.testing.assert_array_equal(back.u, st.u)


def test_leapfrog_hand_step():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(3, 3))
    K = A + A.T
    h = 0.05
    e0 = np.zeros((3, 1))
    e0[0] = 1.0
    out = step_forward(StepState(0, e0, np.zeros((3, 1))), TimeGrid(h, 1), Frozen(K))
    np.testing.assert_allclose(out.u, e0 - 0.5 * h**2 * K @ K @ e0, atol=1e-15)
    np.testing.assert_allclose(out.v, h * K @ e0 - 0.25 * h**3 * K @ K @ K @ e0, atol=1e-15)
    np.testing.assert_array_equal(out.V1, out.V2)
    np.testing.assert_array_equal(out.U1, e0)


def _random_quditham(seed, N=4, E=2, T=8.0):
    rng = np.random.default_rng(seed)
    m = QuditModel(N, E, 30.0, 1.4)
    c = ControlParameterization(SplineGrid(6, T), CarrierSet((0.0, -1.4)))
    return QuditHamiltonian(m, c, 0.3 * rng.normal(size=c.num_params)), rng


def test_single_step_round_trip():
    H, rng = _random_quditham(2)
    g = TimeGrid(8.0, 40)
    for n in (0, 17, 39):
        st = random_state(rng, 4, 2)
        st.n = n
        back = step_reverse(step_forward(st, g, H), g, H)
        np.testing.assert_allclose(back.u, st.u, atol=1e-12, rtol=0)
        np.testing.assert_allclose(back.v, st.v, atol=1e-12, rtol=0)


def test_full_round_trip_reference_and_compiled():
    H, _ = _random_quditham(3)
    g = TimeGrid(8.0, 300)
    final = propagate(H, g, visitor=lambda s: None)
    st = final
    for _ in range(g.M):
        st = step_reverse(st, g, H)
    init = initial_state(4, 2)
    assert np.max(np.abs(st.u - init.u)) <= 1e-10
    assert np.max(np.abs(st.v - init.v)) <= 1e-10
    assert round_trip_error(H, g) <= 1e-10


def test_compiled_matches_reference_sweep():
    H, _ = _random_quditham(4)
    g = TimeGrid(8.0, 150)
    ref = propagate(H, g, visitor=lambda s: None)
    fast = propagate(H, g)
    np.testing.assert_allclose(fast.u, ref.u, atol=1e-13)
    np.testing.assert_allclose(fast.v, ref.v, atol=1e-13)


def test_zero_steps():
    H, _ = _random_quditham(5)
    g = TimeGrid(8.0, 0)
    init = initial_state(4, 2)
    out = propagate(H, g, init)
    assert out is init
    assert round_trip_error(H, g) == 0.0
    assert g.levels.shape == (1,)


def test_levels_lattice():
    g = TimeGrid(10.0, 7)
    lv = g.levels
    assert lv.shape == (15,)
    assert lv[0] == 0.0 and lv[-1] == 10.0
    np.testing.assert_allclose(np.diff(lv), g.h / 2)


def test_spectral_bound_and_timestep():
    xi = 2 * math.pi * 0.2198
    m = QuditModel(6, 4, 2 * math.pi * 4.10336, xi)
    assert spectral_radius_bound(m, 0.0) == pytest.approx(13.81, abs=5e-3)
    g40 = estimate_timestep(m, 2 * math.pi * 3e-3, 3, 40, 100.0)
    g80 = estimate_timestep(m, 2 * math.pi * 3e-3, 3, 80, 100.0)
    assert abs(g80.h / g40.h - 0.5) < 2 / g40.M
    with pytest.raises(ValueError):
        estimate_timestep(m, 0.01, 3, 2.0, 100.0)


def test_norm_drift_is_bounded_and_second_order():
    # the scheme preserves a modified quadratic form, so ||psi||^2 oscillates at O((h rho)^2)
    cfg = load_config("builtin:cnot")
    prob = build_problem(cfg)
    rng = np.random.default_rng(0)
    a = rng.uniform(-prob.alpha_max, prob.alpha_max, prob.num_params)
    drift = prob.objective(a).norm_drift
    h = prob.grid.h
    rho = 2 * math.pi / (40 * h)
    assert drift <= 0.25 * (h * rho) ** 2
    finer = type(prob)(prob.model, prob.controls, TimeGrid(prob.grid.T, 2 * prob.grid.M), prob.target)
    ratio = drift / finer.objective(a).norm_drift
    assert 3.0 < ratio < 5.0


def test_singular_stage_is_reported():
    from qudit_control.integrator import SingularStepError

    # I - (h/2) S is never singular for antisymmetric S; non-finite data still must not pass silently
    S = np.array([[0.0, np.nan], [np.nan, 0.0]])
    H = Frozen(np.zeros((2, 2)), S)
    with pytest.raises(np.linalg.LinAlgError):
        step_forward(StepState(0, np.eye(2)[:, :1], np.zeros((2, 1))), TimeGrid(1.0, 1), H)
    assert issubclass(SingularStepError, np.linalg.LinAlgError)
