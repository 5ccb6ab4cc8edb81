"""Exact gradient of the discrete objective by the compatible adjoint scheme.

The adjoint ``(mu, nu)`` is marched from ``t = T`` back to ``0`` while the
state is recovered by reversing the Stormer-Verlet steps, so memory stays
``O(N E)`` for any number of time steps.  In stage form, step ``n`` reads

    Y2 = nu^{n+1}
    (I + h/2 S_{n+1}) X  = mu^{n+1} + h/2 K_{n+1/2} Y2 + dJ/dU2
    (I + h/2 S_{n+1/2}) Y1 = nu^{n+1} - h/2 S_{n+1/2} Y2 - h/2 (K_n + K_{n+1}) X + dJ/dV1
    mu^n = mu^{n+1} - h/2 [(S_n + S_{n+1}) X - K_{n+1/2} (Y1 + Y2)] + dJ/dU1 + dJ/dU2
    nu^n = Y1

with the matrices evaluated at ``t_n``, ``t_{n+1/2}`` and ``t_{n+1}`` exactly
as written; there is no single set of stage times that reproduces them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .controls import ControlParameterization
from .integrator import (
    StepState,
    TimeGrid,
    _kernel_args,
    _solve,
    initial_state,
    propagate,
    step_reverse,
)
from .model import QuditHamiltonian, QuditModel, TargetGate
from .objective import ObjectiveBreakdown, guard_step_contribution, infidelity, overlap

__all__ = [
    "AdjointState",
    "terminal_adjoint",
    "adjoint_step",
    "gradient_step_contribution",
    "compute_gradient",
    "compute_gradient_reference",
]


@dataclass
class AdjointState:
    """Adjoint at step ``n`` plus the stages ``X, Y1, Y2`` of step ``n``."""

    n: int
    mu: np.ndarray
    nu: np.ndarray
    X: np.ndarray | None = None
    Y1: np.ndarray | None = None
    Y2: np.ndarray | None = None


def terminal_adjoint(S_Vh: complex, target: TargetGate):
    """Derivative of the infidelity with respect to the final ``(u, v)``."""
    E = target.E
    c = -2.0 / E**2
    du, dv = target.du, target.dv
    mu = c * (S_Vh.real * du - S_Vh.imag * dv)
    nu = c * (S_Vh.real * dv + S_Vh.imag * du)
    return mu, nu


def adjoint_step(
    adj: AdjointState,
    fwd: StepState,
    grid: TimeGrid,
    hamiltonian,
    weights=None,
) -> AdjointState:
    """Reference (numpy) adjoint step from ``n + 1`` to ``n``.

    ``fwd`` must carry the stages of forward step ``n = adj.n - 1``, as
    returned by :func:`~qudit_control.integrator.step_reverse`.
    """
    n = adj.n - 1
    h = grid.h
    Kn, Sn = hamiltonian.assemble(grid.t(n))
    Kh, Sh = hamiltonian.assemble(grid.t(n + 0.5))
    Kn1, Sn1 = hamiltonian.assemble(grid.t(n + 1))
    I = np.eye(Kn.shape[0])
    if weights is None:
        fU1 = fU2 = fV1 = 0.0
    else:
        wf = (h / grid.T) * np.asarray(weights)[:, None]
        fU1, fU2, fV1 = wf * fwd.U1, wf * fwd.U2, 2.0 * wf * fwd.V1
    mu1, nu1 = adj.mu, adj.nu
    Y2 = nu1
    X = _solve(I + 0.5 * h * Sn1, mu1 + 0.5 * h * Kh @ Y2 + fU2)
    Y1 = _solve(
        I + 0.5 * h * Sh, nu1 - 0.5 * h * Sh @ Y2 - 0.5 * h * (Kn + Kn1) @ X + fV1
    )
    mu = mu1 - 0.5 * h * ((Sn + Sn1) @ X - Kh @ (Y1 + Y2)) + fU1 + fU2
    return AdjointState(n, mu, Y1, X, Y1, Y2)


def gradient_step_contribution(
    fwd: StepState,
    adj: AdjointState,
    grid: TimeGrid,
    model: QuditModel,
    controls: ControlParameterization,
) -> np.ndarray:
    """Contribution of step ``n`` to the gradient, for every parameter."""
    n = adj.n
    h = grid.h
    P, Q = model.sym_coupling, model.skew_coupling
    dpn, dqn = controls.gradient(grid.t(n))
    dph, dqh = controls.gradient(grid.t(n + 0.5))
    dpn1, dqn1 = controls.gradient(grid.t(n + 1))
    U1, U2, V1 = fwd.U1, fwd.U2, fwd.V1
    X, Y1, Y2 = adj.X, adj.Y1, adj.Y2
    qx1 = np.sum((Q @ U1) * X)
    qx2 = np.sum((Q @ U2) * X)
    px = np.sum((P @ V1) * X)
    py = np.sum((P @ U1) * Y1) + np.sum((P @ U2) * Y2)
    qy = np.sum((Q @ V1) * (Y1 + Y2))
    return 0.5 * h * (dqn * qx1 + dqn1 * qx2 - (dpn + dpn1) * px + dph * py + dqh * qy)


def compute_gradient(
    model: QuditModel,
    controls: ControlParameterization,
    alpha,
    grid: TimeGrid,
    target: TargetGate,
    store_stages: bool = False,
):
    """Objective breakdown and its exact gradient from two sweeps.

    The backward sweep yields derivatives with respect to the control
    samples on the half-step lattice; these are pulled back to the spline
    coefficients, so the cost is independent of the number of parameters.
    With ``store_stages`` a third item is returned: the reconstructed
    forward stages of every step, shape ``(M, 3, N, E)``.
    """
    ham = QuditHamiltonian(model, controls, alpha)
    init = initial_state(model.N, model.E)
    D = controls.num_params
    if grid.M == 0:
        S = overlap(init.u, init.v, target)
        res = (ObjectiveBreakdown(S, infidelity(S, model.E), 0.0, init.u**2), np.zeros(D))
        return res + (np.empty((0, 3, model.N, model.E)),) if store_stages else res
    args = _kernel_args(ham, grid)
    w = model.weights.copy()
    u, v, wsum, maxpop, _, _ = _kernels.forward_sweep(*args, w, init.u, init.v, False, 0)
    S = overlap(u, v, target)
    drift = float(np.max(np.abs(np.sum(u * u + v * v, axis=0) - 1.0)))
    obj = ObjectiveBreakdown(S, infidelity(S, model.E), grid.h / grid.T * wsum, maxpop, drift)
    mu, nu = terminal_adjoint(S, target)
    lam_p, lam_q, *_rest, stages = _kernels.backward_sweep(
        *args, (grid.h / grid.T) * w, u, v, mu, nu, store_stages
    )
    grad = controls.pullback(grid.levels, lam_p, lam_q)
    if store_stages:
        return obj, grad, stages
    return obj, grad


def compute_gradient_reference(
    model: QuditModel,
    controls: ControlParameterization,
    alpha,
    grid: TimeGrid,
    target: TargetGate,
):
    """Same as :func:`compute_gradient`, written step by step in numpy.

    Much slower; meant for small cases and for reading alongside the
    formulas.
    """
    ham = QuditHamiltonian(model, controls, alpha)
    guard = [0.0]

    def visit(st):
        guard[0] += guard_step_contribution(st.U1, st.U2, st.V1, model.weights, grid.h, grid.T)

    final = propagate(ham, grid, initial_state(model.N, model.E), visitor=visit)
    S = overlap(final.u, final.v, target)
    obj = ObjectiveBreakdown(S, infidelity(S, model.E), guard[0])
    mu, nu = terminal_adjoint(S, target)
    adj = AdjointState(grid.M, mu, nu)
    grad = np.zeros(controls.num_params)
    state = final
    for _ in range(grid.M):
        state = step_reverse(state, grid, ham)
        adj = adjoint_step(adj, state, grid, ham, model.weights)
        grad += gradient_step_contribution(state, adj, grid, model, controls)
    return obj, grad

