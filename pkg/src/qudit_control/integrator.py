"""Stormer-Verlet time stepping of the real-valued Schrodinger system.

With ``psi = u - i v`` and ``H = K + iS`` the state obeys

    du/dt = S u - K v,     dv/dt = K u + S v,

which is marched with the two-stage partitioned Runge-Kutta pair built from
the trapezoidal rule (for ``u``) and the implicit midpoint rule (for ``v``).
The scheme is time reversible, so the reverse step below is its exact
algebraic inverse and the state never has to be stored.

The per-step functions here are plain numpy and accept any Hamiltonian
object with an ``assemble(t) -> (K, S)`` method.  Full sweeps for the qudit
Hamiltonian go through the compiled loops in :mod:`qudit_control._kernels`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .controls import amplitude_sum_bound
from .model import QuditHamiltonian, QuditModel

__all__ = [
    "TimeGrid",
    "StepState",
    "SingularStepError",
    "estimate_timestep",
    "spectral_radius_bound",
    "initial_state",
    "step_forward",
    "step_reverse",
    "propagate",
    "control_samples",
    "round_trip_error",
]


class SingularStepError(np.linalg.LinAlgError):
    """An implicit stage matrix could not be solved accurately."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_n = n h``, ``h = T / M``.  ``M = 0`` means no steps."""

    T: float
    M: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"duration must be positive, got T={self.T}")
        if self.M < 0:
            raise ValueError(f"step count must be non-negative, got M={self.M}")

    @property
    def h(self) -> float:
        return self.T / self.M if self.M else 0.0

    def t(self, n: float) -> float:
        return min(n * self.T / self.M, self.T) if self.M else 0.0

    @property
    def levels(self) -> np.ndarray:
        """Times ``t_0, t_{1/2}, t_1, ..., t_M`` (length ``2M + 1``)."""
        if self.M == 0:
            return np.zeros(1)
        lv = np.arange(2 * self.M + 1) * (self.T / (2 * self.M))
        lv[-1] = self.T
        return np.minimum(lv, self.T)


def spectral_radius_bound(model: QuditModel, amp_sum: float) -> float:
    """Gershgorin-type bound on the spectral radius of the frozen Hamiltonian.

    ``amp_sum`` bounds ``|p(t)| + |q(t)|`` over the whole gate.
    """
    N = model.N
    return 0.5 * abs(model.xi_a) * (N - 1) * (N - 2) + amp_sum * math.sqrt(N - 1)


def estimate_timestep(
    model: QuditModel,
    alpha_max: float,
    n_carriers: int,
    C_P: float,
    T: float,
    amp_sum: float | None = None,
) -> TimeGrid:
    """Pick ``M`` so the fastest period is resolved by at least ``C_P`` steps.

    By default ``p_inf + q_inf`` is bounded using ``|alpha|_inf <= alpha_max``;
    pass ``amp_sum`` to use a known value instead.
    """
    if C_P <= 2:
        raise ValueError(f"C_P={C_P} is at or below the stability limit 2")
    if not T > 0:
        raise ValueError("duration must be positive")
    if amp_sum is None:
        amp_sum = amplitude_sum_bound(alpha_max, n_carriers)
    rho = spectral_radius_bound(model, amp_sum)
    delta_max = (model.E - 1) * abs(model.xi_a)
    fastest = max(rho, delta_max)
    if fastest == 0.0:
        return TimeGrid(T, 1)
    h = 2.0 * math.pi / (C_P * fastest)
    return TimeGrid(T, int(math.ceil(T / h - 1e-12)))


@dataclass
class StepState:
    """State ``(u, v)`` at step ``n`` plus the stages of the step that touches it.

    After :func:`step_forward` the stages belong to step ``n - 1``; after
    :func:`step_reverse` they belong to step ``n``.  ``V2`` is the same array
    as ``V1``.
    """

    n: int
    u: np.ndarray
    v: np.ndarray
    U1: np.ndarray | None = None
    U2: np.ndarray | None = None
    V1: np.ndarray | None = None

    @property
    def V2(self):
        return self.V1

    @property
    def psi(self) -> np.ndarray:
        return self.u - 1j * self.v


def initial_state(N: int, E: int) -> StepState:
    """The first ``E`` canonical basis vectors as columns."""
    u = np.zeros((N, E))
    u[:E, :E] = np.eye(E)
    return StepState(0, u, np.zeros((N, E)))


def _solve(A, b):
    x = np.linalg.solve(A, b)
    resid = np.max(np.abs(A @ x - b), initial=0.0)
    if not resid <= 1e-12 * (1.0 + np.max(np.abs(b), initial=0.0)):
        raise SingularStepError(f"implicit stage residual {resid:.3e} too large")
    return x


def step_forward(state: StepState, grid: TimeGrid, hamiltonian) -> StepState:
    n = state.n
    if n >= grid.M:
        raise IndexError(f"cannot step past M={grid.M}")
    h = grid.h
    Kn, Sn = hamiltonian.assemble(grid.t(n))
    Kh, Sh = hamiltonian.assemble(grid.t(n + 0.5))
    Kn1, Sn1 = hamiltonian.assemble(grid.t(n + 1))
    I = np.eye(Kn.shape[0])
    u, v = state.u, state.v
    U1 = u
    V1 = _solve(I - 0.5 * h * Sh, v + 0.5 * h * Kh @ U1)
    V2 = V1
    U2 = _solve(I - 0.5 * h * Sn1, u + 0.5 * h * (Sn @ U1 - Kn @ V1 - Kn1 @ V2))
    v_next = v + 0.5 * h * (Kh @ (U1 + U2) + Sh @ (V1 + V2))
    return StepState(n + 1, U2, v_next, U1, U2, V1)


def step_reverse(state: StepState, grid: TimeGrid, hamiltonian) -> StepState:
    """Undo :func:`step_forward`: recover step ``n`` from step ``n + 1``."""
    n = state.n - 1
    if n < 0:
        raise IndexError("cannot step before t = 0")
    h = grid.h
    Kn, Sn = hamiltonian.assemble(grid.t(n))
    Kh, Sh = hamiltonian.assemble(grid.t(n + 0.5))
    Kn1, Sn1 = hamiltonian.assemble(grid.t(n + 1))
    I = np.eye(Kn.shape[0])
    u1, v1 = state.u, state.v
    V1 = _solve(I + 0.5 * h * Sh, v1 - 0.5 * h * Kh @ u1)
    u0 = _solve(I + 0.5 * h * Sn, (I - 0.5 * h * Sn1) @ u1 + 0.5 * h * (Kn + Kn1) @ V1)
    v0 = V1 - 0.5 * h * (Kh @ u0 + Sh @ V1)
    return StepState(n, u0, v0, u0, u1, V1)


def control_samples(hamiltonian: QuditHamiltonian, grid: TimeGrid):
    """``p`` and ``q`` on the half-step lattice of ``grid``."""
    return hamiltonian.control_samples(grid.levels)


def _kernel_args(hamiltonian: QuditHamiltonian, grid: TimeGrid):
    model = hamiltonian.model
    p, q = control_samples(hamiltonian, grid)
    return (
        model.drift,
        np.ascontiguousarray(model.sym_coupling),
        np.ascontiguousarray(model.skew_coupling),
        np.ascontiguousarray(p),
        np.ascontiguousarray(q),
        grid.h,
    )


def propagate(hamiltonian, grid: TimeGrid, initial: StepState | None = None, visitor=None):
    """Advance ``M`` steps and return the final :class:`StepState`.

    ``visitor(state)`` is called after every step with the new state, whose
    stage fields hold the step just taken.  Without a visitor a
    :class:`QuditHamiltonian` is marched by the compiled loop.
    """
    if initial is None:
        initial = initial_state(hamiltonian.N, getattr(hamiltonian.model, "E", hamiltonian.N))
    if grid.M == 0:
        return initial
    if visitor is None and isinstance(hamiltonian, QuditHamiltonian):
        args = _kernel_args(hamiltonian, grid)
        w = np.zeros(hamiltonian.N)
        u, v, *_ = _kernels.forward_sweep(
            *args,
            w,
            np.ascontiguousarray(initial.u, dtype=float),
            np.ascontiguousarray(initial.v, dtype=float),
            False,
            0,
        )
        return StepState(grid.M, u, v)
    state = initial
    for _ in range(state.n, grid.M):
        state = step_forward(state, grid, hamiltonian)
        if visitor is not None:
            visitor(state)
    return state


def round_trip_error(hamiltonian: QuditHamiltonian, grid: TimeGrid, initial: StepState | None = None) -> float:
    """Max-norm distance to the initial state after ``M`` steps forward and ``M`` back."""
    if initial is None:
        initial = initial_state(hamiltonian.N, hamiltonian.model.E)
    if grid.M == 0:
        return 0.0
    final = propagate(hamiltonian, grid, initial)
    args = _kernel_args(hamiltonian, grid)
    zero = np.zeros_like(final.u)
    _, _, u0, v0, _, _, _ = _kernels.backward_sweep(
        *args, np.zeros(hamiltonian.N), final.u, final.v, zero, zero.copy(), False
    )
    return float(max(np.max(np.abs(u0 - initial.u)), np.max(np.abs(v0 - initial.v))))
