"""Discrete gate infidelity and guard-level penalty."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .controls import ControlParameterization
from .integrator import TimeGrid, _kernel_args, initial_state
from .model import QuditHamiltonian, QuditModel, TargetGate

__all__ = [
    "ObjectiveBreakdown",
    "overlap",
    "infidelity",
    "guard_step_contribution",
    "evaluate_objective",
]

# Population traces longer than this are subsampled.
MAX_TRACE_POINTS = 10_000


@dataclass
class ObjectiveBreakdown:
    S_Vh: complex
    J1h: float
    J2h: float
    max_population: np.ndarray | None = None
    norm_drift: float = 0.0
    population_trace: np.ndarray | None = None
    trace_times: np.ndarray | None = None

    @property
    def total(self) -> float:
        return self.J1h + self.J2h

    @property
    def max_guard_population(self) -> np.ndarray:
        """Peak population of each guard level over time and initial states."""
        E = self.max_population.shape[1]
        return self.max_population[E:].max(axis=1)

    def to_dict(self) -> dict:
        out = {
            "J1h": self.J1h,
            "J2h": self.J2h,
            "total": self.total,
            "overlap": [self.S_Vh.real, self.S_Vh.imag],
            "norm_drift": self.norm_drift,
        }
        if self.max_population is not None:
            out["max_guard_population"] = self.max_guard_population.tolist()
        return out


def overlap(u, v, target: TargetGate) -> complex:
    """Trace overlap ``sum_j <psi_j(T), d_j>`` in real arithmetic."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != target.V.shape or v.shape != target.V.shape:
        raise ValueError(f"state shape {u.shape} does not match target {target.V.shape}")
    du, dv = target.du, target.dv
    re = np.sum(u * du) + np.sum(v * dv)
    im = np.sum(v * du) - np.sum(u * dv)
    return complex(re, im)


def infidelity(S_Vh: complex, E: int) -> float:
    if E < 1:
        raise ValueError("E must be at least 1")
    return 1.0 - abs(S_Vh) ** 2 / E**2


def guard_step_contribution(U1, U2, V1, weights, h: float, T: float) -> float:
    w = np.asarray(weights)[:, None]
    s = 0.5 * np.sum(w * U1 * U1) + 0.5 * np.sum(w * U2 * U2) + np.sum(w * V1 * V1)
    return h / T * s


def evaluate_objective(
    model: QuditModel,
    controls: ControlParameterization,
    alpha,
    grid: TimeGrid,
    target: TargetGate,
    trace: bool = False,
) -> ObjectiveBreakdown:
    """One forward sweep, accumulating J2h on the fly."""
    ham = QuditHamiltonian(model, controls, alpha)
    init = initial_state(model.N, model.E)
    if grid.M == 0:
        S = overlap(init.u, init.v, target)
        pop = init.u**2
        return ObjectiveBreakdown(S, infidelity(S, model.E), 0.0, pop, 0.0)
    stride = max(1, -(-grid.M // (MAX_TRACE_POINTS - 1))) if trace else 0
    u, v, wsum, maxpop, tr, _ = _kernels.forward_sweep(
        *_kernel_args(ham, grid), model.weights.copy(), init.u, init.v, False, stride
    )
    S = overlap(u, v, target)
    drift = float(np.max(np.abs(np.sum(u * u + v * v, axis=0) - 1.0)))
    out = ObjectiveBreakdown(S, infidelity(S, model.E), grid.h / grid.T * wsum, maxpop, drift)
    if trace:
        out.population_trace = tr
        out.trace_times = np.arange(tr.shape[0]) * stride * grid.h
    return out
