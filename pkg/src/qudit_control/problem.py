"""A gate-design problem: model, controls, time grid and target in one place."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjoint import compute_gradient
from .controls import ControlParameterization
from .integrator import TimeGrid
from .model import QuditModel, TargetGate
from .objective import ObjectiveBreakdown, evaluate_objective


@dataclass
class GateProblem:
    model: QuditModel
    controls: ControlParameterization
    grid: TimeGrid
    target: TargetGate
    alpha_max: float = np.inf

    def __post_init__(self):
        if self.target.V.shape != (self.model.N, self.model.E):
            raise ValueError(
                f"target shape {self.target.V.shape} does not match (N, E) = "
                f"({self.model.N}, {self.model.E})"
            )
        if abs(self.grid.T - self.controls.T) > 1e-12 * self.grid.T:
            raise ValueError("time grid and spline grid disagree on the gate duration")

    @property
    def num_params(self) -> int:
        return self.controls.num_params

    @property
    def bounds(self):
        a = np.full(self.num_params, float(self.alpha_max))
        return -a, a

    def objective(self, alpha, trace: bool = False) -> ObjectiveBreakdown:
        return evaluate_objective(self.model, self.controls, alpha, self.grid, self.target, trace)

    def value(self, alpha) -> float:
        return self.objective(alpha).total

    def gradient(self, alpha) -> np.ndarray:
        return compute_gradient(self.model, self.controls, alpha, self.grid, self.target)[1]

    def value_and_gradient(self, alpha):
        """``(breakdown, gradient)``, the callable shape the optimizer expects."""
        return compute_gradient(self.model, self.controls, alpha, self.grid, self.target)
