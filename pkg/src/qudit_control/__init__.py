"""Optimal control of qudit gates with a symplectic integrator and its discrete adjoint."""
from .adjoint import compute_gradient, compute_gradient_reference
from .analysis import (
    fd_gradient,
    forward_sensitivity_gradient,
    hessian_probe,
    jacobi_eigen,
    pulse_spectrum,
    transition_frequencies,
)
from .config import RunConfig, build_problem, load_config
from .controls import (
    CarrierSet,
    ControlParameterization,
    SplineGrid,
    amplitude_bound,
    bspline_value,
    eval_control_gradient,
    eval_controls,
    lab_frame_control,
)
from .integrator import TimeGrid, estimate_timestep, propagate, step_forward, step_reverse
from .model import QuditHamiltonian, QuditModel, TargetGate, load_target
from .objective import ObjectiveBreakdown, evaluate_objective
from .optimizer import OptimizerConfig, initial_guess, optimize
from .problem import GateProblem

__all__ = [
    "CarrierSet",
    "ControlParameterization",
    "GateProblem",
    "ObjectiveBreakdown",
    "OptimizerConfig",
    "QuditHamiltonian",
    "QuditModel",
    "RunConfig",
    "SplineGrid",
    "TargetGate",
    "TimeGrid",
    "amplitude_bound",
    "bspline_value",
    "build_problem",
    "compute_gradient",
    "compute_gradient_reference",
    "estimate_timestep",
    "eval_control_gradient",
    "eval_controls",
    "evaluate_objective",
    "fd_gradient",
    "forward_sensitivity_gradient",
    "hessian_probe",
    "initial_guess",
    "jacobi_eigen",
    "lab_frame_control",
    "load_config",
    "load_target",
    "optimize",
    "propagate",
    "pulse_spectrum",
    "step_forward",
    "step_reverse",
    "transition_frequencies",
]
