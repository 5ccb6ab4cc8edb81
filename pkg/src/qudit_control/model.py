"""Rotating-frame qudit Hamiltonian and gate targets.

The Hamiltonian ``H = K + iS`` is split into its real symmetric part ``K``
and real antisymmetric part ``S``:

    K(t) = -(xi_a / 2) diag(n (n - 1)) + p(t) (a + a^T)
    S(t) = q(t) (a - a^T)
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .controls import ControlParameterization

__all__ = [
    "QuditModel",
    "QuditHamiltonian",
    "TargetGate",
    "lowering",
    "assemble_K_S",
    "assemble_K_S_derivative",
    "load_target",
]


def lowering(N: int) -> np.ndarray:
    """Lowering matrix with ``sqrt(1), ..., sqrt(N-1)`` on the superdiagonal."""
    if N < 2:
        raise ValueError(f"need at least two levels, got N={N}")
    return np.diag(np.sqrt(np.arange(1.0, N)), k=1)


@dataclass(frozen=True)
class QuditModel:
    """Single qudit with ``E`` essential and ``N - E`` guard levels.

    Frequencies are angular, in rad/ns.  ``weights`` is the diagonal of the
    guard-level penalty matrix and must vanish on the essential levels.
    """

    N: int
    E: int
    omega_a: float
    xi_a: float
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"need at least two levels, got N={self.N}")
        if not 1 <= self.E <= self.N:
            raise ValueError(f"essential levels E={self.E} must lie in [1, N={self.N}]")
        w = np.zeros(self.N) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (self.N,):
            raise ValueError(f"weights must have length N={self.N}, got {w.shape}")
        if np.any(w[: self.E] != 0.0):
            raise ValueError("guard weights must be zero on the essential levels")
        if np.any(w < 0.0):
            raise ValueError("guard weights must be non-negative")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def G(self) -> int:
        return self.N - self.E

    @property
    def drift(self) -> np.ndarray:
        """Diagonal of the drift Hamiltonian, ``-(xi_a / 2) n (n - 1)``."""
        n = np.arange(self.N, dtype=float)
        return -0.5 * self.xi_a * n * (n - 1.0)

    @property
    def sym_coupling(self) -> np.ndarray:
        """``a + a^T``, multiplied by ``p(t)`` in ``K``."""
        a = lowering(self.N)
        return a + a.T

    @property
    def skew_coupling(self) -> np.ndarray:
        """``a - a^T``, multiplied by ``q(t)`` in ``S``."""
        a = lowering(self.N)
        return a - a.T


def _K_S(model: QuditModel, p: float, q: float):
    K = np.diag(model.drift) + p * model.sym_coupling
    S = q * model.skew_coupling
    return K, S


def assemble_K_S(t, model: QuditModel, controls: ControlParameterization, alpha):
    p, q = controls.evaluate(t, alpha)
    return _K_S(model, p, q)


def assemble_K_S_derivative(t, model: QuditModel, controls: ControlParameterization, r: int):
    """``(dK/dalpha_r, dS/dalpha_r)`` at time ``t``; the drift does not contribute."""
    if not 0 <= r < controls.num_params:
        raise IndexError(f"parameter index {r} out of range [0, {controls.num_params})")
    dp, dq = controls.gradient(t)
    return dp[r] * model.sym_coupling, dq[r] * model.skew_coupling


class QuditHamiltonian:
    """Time-dependent ``(K, S)`` for a fixed parameter vector.

    Anything with an ``assemble(t) -> (K, S)`` method can be handed to the
    reference steppers in :mod:`qudit_control.integrator`; this class also
    exposes the structure (drift diagonal, coupling matrices, control
    samples) used by the compiled sweeps.
    """

    def __init__(self, model: QuditModel, controls: ControlParameterization, alpha):
        self.model = model
        self.controls = controls
        self.alpha = controls._check_alpha(alpha).copy()

    @property
    def N(self) -> int:
        return self.model.N

    def assemble(self, t):
        return assemble_K_S(t, self.model, self.controls, self.alpha)

    def control_samples(self, times):
        return self.controls.evaluate(times, self.alpha)

    def with_alpha(self, alpha) -> QuditHamiltonian:
        return QuditHamiltonian(self.model, self.controls, alpha)


@dataclass(frozen=True)
class TargetGate:
    """Target ``V`` (``N x E``), the unitary ``E x E`` gate padded with zero guard rows."""

    V: np.ndarray

    def __post_init__(self):
        V = np.array(self.V, dtype=complex)
        if V.ndim != 2 or V.shape[0] < V.shape[1]:
            raise ValueError(f"target must be an N x E matrix with N >= E, got {V.shape}")
        E = V.shape[1]
        if np.any(V[E:] != 0):
            raise ValueError("guard rows of the target must be zero")
        Vg = V[:E]
        if not np.allclose(Vg.conj().T @ Vg, np.eye(E), atol=1e-12, rtol=0):
            raise ValueError("essential block of the target is not unitary")
        V.flags.writeable = False
        object.__setattr__(self, "V", V)

    @classmethod
    def from_gate(cls, gate, N: int | None = None) -> TargetGate:
        gate = np.asarray(gate, dtype=complex)
        E = gate.shape[0]
        N = E if N is None else N
        V = np.zeros((N, E), dtype=complex)
        V[:E] = gate
        return cls(V)

    @classmethod
    def identity(cls, E: int, N: int | None = None) -> TargetGate:
        return cls.from_gate(np.eye(E), N)

    @classmethod
    def cnot(cls, N: int | None = None) -> TargetGate:
        """CNOT on four essential levels read as two qubits: swaps ``|2>`` and ``|3>``."""
        gate = np.eye(4)[[0, 1, 3, 2]]
        return cls.from_gate(gate, N)

    @classmethod
    def swap(cls, d: int, N: int | None = None) -> TargetGate:
        """Exchange ``|0>`` and ``|d>`` on ``d + 1`` essential levels."""
        if d < 1:
            raise ValueError("swap level must be at least 1")
        perm = np.arange(d + 1)
        perm[[0, d]] = perm[[d, 0]]
        return cls.from_gate(np.eye(d + 1)[perm], N)

    @property
    def N(self) -> int:
        return self.V.shape[0]

    @property
    def E(self) -> int:
        return self.V.shape[1]

    @property
    def du(self) -> np.ndarray:
        return self.V.real.copy()

    @property
    def dv(self) -> np.ndarray:
        return -self.V.imag

    def phased(self, theta: float) -> TargetGate:
        return TargetGate(np.exp(1j * theta) * self.V)


def load_target(path, N: int | None = None) -> TargetGate:
    """Read a gate from JSON.

    The file holds either a bare list of rows or ``{"matrix": rows}``, with
    each entry a ``[re, im]`` pair (a plain number is taken as real).  An
    ``E x E`` matrix is padded with zero guard rows up to ``N``.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"target gate file not found: {path}")
    data = json.loads(path.read_text())
    rows = data["matrix"] if isinstance(data, dict) else data
    mat = np.array(
        [[complex(*x) if isinstance(x, (list, tuple)) else complex(x) for x in row] for row in rows]
    )
    if mat.shape[0] == mat.shape[1]:
        return TargetGate.from_gate(mat, N)
    return TargetGate(mat)


def save_target(target: TargetGate, path) -> None:
    rows = [[[z.real, z.imag] for z in row] for row in target.V]
    Path(path).write_text(json.dumps({"matrix": rows}, indent=1))
