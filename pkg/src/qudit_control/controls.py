"""Quadratic B-spline control functions with carrier waves.

The rotating-frame controls are

    p(t) = sum_l sum_k B_k(t) [a1[l,k] cos(W_l t) - a2[l,k] sin(W_l t)]
    q(t) = sum_l sum_k B_k(t) [a1[l,k] sin(W_l t) + a2[l,k] cos(W_l t)]

All times are in ns and all frequencies in rad/ns.  The parameter vector is
laid out with the carrier index outermost, the spline index in the middle and
the (cos-part, sin-part) component innermost::

    alpha[(l * D1 + k) * 2 + c]
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SplineGrid",
    "CarrierSet",
    "ControlParameterization",
    "bspline_value",
    "bspline_derivative",
    "eval_controls",
    "eval_control_gradient",
    "lab_frame_control",
    "amplitude_bound",
    "amplitude_sum_bound",
    "peak_amplitudes",
]


def bspline_value(tau):
    """Quadratic B-spline on the scaled time axis, supported on [-1/2, 1/2].

    Accepts scalars or arrays and returns the same shape.
    """
    tau = np.asarray(tau, dtype=float)
    out = np.zeros_like(tau)
    left = (tau >= -0.5) & (tau < -1.0 / 6.0)
    mid = (tau >= -1.0 / 6.0) & (tau < 1.0 / 6.0)
    right = (tau >= 1.0 / 6.0) & (tau < 0.5)
    tl, tm, tr = tau[left], tau[mid], tau[right]
    out[left] = 9.0 / 8.0 + 4.5 * tl + 4.5 * tl * tl
    out[mid] = 0.75 - 9.0 * tm * tm
    out[right] = 9.0 / 8.0 - 4.5 * tr + 4.5 * tr * tr
    return out[()] if out.ndim == 0 else out


def bspline_derivative(tau):
    """d/dtau of :func:`bspline_value`."""
    tau = np.asarray(tau, dtype=float)
    out = np.zeros_like(tau)
    left = (tau >= -0.5) & (tau < -1.0 / 6.0)
    mid = (tau >= -1.0 / 6.0) & (tau < 1.0 / 6.0)
    right = (tau >= 1.0 / 6.0) & (tau < 0.5)
    out[left] = 4.5 + 9.0 * tau[left]
    out[mid] = -18.0 * tau[mid]
    out[right] = -4.5 + 9.0 * tau[right]
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class SplineGrid:
    """Uniform grid of ``D1`` quadratic B-splines covering ``[0, T]``.

    Spline ``k`` (zero based) is centred at ``(k - 0.5) * delta`` with
    ``delta = T / (D1 - 2)``, so the first and last two splines stick out of
    the interval.
    """

    D1: int
    T: float

    def __post_init__(self):
        if self.D1 < 3:
            raise ValueError(f"need at least 3 splines per carrier, got D1={self.D1}")
        if not self.T > 0:
            raise ValueError(f"gate duration must be positive, got T={self.T}")

    @property
    def delta(self) -> float:
        return self.T / (self.D1 - 2)

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.D1) - 0.5) * self.delta

    def support(self, k: int) -> tuple[float, float]:
        c = (k - 0.5) * self.delta
        return c - 1.5 * self.delta, c + 1.5 * self.delta

    def basis(self, t) -> np.ndarray:
        """All ``D1`` basis functions at times ``t``; shape ``t.shape + (D1,)``."""
        t = np.asarray(t, dtype=float)
        tau = (t[..., None] - self.centers) / (3.0 * self.delta)
        return bspline_value(tau)

    def local_basis(self, t):
        """Indices and values of the (at most) three splines alive at ``t``.

        Returns ``(idx, val)`` of shape ``(len(t), 3)``; entries with
        ``idx >= D1`` are padding and carry ``val == 0``.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        j = np.clip(np.floor(t / self.delta).astype(np.int64), 0, self.D1 - 2)
        idx = j[:, None] + np.arange(3)
        tau = (t[:, None] - (idx - 0.5) * self.delta) / (3.0 * self.delta)
        val = bspline_value(tau)
        pad = idx >= self.D1
        val[pad] = 0.0
        idx[pad] = self.D1
        return idx, val


@dataclass(frozen=True)
class CarrierSet:
    """Carrier-wave angular frequencies in rad/ns (rotating frame)."""

    frequencies: tuple[float, ...]

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.frequencies)
        object.__setattr__(self, "frequencies", freqs)
        if len(freqs) < 1:
            raise ValueError("need at least one carrier frequency")
        if len(set(freqs)) != len(freqs):
            raise ValueError(f"duplicate carrier frequencies: {freqs}")

    def __len__(self):
        return len(self.frequencies)

    @property
    def as_array(self) -> np.ndarray:
        return np.array(self.frequencies)


@dataclass(frozen=True)
class ControlParameterization:
    """B-spline envelopes times carrier waves; linear in the parameters."""

    grid: SplineGrid
    carriers: CarrierSet

    @property
    def n_carriers(self) -> int:
        return len(self.carriers)

    @property
    def num_params(self) -> int:
        return 2 * self.n_carriers * self.grid.D1

    @property
    def T(self) -> float:
        return self.grid.T

    def index(self, carrier: int, spline: int, component: int) -> int:
        return (carrier * self.grid.D1 + spline) * 2 + component

    def _check_alpha(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape != (self.num_params,):
            raise ValueError(
                f"parameter vector has shape {alpha.shape}, expected ({self.num_params},)"
            )
        return alpha

    def _check_times(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0) or np.any(t > self.T):
            raise ValueError(f"control evaluated outside [0, {self.T}]")
        return t

    def evaluate(self, t, alpha):
        """Return ``(p, q)`` at times ``t`` (scalar or array)."""
        alpha = self._check_alpha(alpha)
        t = self._check_times(t)
        shape = t.shape
        tt = t.reshape(-1)
        idx, val = self.grid.local_basis(tt)
        coef = np.zeros((self.n_carriers, self.grid.D1 + 1, 2))
        coef[:, :-1, :] = alpha.reshape(self.n_carriers, self.grid.D1, 2)
        p = np.zeros(tt.shape)
        q = np.zeros(tt.shape)
        for l, omega in enumerate(self.carriers.frequencies):
            a1 = np.sum(val * coef[l, idx, 0], axis=1)
            a2 = np.sum(val * coef[l, idx, 1], axis=1)
            c, s = np.cos(omega * tt), np.sin(omega * tt)
            p += a1 * c - a2 * s
            q += a1 * s + a2 * c
        if shape == ():
            return float(p[0]), float(q[0])
        return p.reshape(shape), q.reshape(shape)

    def gradient(self, t):
        """Dense ``(dp/dalpha, dq/dalpha)`` at a single time ``t``."""
        t = float(self._check_times(t))
        idx, val = self.grid.local_basis(t)
        dp = np.zeros(self.num_params)
        dq = np.zeros(self.num_params)
        for l, omega in enumerate(self.carriers.frequencies):
            c, s = math.cos(omega * t), math.sin(omega * t)
            for k, b in zip(idx[0], val[0]):
                if k >= self.grid.D1:
                    continue
                r = self.index(l, k, 0)
                dp[r], dp[r + 1] = b * c, -b * s
                dq[r], dq[r + 1] = b * s, b * c
        return dp, dq

    def jacobian(self, t):
        """Dense Jacobians ``dp/dalpha`` and ``dq/dalpha``, shape ``(len(t), D)``.

        Built from the full basis matrix rather than the three-spline window;
        intended for verification code.
        """
        t = self._check_times(t).reshape(-1)
        B = self.grid.basis(t)
        Jp = np.zeros((t.size, self.n_carriers, self.grid.D1, 2))
        Jq = np.zeros_like(Jp)
        for l, omega in enumerate(self.carriers.frequencies):
            c, s = np.cos(omega * t)[:, None], np.sin(omega * t)[:, None]
            Jp[:, l, :, 0], Jp[:, l, :, 1] = B * c, -B * s
            Jq[:, l, :, 0], Jq[:, l, :, 1] = B * s, B * c
        return Jp.reshape(t.size, -1), Jq.reshape(t.size, -1)

    def pullback(self, t, lam_p, lam_q) -> np.ndarray:
        """Contract sensitivities w.r.t. ``p(t_i), q(t_i)`` into a parameter gradient.

        Computes ``sum_i dp/dalpha(t_i) lam_p[i] + dq/dalpha(t_i) lam_q[i]``
        without forming the dense Jacobian.
        """
        t = self._check_times(t).reshape(-1)
        lam_p = np.asarray(lam_p, dtype=float).reshape(-1)
        lam_q = np.asarray(lam_q, dtype=float).reshape(-1)
        idx, val = self.grid.local_basis(t)
        D1 = self.grid.D1
        grad = np.zeros((self.n_carriers, D1, 2))
        for l, omega in enumerate(self.carriers.frequencies):
            c, s = np.cos(omega * t), np.sin(omega * t)
            w1 = (c * lam_p + s * lam_q)[:, None] * val
            w2 = (c * lam_q - s * lam_p)[:, None] * val
            grad[l, :, 0] = np.bincount(idx.ravel(), w1.ravel(), minlength=D1 + 1)[:D1]
            grad[l, :, 1] = np.bincount(idx.ravel(), w2.ravel(), minlength=D1 + 1)[:D1]
        return grad.reshape(-1)

    def amplitude_phase(self, alpha):
        """Per-spline amplitudes ``beta`` and phases ``theta``, shape ``(N_f, D1)``."""
        a = self._check_alpha(alpha).reshape(self.n_carriers, self.grid.D1, 2)
        return np.hypot(a[..., 0], a[..., 1]), np.arctan2(a[..., 1], a[..., 0])


def eval_controls(t, params: ControlParameterization, alpha):
    return params.evaluate(t, alpha)


def eval_control_gradient(t, params: ControlParameterization):
    return params.gradient(t)


def lab_frame_control(t, params: ControlParameterization, alpha, omega_a: float):
    """Laboratory-frame drive ``f(t) = 2 p cos(omega_a t) - 2 q sin(omega_a t)``."""
    p, q = params.evaluate(t, alpha)
    t = np.asarray(t, dtype=float)
    return 2.0 * p * np.cos(omega_a * t) - 2.0 * q * np.sin(omega_a * t)


def amplitude_bound(alpha_max: float, n_carriers: int = 1) -> tuple[float, float]:
    """Bounds on ``max_t |p|`` and ``max_t |q|`` valid whenever ``|alpha|_inf <= alpha_max``."""
    if alpha_max < 0:
        raise ValueError("alpha_max must be non-negative")
    b = math.sqrt(2.0) * n_carriers * alpha_max
    return b, b


def amplitude_sum_bound(alpha_max: float, n_carriers: int = 1) -> float:
    """Bound on ``max_t (|p| + |q|)`` for ``|alpha|_inf <= alpha_max``.

    Per carrier ``|p_l| + |q_l| <= sqrt(2) * sqrt(a1^2 + a2^2) <= 2 alpha_max``
    pointwise, which is tighter than adding the two separate bounds.
    """
    if alpha_max < 0:
        raise ValueError("alpha_max must be non-negative")
    return 2.0 * n_carriers * alpha_max


def peak_amplitudes(params: ControlParameterization, alpha, per_spline: int = 64):
    """``(max|p|, max|q|)`` over a dense sampling of ``[0, T]``."""
    t = np.linspace(0.0, params.T, per_spline * params.grid.D1 + 1)
    p, q = params.evaluate(t, alpha)
    return float(np.max(np.abs(p))), float(np.max(np.abs(q)))
