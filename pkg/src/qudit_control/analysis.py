"""Verification oracles and diagnostics.

Independent gradient paths (finite differences and forward sensitivities of
the time-stepping scheme), a finite-difference Hessian probe with a cyclic
Jacobi eigensolver, and the Fourier spectrum of the laboratory-frame pulse.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .controls import ControlParameterization, lab_frame_control
from .integrator import initial_state
from .objective import overlap
from .problem import GateProblem

__all__ = [
    "fd_gradient",
    "forward_sensitivity_gradient",
    "HessianProbe",
    "fd_hessian",
    "hessian_probe",
    "jacobi_eigen",
    "PulseSpectrum",
    "pulse_spectrum",
    "spectrum_peaks",
    "transition_frequencies",
]


def _scalar_fn(f):
    if isinstance(f, GateProblem):
        return f.value
    return f


def _grad_fn(g):
    if isinstance(g, GateProblem):
        return g.gradient
    return g


def fd_gradient(f, alpha, eps: float = 1e-6) -> np.ndarray:
    """Centred differences ``(f(a + eps e_r) - f(a - eps e_r)) / 2 eps``.

    ``f`` is a scalar function or a :class:`GateProblem` (whose total
    objective is used).
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    f = _scalar_fn(f)
    a = np.asarray(alpha, dtype=float)
    g = np.empty(a.size)
    for r in range(a.size):
        e = np.zeros(a.size)
        e[r] = eps
        g[r] = (f(a + e) - f(a - e)) / (2.0 * eps)
    return g


def forward_sensitivity_gradient(problem: GateProblem, alpha) -> np.ndarray:
    """Gradient from the linearized scheme, all parameters marched together.

    The derivative of every stage with respect to every ``alpha_r`` is
    propagated next to the base solution, forced by ``K'`` and ``S'``; the
    objective derivative then follows from the chain rule through ``J1h``
    and ``J2h``.  The work grows linearly in the number of parameters, and
    nothing is shared with the adjoint code beyond the model matrices.
    """
    model, controls, grid, target = problem.model, problem.controls, problem.grid, problem.target
    alpha = controls._check_alpha(alpha)
    D = controls.num_params
    N, E = model.N, model.E
    st = initial_state(N, E)
    u, v = st.u.copy(), st.v.copy()
    if grid.M == 0:
        return np.zeros(D)
    h, M = grid.h, grid.M
    lv = grid.levels
    p, q = controls.evaluate(lv, alpha)
    Jp, Jq = controls.jacobian(lv)
    P, Q = model.sym_coupling, model.skew_coupling
    drift = np.diag(model.drift)
    I = np.eye(N)
    W = model.weights[:, None]
    du = np.zeros((D, N, E))
    dv = np.zeros((D, N, E))
    dJ2 = np.zeros(D)

    def KS(i):
        return drift + p[i] * P, q[i] * Q

    Kn1, Sn1 = KS(0)
    for n in range(M):
        Kn, Sn = Kn1, Sn1
        Kh, Sh = KS(2 * n + 1)
        Kn1, Sn1 = KS(2 * n + 2)
        a_n, a_h, a_n1 = 2 * n, 2 * n + 1, 2 * n + 2
        # base step
        U1 = u
        V1 = np.linalg.solve(I - 0.5 * h * Sh, v + 0.5 * h * Kh @ U1)
        U2 = np.linalg.solve(I - 0.5 * h * Sn1, u + 0.5 * h * (Sn @ U1 - (Kn + Kn1) @ V1))
        v_next = v + 0.5 * h * (Kh @ (U1 + U2) + 2.0 * Sh @ V1)
        # linearized step; leading index runs over parameters
        PU1, PU2, PV1 = P @ U1, P @ U2, P @ V1
        QU1, QU2, QV1 = Q @ U1, Q @ U2, Q @ V1
        dU1 = du
        rhs = (
            dv
            + 0.5 * h * np.einsum("ij,rjk->rik", Kh, dU1)
            + 0.5 * h * (Jq[a_h][:, None, None] * QV1 + Jp[a_h][:, None, None] * PU1)
        )
        dV1 = np.linalg.solve(I - 0.5 * h * Sh, rhs)
        rhs = (
            du
            + 0.5 * h * np.einsum("ij,rjk->rik", Sn, dU1)
            - 0.5 * h * np.einsum("ij,rjk->rik", Kn + Kn1, dV1)
            + 0.5 * h * Jq[a_n1][:, None, None] * QU2
            + 0.5 * h * Jq[a_n][:, None, None] * QU1
            - 0.5 * h * (Jp[a_n] + Jp[a_n1])[:, None, None] * PV1
        )
        dU2 = np.linalg.solve(I - 0.5 * h * Sn1, rhs)
        dv = (
            dv
            + 0.5 * h * np.einsum("ij,rjk->rik", Kh, dU1 + dU2)
            + h * np.einsum("ij,rjk->rik", Sh, dV1)
            + 0.5 * h * Jp[a_h][:, None, None] * (PU1 + PU2)
            + h * Jq[a_h][:, None, None] * QV1
        )
        dJ2 += (h / grid.T) * (
            np.einsum("ik,rik->r", W * U1, dU1)
            + np.einsum("ik,rik->r", W * U2, dU2)
            + 2.0 * np.einsum("ik,rik->r", W * V1, dV1)
        )
        du = dU2
        u, v = U2, v_next

    S = overlap(u, v, target)
    tu, tv = target.du, target.dv
    dS_re = np.einsum("ik,rik->r", tu, du) + np.einsum("ik,rik->r", tv, dv)
    dS_im = np.einsum("ik,rik->r", tu, dv) - np.einsum("ik,rik->r", tv, du)
    dJ1 = -2.0 / E**2 * (S.real * dS_re + S.imag * dS_im)
    return dJ1 + dJ2


# -- Hessian probe ----------------------------------------------------------


def jacobi_eigen(A, tol: float = 1e-10, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm is at most ``tol`` times
    the Frobenius norm of ``A``.  Returns ``(eigenvalues, vectors)`` with
    eigenvalues in descending order and vectors as columns.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    if not np.allclose(A, A.T, rtol=0, atol=1e-14 * max(1.0, np.abs(A).max(initial=0.0))):
        raise ValueError("matrix must be symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if scale == 0.0 or n == 1:
        w = np.diag(A).copy()
        order = np.argsort(-w, kind="stable")
        return w[order], V[:, order]

    def off(B):
        O = B - np.diag(np.diag(B))
        return np.sqrt(np.sum(O * O))

    for _ in range(max_sweeps):
        if off(A) <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-18 * (abs(A[p, p]) + abs(A[q, q])):
                    # below roundoff of the diagonal: drop it
                    A[p, q] = A[q, p] = 0.0
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.copysign(1.0, tau) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        if off(A) > tol * scale:
            raise RuntimeError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


@dataclass
class HessianProbe:
    L: np.ndarray
    eps: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def L_s(self) -> np.ndarray:
        return 0.5 * (self.L + self.L.T)

    @property
    def L_a(self) -> np.ndarray:
        return 0.5 * (self.L - self.L.T)

    @property
    def norm_symmetric(self) -> float:
        return float(np.linalg.norm(self.L_s))

    @property
    def norm_antisymmetric(self) -> float:
        return float(np.linalg.norm(self.L_a))

    @property
    def asymmetry_ratio(self) -> float:
        return self.norm_antisymmetric / self.norm_symmetric

    def to_dict(self, include_matrix: bool = False) -> dict:
        out = {
            "eps": self.eps,
            "norm_symmetric": self.norm_symmetric,
            "norm_antisymmetric": self.norm_antisymmetric,
            "asymmetry_ratio": self.asymmetry_ratio,
            "eigenvalues": self.eigenvalues.tolist(),
        }
        if include_matrix:
            out["L"] = self.L.tolist()
        return out


def fd_hessian(grad, alpha, eps: float = 1e-6, workers: int = 1) -> np.ndarray:
    """``L[j, k] = (g_j(a + eps e_k) - g_j(a - eps e_k)) / 2 eps``.

    The ``2 D`` gradient calls are independent; with ``workers > 1`` they
    run in a thread pool (the compiled sweeps release the GIL) and are
    reduced in index order, so the result does not depend on ``workers``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    grad = _grad_fn(grad)
    a = np.asarray(alpha, dtype=float)
    D = a.size

    def column(k):
        e = np.zeros(D)
        e[k] = eps
        return (np.asarray(grad(a + e)) - np.asarray(grad(a - e))) / (2.0 * eps)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cols = list(pool.map(column, range(D)))
    else:
        cols = [column(k) for k in range(D)]
    return np.column_stack(cols)


def hessian_probe(grad, alpha, eps: float = 1e-6, workers: int = 1) -> HessianProbe:
    L = fd_hessian(grad, alpha, eps, workers)
    w, V = jacobi_eigen(0.5 * (L + L.T))
    return HessianProbe(L, eps, w, V)


# -- spectrum ---------------------------------------------------------------


@dataclass
class PulseSpectrum:
    frequencies: np.ndarray  # GHz
    magnitudes: np.ndarray
    samples: np.ndarray
    dt: float

    @property
    def resolution(self) -> float:
        """Bin width in GHz."""
        return float(self.frequencies[1] - self.frequencies[0])

    def peaks(self, rel_threshold: float = 0.01) -> np.ndarray:
        return spectrum_peaks(self.frequencies, self.magnitudes, rel_threshold)

    def parseval_error(self) -> float:
        """Relative mismatch between sample energy and full-DFT energy."""
        F = np.fft.fft(self.samples)
        e_time = float(np.sum(self.samples**2))
        e_freq = float(np.sum(np.abs(F) ** 2)) / self.samples.size
        if e_time == 0.0:
            return abs(e_freq)
        return abs(e_time - e_freq) / e_time

    def rows(self):
        return list(zip(self.frequencies.tolist(), self.magnitudes.tolist()))


def _single_sided(samples, dt):
    n = samples.size
    if n < 2 or n & (n - 1):
        raise ValueError(f"sample count must be a power of two >= 2, got {n}")
    F = np.fft.rfft(samples)
    mag = np.abs(F) / n
    mag[1 : n // 2] *= 2.0
    freqs = np.arange(mag.size) / (n * dt)
    return freqs, mag


def pulse_spectrum(
    controls: ControlParameterization, alpha, omega_a: float, sample_count: int = 1 << 15
) -> PulseSpectrum:
    """Single-sided magnitude spectrum of the laboratory-frame drive.

    ``sample_count`` points are taken at ``t_j = j T / n`` on ``[0, T)``
    (no window).  Time is in ns, so the frequency axis is in GHz.
    """
    n = int(sample_count)
    if n < 2 or n & (n - 1):
        raise ValueError(f"sample count must be a power of two >= 2, got {n}")
    dt = controls.T / n
    t = np.arange(n) * dt
    f = lab_frame_control(t, controls, alpha, omega_a)
    nyquist = 0.5 / dt
    if omega_a / (2 * np.pi) >= nyquist:
        raise ValueError(
            f"{n} samples give a Nyquist frequency of {nyquist:.3g} GHz, below the carrier"
        )
    freqs, mag = _single_sided(f, dt)
    return PulseSpectrum(freqs, mag, f, dt)


def spectrum_peaks(freqs, mags, rel_threshold: float = 0.01) -> np.ndarray:
    """Frequencies of local maxima whose magnitude exceeds ``rel_threshold * max``."""
    mags = np.asarray(mags)
    top = mags.max(initial=0.0)
    if top == 0.0:
        return np.empty(0)
    inner = (mags[1:-1] > mags[:-2]) & (mags[1:-1] >= mags[2:])
    idx = np.nonzero(inner)[0] + 1
    idx = idx[mags[idx] > rel_threshold * top]
    return np.asarray(freqs)[idx]


def transition_frequencies(omega_a: float, xi_a: float, count: int) -> np.ndarray:
    """Lab-frame transitions ``(omega_a - k xi_a) / 2 pi`` in GHz, ``k = 0..count-1``."""
    k = np.arange(count)
    return (omega_a - k * xi_a) / (2 * np.pi)
