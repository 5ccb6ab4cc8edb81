"""Compiled time-marching loops for the Stormer-Verlet scheme and its adjoint.

Hamiltonians have the form ``K = diag(drift) + p(t) P`` and ``S = q(t) Q``.
Control samples are given on the half-step lattice: entry ``2n`` is time
``t_n`` and entry ``2n + 1`` is ``t_n + h/2``, so arrays have length
``2M + 1``.  State and adjoint blocks are ``N x E`` (one column per
initial condition).
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _fill(K, S, drift, P, Q, p, q):
    N = drift.shape[0]
    for i in range(N):
        for j in range(N):
            K[i, j] = p * P[i, j]
            S[i, j] = q * Q[i, j]
        K[i, i] += drift[i]


@njit(cache=True)
def _shifted(S, c):
    """I + c S."""
    N = S.shape[0]
    A = c * S
    for i in range(N):
        A[i, i] += 1.0
    return A


@njit(cache=True)
def _lsolve(A, B):
    # numba's solve returns Fortran order; keep every block C-contiguous
    return np.ascontiguousarray(np.linalg.solve(A, B))


@njit(cache=True)
def _weighted_sq(w, X):
    acc = 0.0
    for i in range(X.shape[0]):
        for j in range(X.shape[1]):
            acc += w[i] * X[i, j] * X[i, j]
    return acc


@njit(cache=True)
def _frob(A, B):
    acc = 0.0
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            acc += A[i, j] * B[i, j]
    return acc


@njit(cache=True)
def _track_pop(maxpop, u, v):
    for i in range(u.shape[0]):
        for j in range(u.shape[1]):
            pop = u[i, j] * u[i, j] + v[i, j] * v[i, j]
            if pop > maxpop[i, j]:
                maxpop[i, j] = pop


@njit(cache=True, nogil=True)
def forward_sweep(drift, P, Q, p, q, h, w, u0, v0, store_stages, trace_stride):
    """March ``M = (len(p) - 1) // 2`` steps from ``(u0, v0)``.

    Returns ``(u, v, wsum, maxpop, trace, stages)`` where ``wsum`` is the
    stage-weighted guard sum (multiply by ``h/T`` for J2h), ``maxpop`` the
    per-level, per-column maximum population over all time levels, ``trace``
    the populations every ``trace_stride`` steps (empty if 0) and ``stages``
    the ``(U1, U2, V1)`` of every step (empty unless ``store_stages``).
    """
    N, E = u0.shape
    M = (p.shape[0] - 1) // 2
    Kn = np.empty((N, N))
    Sn = np.empty((N, N))
    Kh = np.empty((N, N))
    Sh = np.empty((N, N))
    Kn1 = np.empty((N, N))
    Sn1 = np.empty((N, N))
    u = u0.copy()
    v = v0.copy()
    half = 0.5 * h
    wsum = 0.0
    maxpop = np.zeros((N, E))
    _track_pop(maxpop, u, v)
    if trace_stride > 0:
        trace = np.empty((M // trace_stride + 1, N, E))
        trace[0] = u * u + v * v
    else:
        trace = np.empty((0, N, E))
    if store_stages:
        stages = np.empty((M, 3, N, E))
    else:
        stages = np.empty((0, 3, N, E))
    _fill(Kn1, Sn1, drift, P, Q, p[0], q[0])
    for n in range(M):
        Kn[:, :] = Kn1
        Sn[:, :] = Sn1
        _fill(Kh, Sh, drift, P, Q, p[2 * n + 1], q[2 * n + 1])
        _fill(Kn1, Sn1, drift, P, Q, p[2 * n + 2], q[2 * n + 2])
        U1 = u
        V1 = _lsolve(_shifted(Sh, -half), v + half * (Kh @ U1))
        rhs = u + half * (Sn @ U1 - (Kn + Kn1) @ V1)
        U2 = _lsolve(_shifted(Sn1, -half), rhs)
        v = v + half * (Kh @ (U1 + U2) + 2.0 * (Sh @ V1))
        wsum += 0.5 * _weighted_sq(w, U1) + 0.5 * _weighted_sq(w, U2) + _weighted_sq(w, V1)
        if store_stages:
            stages[n, 0] = U1
            stages[n, 1] = U2
            stages[n, 2] = V1
        u = U2
        _track_pop(maxpop, u, v)
        if trace_stride > 0 and (n + 1) % trace_stride == 0:
            trace[(n + 1) // trace_stride] = u * u + v * v
    return u, v, wsum, maxpop, trace, stages


@njit(cache=True, nogil=True)
def backward_sweep(drift, P, Q, p, q, h, wf, uM, vM, muM, nuM, store_stages):
    """Reverse the state from ``(uM, vM)`` while marching the adjoint from ``(muM, nuM)``.

    ``wf`` is the guard forcing diagonal ``(h/T) W``.  Returns
    ``(lam_p, lam_q, u0, v0, mu0, nu0, stages)`` where ``lam_p[i]`` and
    ``lam_q[i]`` are the derivatives of the discrete objective with respect
    to the control samples ``p_i``, ``q_i`` on the half-step lattice, and
    ``stages`` holds the reconstructed ``(U1, U2, V1)`` if requested.
    """
    N, E = uM.shape
    M = (p.shape[0] - 1) // 2
    Kn = np.empty((N, N))
    Sn = np.empty((N, N))
    Kh = np.empty((N, N))
    Sh = np.empty((N, N))
    Kn1 = np.empty((N, N))
    Sn1 = np.empty((N, N))
    lam_p = np.zeros(p.shape[0])
    lam_q = np.zeros(q.shape[0])
    u1 = uM.copy()
    v1 = vM.copy()
    mu = muM.copy()
    nu = nuM.copy()
    half = 0.5 * h
    if store_stages:
        stages = np.empty((M, 3, N, E))
    else:
        stages = np.empty((0, 3, N, E))
    _fill(Kn, Sn, drift, P, Q, p[2 * M], q[2 * M])
    for n in range(M - 1, -1, -1):
        Kn1[:, :] = Kn
        Sn1[:, :] = Sn
        _fill(Kh, Sh, drift, P, Q, p[2 * n + 1], q[2 * n + 1])
        _fill(Kn, Sn, drift, P, Q, p[2 * n], q[2 * n])
        KK = Kn + Kn1

        # reconstruct the forward step n
        V1 = _lsolve(_shifted(Sh, half), v1 - half * (Kh @ u1))
        rhs = u1 - half * (Sn1 @ u1) + half * (KK @ V1)
        u0 = _lsolve(_shifted(Sn, half), rhs)
        v0 = V1 - half * (Kh @ u0 + Sh @ V1)
        U1 = u0
        U2 = u1
        if store_stages:
            stages[n, 0] = U1
            stages[n, 1] = U2
            stages[n, 2] = V1

        # adjoint step n + 1 -> n with guard forcing
        fU1 = np.empty((N, E))
        fU2 = np.empty((N, E))
        fV1 = np.empty((N, E))
        for i in range(N):
            for j in range(E):
                fU1[i, j] = wf[i] * U1[i, j]
                fU2[i, j] = wf[i] * U2[i, j]
                fV1[i, j] = 2.0 * wf[i] * V1[i, j]
        Y2 = nu
        X = _lsolve(_shifted(Sn1, half), mu + half * (Kh @ Y2) + fU2)
        Y1 = _lsolve(_shifted(Sh, half), nu - half * (Sh @ Y2) - half * (KK @ X) + fV1)
        mu_new = mu - half * ((Sn + Sn1) @ X - Kh @ (Y1 + Y2)) + fU1 + fU2

        # gradient with respect to the control samples touched by step n
        PV1 = P @ V1
        g = -half * _frob(PV1, X)
        lam_p[2 * n] += g
        lam_p[2 * n + 2] += g
        lam_q[2 * n] += half * _frob(Q @ U1, X)
        lam_q[2 * n + 2] += half * _frob(Q @ U2, X)
        lam_p[2 * n + 1] += half * (_frob(P @ U1, Y1) + _frob(P @ U2, Y2))
        QV1 = Q @ V1
        lam_q[2 * n + 1] += half * (_frob(QV1, Y1) + _frob(QV1, Y2))

        mu = mu_new
        nu = Y1
        u1 = u0
        v1 = v0
    return lam_p, lam_q, u1, v1, mu, nu, stages
