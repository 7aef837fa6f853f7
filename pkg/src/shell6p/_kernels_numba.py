"""Numba-compiled per-node kernels.

Mirrors `_kernels_numpy` function for function.  Loops are written out with
explicit 3x3 index arithmetic so the JIT produces allocation-free bodies;
`cache=True` keeps compiled artifacts across processes.
"""
from __future__ import annotations

import numpy as np
from numba import njit

_NB = dict(cache=True, fastmath=False)


@njit(inline="always")
def _mat_tvec(A, v, out):
    # out = A^T v
    for j in range(3):
        out[j] = A[0, j] * v[0] + A[1, j] * v[1] + A[2, j] * v[2]


@njit(inline="always")
def _mat_vec(A, v, out):
    for i in range(3):
        out[i] = A[i, 0] * v[0] + A[i, 1] * v[1] + A[i, 2] * v[2]


@njit(inline="always")
def _cross(a, b, out):
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


@njit(inline="always")
def _exp_one(w0, w1, w2, R):
    th2 = w0 * w0 + w1 * w1 + w2 * w2
    th = np.sqrt(th2)
    if th < 1e-8:
        A = 1.0 - th2 / 6.0
        B = 0.5 - th2 / 24.0
    else:
        A = np.sin(th) / th
        half = np.sin(0.5 * th) / th
        B = 2.0 * half * half
    R[0, 0] = 1.0 + B * (-w2 * w2 - w1 * w1)
    R[0, 1] = -A * w2 + B * w0 * w1
    R[0, 2] = A * w1 + B * w0 * w2
    R[1, 0] = A * w2 + B * w0 * w1
    R[1, 1] = 1.0 + B * (-w2 * w2 - w0 * w0)
    R[1, 2] = -A * w0 + B * w1 * w2
    R[2, 0] = -A * w1 + B * w0 * w2
    R[2, 1] = A * w0 + B * w1 * w2
    R[2, 2] = 1.0 + B * (-w1 * w1 - w0 * w0)


@njit(**_NB)
def exp_field(w):
    M = w.shape[0]
    R = np.empty((M, 3, 3))
    for n in range(M):
        _exp_one(w[n, 0], w[n, 1], w[n, 2], R[n])
    return R


@njit(inline="always")
def _log_one(P, out):
    # rotation vector of P; returns False when the angle is near pi
    w0 = 0.5 * (P[2, 1] - P[1, 2])
    w1 = 0.5 * (P[0, 2] - P[2, 0])
    w2 = 0.5 * (P[1, 0] - P[0, 1])
    s = np.sqrt(w0 * w0 + w1 * w1 + w2 * w2)
    c = 0.5 * (P[0, 0] + P[1, 1] + P[2, 2] - 1.0)
    th = np.arctan2(s, c)
    if th < 1e-6:
        scale = 1.0 + th * th / 6.0
    else:
        scale = th / s
    out[0] = scale * w0
    out[1] = scale * w1
    out[2] = scale * w2
    return th <= np.pi - 1e-3


@njit(**_NB)
def log_field(R):
    M = R.shape[0]
    w = np.empty((M, 3))
    ok = np.empty(M, dtype=np.bool_)
    for n in range(M):
        ok[n] = _log_one(R[n], w[n])
    return w, ok


@njit(inline="always")
def _inv_transpose(X, out):
    # adjugate / det, transposed
    c00 = X[1, 1] * X[2, 2] - X[1, 2] * X[2, 1]
    c01 = X[1, 2] * X[2, 0] - X[1, 0] * X[2, 2]
    c02 = X[1, 0] * X[2, 1] - X[1, 1] * X[2, 0]
    c10 = X[0, 2] * X[2, 1] - X[0, 1] * X[2, 2]
    c11 = X[0, 0] * X[2, 2] - X[0, 2] * X[2, 0]
    c12 = X[0, 1] * X[2, 0] - X[0, 0] * X[2, 1]
    c20 = X[0, 1] * X[1, 2] - X[0, 2] * X[1, 1]
    c21 = X[0, 2] * X[1, 0] - X[0, 0] * X[1, 2]
    c22 = X[0, 0] * X[1, 1] - X[0, 1] * X[1, 0]
    det = X[0, 0] * c00 + X[0, 1] * c01 + X[0, 2] * c02
    inv = 1.0 / det
    out[0, 0] = c00 * inv
    out[0, 1] = c01 * inv
    out[0, 2] = c02 * inv
    out[1, 0] = c10 * inv
    out[1, 1] = c11 * inv
    out[1, 2] = c12 * inv
    out[2, 0] = c20 * inv
    out[2, 1] = c21 * inv
    out[2, 2] = c22 * inv


@njit(**_NB)
def polar_field(A, iters=4):
    M = A.shape[0]
    X = A.copy()
    Y = np.empty((3, 3))
    for n in range(M):
        for _ in range(iters):
            _inv_transpose(X[n], Y)
            for i in range(3):
                for j in range(3):
                    X[n, i, j] = 0.5 * (X[n, i, j] + Y[i, j])
    return X


@njit(**_NB)
def fd_apply(field, idx, coef):
    N = field.shape[0]
    C = field.shape[1]
    out = np.zeros((N, 2, C))
    for n in range(N):
        for d in range(2):
            for k in range(3):
                j = idx[n, d, k]
                cf = coef[n, d, k]
                for c in range(C):
                    out[n, d, c] += cf * field[j, c]
    return out


@njit(**_NB)
def fd_scatter(tab, idx, coef):
    N = tab.shape[0]
    C = tab.shape[2]
    out = np.zeros((N, C))
    for n in range(N):
        for d in range(2):
            for k in range(3):
                j = idx[n, d, k]
                cf = coef[n, d, k]
                for c in range(C):
                    out[j, c] += cf * tab[n, d, c]
    return out


@njit(**_NB)
def stretch_strain(Q, dy, dy0, acon):
    N = Q.shape[0]
    E = np.zeros((N, 3, 3))
    u = np.empty(3)
    for n in range(N):
        for d in range(2):
            _mat_tvec(Q[n], dy[n, d], u)
            for i in range(3):
                ui = u[i] - dy0[n, d, i]
                for j in range(3):
                    E[n, i, j] += ui * acon[n, d, j]
    return E


@njit(**_NB)
def relative_logs(Q, idx):
    N = Q.shape[0]
    u = np.empty((N, 2, 3, 3))
    ok = np.empty((N, 2, 3), dtype=np.bool_)
    P = np.empty((3, 3))
    for n in range(N):
        for d in range(2):
            for k in range(3):
                j = idx[n, d, k]
                for a in range(3):
                    for b in range(3):
                        P[a, b] = (
                            Q[n, 0, a] * Q[j, 0, b]
                            + Q[n, 1, a] * Q[j, 1, b]
                            + Q[n, 2, a] * Q[j, 2, b]
                        )
                ok[n, d, k] = _log_one(P, u[n, d, k])
    return u, ok


@njit(**_NB)
def bending_strain(u, coef, acon):
    N = u.shape[0]
    K = np.zeros((N, 3, 3))
    for n in range(N):
        for d in range(2):
            k0 = coef[n, d, 0] * u[n, d, 0, 0] + coef[n, d, 1] * u[n, d, 1, 0] + coef[n, d, 2] * u[n, d, 2, 0]
            k1 = coef[n, d, 0] * u[n, d, 0, 1] + coef[n, d, 1] * u[n, d, 1, 1] + coef[n, d, 2] * u[n, d, 2, 1]
            k2 = coef[n, d, 0] * u[n, d, 0, 2] + coef[n, d, 1] * u[n, d, 1, 2] + coef[n, d, 2] * u[n, d, 2, 2]
            for j in range(3):
                K[n, 0, j] += k0 * acon[n, d, j]
                K[n, 1, j] += k1 * acon[n, d, j]
                K[n, 2, j] += k2 * acon[n, d, j]
    return K


@njit(inline="always")
def _quad_block(X, nrm, c0, c1, c2, c3, S, Xt, Xn):
    # tangential split, energy contribution and stress for one strain tensor
    for j in range(3):
        Xn[j] = nrm[0] * X[0, j] + nrm[1] * X[1, j] + nrm[2] * X[2, j]
    for i in range(3):
        for j in range(3):
            Xt[i, j] = X[i, j] - nrm[i] * Xn[j]
    tr_t = Xt[0, 0] + Xt[1, 1] + Xt[2, 2]
    tr_sq = 0.0
    frob = 0.0
    for i in range(3):
        for j in range(3):
            tr_sq += Xt[i, j] * Xt[j, i]
            frob += Xt[i, j] * Xt[i, j]
    sh = Xn[0] * Xn[0] + Xn[1] * Xn[1] + Xn[2] * Xn[2]
    w = 0.5 * (c0 * tr_t * tr_t + c1 * tr_sq + c2 * frob + c3 * sh)
    # S = c0 tr_t P + c1 P Xt^T + c2 Xt + c3 n (x) Xn,  P = 1 - n (x) n
    for i in range(3):
        for l in range(3):
            p_dot = Xt[l, i] - nrm[i] * (nrm[0] * Xt[l, 0] + nrm[1] * Xt[l, 1] + nrm[2] * Xt[l, 2])
            pil = (1.0 if i == l else 0.0) - nrm[i] * nrm[l]
            S[i, l] = c0 * tr_t * pil + c1 * p_dot + c2 * Xt[i, l] + c3 * nrm[i] * Xn[l]
    return w


@njit(**_NB)
def quadratic_stress(E, K, normal, alpha, beta):
    N = E.shape[0]
    W = np.empty(N)
    SE = np.empty((N, 3, 3))
    SK = np.empty((N, 3, 3))
    Xt = np.empty((3, 3))
    Xn = np.empty(3)
    for n in range(N):
        w = _quad_block(E[n], normal[n], alpha[0], alpha[1], alpha[2], alpha[3], SE[n], Xt, Xn)
        w += _quad_block(K[n], normal[n], beta[0], beta[1], beta[2], beta[3], SK[n], Xt, Xn)
        W[n] = w
    return W, SE, SK


@njit(inline="always")
def _jli_t_apply(u, m, out):
    # (I + skew(u)/2 + g skew(u)^2) m
    th2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2]
    th = np.sqrt(th2)
    if th < 0.05:
        g = 1.0 / 12.0 + th2 / 720.0 + th2 * th2 / 30240.0
    else:
        g = 1.0 / th2 - (1.0 + np.cos(th)) / (2.0 * th * np.sin(th))
    v10 = u[1] * m[2] - u[2] * m[1]
    v11 = u[2] * m[0] - u[0] * m[2]
    v12 = u[0] * m[1] - u[1] * m[0]
    v20 = u[1] * v12 - u[2] * v11
    v21 = u[2] * v10 - u[0] * v12
    v22 = u[0] * v11 - u[1] * v10
    out[0] = m[0] + 0.5 * v10 + g * v20
    out[1] = m[1] + 0.5 * v11 + g * v21
    out[2] = m[2] + 0.5 * v12 + g * v22


@njit(**_NB)
def rotation_gradient_bending(u, idx, coef, m, Q):
    N = Q.shape[0]
    g = np.zeros((N, 3))
    v = np.empty(3)
    vq = np.empty(3)
    for n in range(N):
        for d in range(2):
            for k in range(3):
                j = idx[n, d, k]
                cf = coef[n, d, k]
                _jli_t_apply(u[n, d, k], m[n, d], v)
                _mat_vec(Q[n], v, vq)
                g[j, 0] += cf * vq[0]
                g[j, 1] += cf * vq[1]
                g[j, 2] += cf * vq[2]
                g[n, 0] -= cf * vq[0]
                g[n, 1] -= cf * vq[1]
                g[n, 2] -= cf * vq[2]
    return g
