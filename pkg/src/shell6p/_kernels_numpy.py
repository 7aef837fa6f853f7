"""Vectorized numpy implementations of the per-node kernels.

Fallback backend: same contracts as `_kernels_numba`, einsum/gather based.
Shapes follow the flat node layout, N nodes, directions d in {0,1} and the
three-slot difference stencils produced by the surface builder.
"""
from __future__ import annotations

import numpy as np

_EYE = np.eye(3)


def _skew_field(w):
    # (M,3) -> (M,3,3)
    M = w.shape[0]
    S = np.zeros((M, 3, 3))
    S[:, 0, 1] = -w[:, 2]
    S[:, 0, 2] = w[:, 1]
    S[:, 1, 0] = w[:, 2]
    S[:, 1, 2] = -w[:, 0]
    S[:, 2, 0] = -w[:, 1]
    S[:, 2, 1] = w[:, 0]
    return S


def exp_field(w):
    """Rodrigues exponential of rotation vectors, (M,3) -> (M,3,3)."""
    w = np.ascontiguousarray(w, dtype=np.float64)
    th = np.linalg.norm(w, axis=1)
    small = th < 1e-8
    th_safe = np.where(small, 1.0, th)
    A = np.where(small, 1.0 - th * th / 6.0, np.sin(th_safe) / th_safe)
    half = np.sin(0.5 * th_safe) / th_safe
    B = np.where(small, 0.5 - th * th / 24.0, 2.0 * half * half)
    S = _skew_field(w)
    return _EYE[None] + A[:, None, None] * S + B[:, None, None] * (S @ S)


def log_field(R):
    """Rotation vectors of a field of rotations.

    Returns (w, ok); ok goes False where the angle is within 1e-3 of pi,
    in which case the value is unreliable and the caller must reject it.
    """
    R = np.ascontiguousarray(R, dtype=np.float64)
    wt = 0.5 * np.stack(
        [
            R[:, 2, 1] - R[:, 1, 2],
            R[:, 0, 2] - R[:, 2, 0],
            R[:, 1, 0] - R[:, 0, 1],
        ],
        axis=1,
    )
    s = np.linalg.norm(wt, axis=1)
    c = 0.5 * (R[:, 0, 0] + R[:, 1, 1] + R[:, 2, 2] - 1.0)
    th = np.arctan2(s, c)
    ok = th <= np.pi - 1e-3
    small = th < 1e-6
    s_safe = np.where(small, 1.0, s)
    scale = np.where(small, 1.0 + th * th / 6.0, th / s_safe)
    return scale[:, None] * wt, ok


def polar_field(A, iters: int = 4):
    """Per-node polar factors via Newton X <- (X + X^-T)/2."""
    X = np.ascontiguousarray(A, dtype=np.float64).copy()
    for _ in range(iters):
        X = 0.5 * (X + np.transpose(np.linalg.inv(X), (0, 2, 1)))
    return X


def fd_apply(field, idx, coef):
    """Stencil differences of a nodal field: (N,C) -> (N,2,C)."""
    return np.einsum("ndk,ndkc->ndc", coef, field[idx])


def fd_scatter(tab, idx, coef):
    """Adjoint of fd_apply: accumulate (N,2,C) tables back onto nodes."""
    N, _, C = tab.shape
    out = np.zeros((N, C))
    for d in range(2):
        for k in range(3):
            np.add.at(out, idx[:, d, k], coef[:, d, k, None] * tab[:, d, :])
    return out


def stretch_strain(Q, dy, dy0, acon):
    """In-surface strain from rotated position differences.

    E = sum_d (Q^T dy_d - dy0_d) (x) acon_d per node.
    """
    u = np.einsum("ndi,nij->ndj", dy, Q) - dy0
    return np.einsum("ndi,ndj->nij", u, acon)


def relative_logs(Q, idx):
    """Rotation vectors of Q(n)^T Q(j) over each stencil slot.

    Returns (u, ok) with u of shape (N,2,3,3); slot vectors are exactly the
    logs of the relative rotations, so the axial argument stays skew.
    """
    N = Q.shape[0]
    P = np.einsum("nba,ndkbc->ndkac", Q, Q[idx])
    u, ok = log_field(P.reshape(-1, 3, 3))
    return u.reshape(N, 2, 3, 3), ok.reshape(N, 2, 3)


def bending_strain(u, coef, acon):
    """Bending-curvature strain from relative-rotation logs."""
    kvec = np.einsum("ndk,ndki->ndi", coef, u)
    return np.einsum("ndi,ndj->nij", kvec, acon)


def quadratic_stress(E, K, normal, alpha, beta):
    """Quadratic energy density and its strain derivatives.

    2W = a1 tr(Et)^2 + a2 tr(Et^2) + a3 |Et|^2 + a4 |nE|^2  (+ K analogue),
    Et the tangential part E - n (x) (nE).  Returns (W, dW/dE, dW/dK).
    """
    W = np.zeros(E.shape[0])
    out = []
    for X, c in ((E, alpha), (K, beta)):
        Xn = np.einsum("ni,nij->nj", normal, X)
        Xt = X - normal[:, :, None] * Xn[:, None, :]
        tr_t = np.einsum("nii->n", Xt)
        tr_sq = np.einsum("nij,nji->n", Xt, Xt)
        frob = np.einsum("nij,nij->n", Xt, Xt)
        sh = np.einsum("ni,ni->n", Xn, Xn)
        W += 0.5 * (c[0] * tr_t**2 + c[1] * tr_sq + c[2] * frob + c[3] * sh)
        P = _EYE[None] - normal[:, :, None] * normal[:, None, :]
        S = (
            c[0] * tr_t[:, None, None] * P
            + c[1] * np.einsum("nij,nlj->nil", P, Xt)
            + c[2] * Xt
            + c[3] * normal[:, :, None] * Xn[:, None, :]
        )
        out.append(S)
    return W, out[0], out[1]


def _jli_transpose_apply(u, m):
    # (I + skew(u)/2 + g(th) skew(u)^2) m,  th = |u|; m broadcast over slots
    th = np.linalg.norm(u, axis=-1)
    small = th < 0.05
    th_safe = np.where(small, 1.0, th)
    th2 = th * th
    g = np.where(
        small,
        1.0 / 12.0 + th2 / 720.0 + th2 * th2 / 30240.0,
        1.0 / (th_safe * th_safe)
        - (1.0 + np.cos(th_safe)) / (2.0 * th_safe * np.sin(th_safe)),
    )
    v1 = np.cross(u, m)
    return m + 0.5 * v1 + g[..., None] * np.cross(u, v1)


def rotation_gradient_bending(u, idx, coef, m, Q):
    """Scatter the bending-energy rotation gradient through the log stencils.

    m[n,d] = weight * (dW/dK a^d) at node n.  Each stencil slot (n,d,k) with
    neighbor j contributes +- coef * Q_n Jl(u)^-T m to nodes j and n; the
    inverse-transpose left Jacobian is the exact derivative of the log.
    """
    N = Q.shape[0]
    v = _jli_transpose_apply(u, m[:, :, None, :])
    vq = np.einsum("nij,ndkj->ndki", Q, v)
    g = np.zeros((N, 3))
    for d in range(2):
        for k in range(3):
            np.add.at(g, idx[:, d, k], coef[:, d, k, None] * vq[:, d, k, :])
    g -= np.einsum("ndk,ndki->ni", coef, vq)
    return g
