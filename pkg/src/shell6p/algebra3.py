"""Small dense algebra on 3-vectors, 3x3 tensors, and rotations.

Everything here works on plain numpy arrays.  Rotations are 3x3 arrays with
orthonormal columns and determinant +1; `is_rotation` checks that contract
and `polar_project` restores it after round-off drift.  Batched versions of
the hot operations live in the kernel backends; the functions in this module
are the scalar reference implementations used for construction, validation
and tests.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "IllConditionedRotation",
    "skew",
    "axl",
    "exp_so3",
    "log_so3",
    "drill_rotation",
    "polar_project",
    "is_rotation",
]

# series switch for the Rodrigues coefficients
_SMALL_ANGLE = 1e-8
# angles closer to pi than this are rejected by log_so3
_NEAR_PI = 1e-3


class IllConditionedRotation(ValueError):
    """Rotation angle too close to pi for a well-conditioned logarithm."""


def skew(v) -> np.ndarray:
    """Map a 3-vector to the antisymmetric matrix with skew(v) @ x = v x x."""
    v = np.asarray(v, dtype=float)
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def axl(S, tol: float = 1e-10) -> np.ndarray:
    """Inverse of `skew`.

    The symmetric residual of S must stay below `tol` (relative to ``|S|``);
    the axial vector is read off the skew part, so a residual inside the
    gate is discarded rather than folded into the result.
    """
    S = np.asarray(S, dtype=float)
    sym = 0.5 * (S + S.T)
    scale = max(np.abs(S).max(), 1.0)
    if np.abs(sym).max() > tol * scale:
        raise ValueError(
            f"matrix is not skew-symmetric: residual {np.abs(sym).max():.3e} "
            f"exceeds gate {tol * scale:.3e}"
        )
    return np.array([S[2, 1] - S[1, 2], S[0, 2] - S[2, 0], S[1, 0] - S[0, 1]]) * 0.5


def exp_so3(w) -> np.ndarray:
    """Rotation by the vector w (axis w/|w|, angle |w|), Rodrigues form.

    Below |w| = 1e-8 the trigonometric coefficients are replaced by their
    truncated series; the switch is far above the range where either form
    loses accuracy.
    """
    w = np.asarray(w, dtype=float)
    th = float(np.linalg.norm(w))
    W = skew(w)
    if th < _SMALL_ANGLE:
        return np.eye(3) + W + 0.5 * (W @ W)
    # (1-cos)/th^2 written via sin(th/2) to stay accurate for small th
    s = np.sin(th) / th
    h = np.sin(0.5 * th) / th
    return np.eye(3) + s * W + 2.0 * h * h * (W @ W)


def log_so3(R, strict: bool = True) -> np.ndarray:
    """Rotation vector of R, the inverse of `exp_so3`.

    Angles within 1e-3 of pi are flagged as ill-conditioned: the axial part
    of R degenerates there.  With ``strict=False`` a best-effort value is
    returned instead (axis recovered from the symmetric part), for output
    paths that must not raise.
    """
    R = np.asarray(R, dtype=float)
    w_tilde = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) * 0.5
    s = float(np.linalg.norm(w_tilde))
    c = 0.5 * (np.trace(R) - 1.0)
    th = float(np.arctan2(s, c))
    if th < _SMALL_ANGLE:
        return w_tilde
    if th > np.pi - _NEAR_PI:
        if strict:
            raise IllConditionedRotation(
                f"rotation angle {th:.6f} within 1e-3 of pi"
            )
        # axis from the dominant column of R + I = 2 cos^2(th/2) I + ... ~ 2 u u^T
        B = R + np.eye(3)
        k = int(np.argmax(np.einsum("ij,ij->j", B, B)))
        u = B[:, k] / np.linalg.norm(B[:, k])
        if u @ w_tilde < 0.0:
            u = -u
        return th * u
    return (th / s) * w_tilde


def drill_rotation(d3, theta: float) -> np.ndarray:
    """Rotation by angle theta about the unit director d3.

    Closed form d3 (x) d3 + cos(theta) (1 - d3 (x) d3) + sin(theta) skew(d3);
    identical to exp_so3(theta * d3).
    """
    d3 = np.asarray(d3, dtype=float)
    P = np.outer(d3, d3)
    return P + np.cos(theta) * (np.eye(3) - P) + np.sin(theta) * skew(d3)


def polar_project(M, tol: float = 1e-12, max_iter: int = 20) -> np.ndarray:
    """Orthogonal polar factor of M (det M > 0 required).

    Newton iteration X <- (X + X^-T)/2, quadratically convergent near the
    orthogonal group; used to re-orthonormalize rotations after repeated
    multiplicative updates.
    """
    X = np.asarray(M, dtype=float).copy()
    if np.linalg.det(X) <= 0.0:
        raise ValueError("polar projection onto SO(3) needs det > 0")
    for _ in range(max_iter):
        X_next = 0.5 * (X + np.linalg.inv(X).T)
        if np.abs(X_next - X).max() < tol:
            X = X_next
            break
        X = X_next
    return X


def is_rotation(R, tol: float = 1e-9) -> bool:
    """True when R^T R = I and det R = +1 within tol."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    err = np.abs(R.T @ R - np.eye(3)).max()
    return bool(err <= tol and abs(np.linalg.det(R) - 1.0) <= tol)
