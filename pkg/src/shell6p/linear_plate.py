"""Sparse linear bending solver for flat charts, used as a cross-check.

Assembles the exact linearization of the shell functional about the flat
reference: per node the twelve strain components E(i,d) = D_d u_i - (psi x
e_d)_i and K(i,d) = D_d psi_i, stiffness A = B^T (w (x) H) B with H the
12x12 density Hessian, clamped nodes eliminated, and one sparse solve.
Shear deformation is retained, so thick plates are handled consistently
with the nonlinear model; the solution path (a direct factorization) shares
nothing with the descent loop it is used to validate.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .constitutive import MaterialModel, strain_hessian
from .surface import EDGE_NAMES, ReferenceSurface

__all__ = ["LinearPlateResult", "solve_linear_plate"]


@dataclass
class LinearPlateResult:
    displacement: np.ndarray    # (N,3)
    rotation: np.ndarray        # (N,3) infinitesimal rotation vectors
    strain_table: np.ndarray    # (N,12) linearized strain components
    energy: float               # quadratic strain energy of the solution

    @property
    def deflection(self) -> np.ndarray:
        return self.displacement[:, 2]

    @property
    def max_stretch_norm(self) -> float:
        """Largest nodal Frobenius norm of the linearized stretch strain."""
        e = self.strain_table[:, :6]
        return float(np.sqrt(np.einsum("nc,nc->n", e, e).max()))


def _require_flat(surf: ReferenceSurface) -> None:
    eye = np.eye(3)
    if (
        np.abs(surf.curv).max() > 1e-12
        or np.abs(surf.Q0 - eye).max() > 1e-12
        or np.abs(surf.normal - eye[2]).max() > 1e-12
    ):
        raise ValueError("the linear plate solver requires a flat chart")


def _strain_rows(surf: ReferenceSurface) -> sp.csr_matrix:
    """Sparse map from the (u, psi) DOF vector to the per-node strain rows."""
    n = surf.n_nodes
    idx, coef = surf.fd_idx, surf.fd_coef
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    # -(psi x e_d) = skew(e_d) psi; spin[d][i, j] multiplies psi_j in row i
    eye = np.eye(3)
    spin = [
        np.column_stack([np.cross(eye[d], eye[j]) for j in range(3)])
        for d in range(2)
    ]
    for node in range(n):
        base = 12 * node
        for i in range(3):
            for d in range(2):
                r_e = base + 2 * i + d
                r_k = base + 6 + 2 * i + d
                for k in range(3):
                    j = int(idx[node, d, k])
                    c = float(coef[node, d, k])
                    add(r_e, 3 * j + i, c)
                    add(r_k, 3 * n + 3 * j + i, c)
                for j in range(3):
                    s = spin[d][i, j]
                    if s != 0.0:
                        add(r_e, 3 * n + 3 * node + j, s)
    return sp.csr_matrix(
        (vals, (rows, cols)), shape=(12 * n, 6 * n)
    )


def solve_linear_plate(
    surf: ReferenceSurface,
    m: MaterialModel,
    body_force,
    clamped_edges=EDGE_NAMES,
    director_couple=None,
    pin_drill: bool = False,
) -> LinearPlateResult:
    """Clamped-edge small-deflection solution under dead loads.

    With drill-free coefficient sets the drill channels carry no stiffness
    and the assembled matrix is singular; pin_drill eliminates the normal
    rotation component everywhere so such models remain solvable.  Bending
    under transverse load never excites that component.
    """
    _require_flat(surf)
    for name in clamped_edges:
        if name not in EDGE_NAMES:
            raise ValueError(f"unknown edge name {name!r}")
    if not clamped_edges:
        raise ValueError("at least one clamped edge is required")

    n = surf.n_nodes
    B = _strain_rows(surf)
    H = sp.csr_matrix(strain_hessian(m))
    A = (B.T @ sp.kron(sp.diags(surf.w_quad), H, format="csr") @ B).tocsr()

    rhs = np.zeros(6 * n)
    f = np.asarray(body_force, dtype=float)
    f = np.broadcast_to(f, (n, 3)) if f.shape == (3,) else f
    rhs[: 3 * n] = (surf.w_quad[:, None] * f).ravel()
    if director_couple is not None:
        c = np.asarray(director_couple, dtype=float)
        c = np.broadcast_to(c, (n, 3)) if c.shape == (3,) else c
        rhs[3 * n:] = (surf.w_quad[:, None] * np.cross(np.eye(3)[2], c)).ravel()

    fixed_nodes = np.zeros(n, dtype=bool)
    for name in clamped_edges:
        fixed_nodes[surf.edges[name]] = True
    free = np.tile(np.repeat(~fixed_nodes, 3), 2)
    if pin_drill:
        free[3 * n + 2:: 3] = False

    z = np.zeros(6 * n)
    z[free] = spsolve(A[free][:, free].tocsc(), rhs[free])

    table = (B @ z).reshape(n, 12)
    energy = 0.5 * float(z @ (A @ z))
    return LinearPlateResult(
        displacement=z[: 3 * n].reshape(n, 3),
        rotation=z[3 * n:].reshape(n, 3),
        strain_table=table,
        energy=energy,
    )
