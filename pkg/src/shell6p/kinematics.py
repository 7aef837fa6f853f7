"""Configuration fields and the strain measures derived from them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backend import kernels
from .surface import ReferenceSurface, surface_gradient

__all__ = [
    "FormMismatch",
    "Configuration",
    "StrainState",
    "AltStrainState",
    "deformation_gradient",
    "strain_measures",
    "alt_strain_measures",
    "field_alt_measures",
    "linearized_measures",
    "write_strain_csv",
    "STRAIN_CSV_COLUMNS",
]


class FormMismatch(ValueError):
    """The two algebraic forms of an alternative measure disagree."""


def _skew_mats(v: np.ndarray) -> np.ndarray:
    S = np.zeros(v.shape[:-1] + (3, 3))
    S[..., 0, 1], S[..., 0, 2] = -v[..., 2], v[..., 1]
    S[..., 1, 0], S[..., 1, 2] = v[..., 2], -v[..., 0]
    S[..., 2, 0], S[..., 2, 1] = -v[..., 1], v[..., 0]
    return S


@dataclass
class Configuration:
    """Per-node position y and total rotation R (columns = directors d_i)."""

    y: np.ndarray  # (N,3)
    R: np.ndarray  # (N,3,3)

    @classmethod
    def reference(cls, surf: ReferenceSurface) -> "Configuration":
        return cls(y=surf.y0.copy(), R=surf.Q0.copy())

    def copy(self) -> "Configuration":
        return Configuration(y=self.y.copy(), R=self.R.copy())

    def displacement(self, surf: ReferenceSurface) -> np.ndarray:
        return self.y - surf.y0

    def elastic_rotation(self, surf: ReferenceSurface) -> np.ndarray:
        """Rotation Q = R Q0^T carrying reference directors to deformed ones."""
        return np.einsum("nij,nkj->nik", self.R, surf.Q0)

    @property
    def director3(self) -> np.ndarray:
        return self.R[:, :, 2]


@dataclass
class StrainState:
    """Stretch and bending strain fields plus the rotation they came from.

    `stretch` is dimensionless, `bending` carries 1/length.  Both have
    their second slot tangential by construction.
    """

    stretch: np.ndarray   # (N,3,3)
    bending: np.ndarray   # (N,3,3)
    rotation: np.ndarray  # (N,3,3) elastic rotation used in the pullback
    normal: np.ndarray    # (N,3) reference normal

    def _split(self, X):
        row = np.einsum("ni,nij->nj", self.normal, X)
        return X - self.normal[:, :, None] * row[:, None, :], row

    @property
    def stretch_tangential(self) -> np.ndarray:
        return self._split(self.stretch)[0]

    @property
    def stretch_normal_row(self) -> np.ndarray:
        return self._split(self.stretch)[1]

    @property
    def bending_tangential(self) -> np.ndarray:
        return self._split(self.bending)[0]

    @property
    def bending_normal_row(self) -> np.ndarray:
        return self._split(self.bending)[1]


@dataclass
class AltStrainState:
    """Drill-invariant strain set: membrane, transverse shear, two bendings.

    membrane = (F^T F - a)/2, shear = F^T d3, bending = F^T G + b + membrane b,
    drill_bending the same with G replaced by d3 x G (G = Grad_s d3).
    `gaps` records the worst disagreement of each measure against its
    equivalent form written in the pullback strains, when that was checked.
    """

    membrane: np.ndarray        # (N,3,3) symmetric, dimensionless
    shear: np.ndarray           # (N,3) dimensionless
    bending: np.ndarray         # (N,3,3) 1/length
    drill_bending: np.ndarray | None  # (N,3,3) 1/length; None for linearized
    gaps: dict = field(default_factory=dict)


def deformation_gradient(cfg: Configuration, surf: ReferenceSurface) -> np.ndarray:
    """F = Grad_s y, per node."""
    return surface_gradient(cfg.y, surf)


def strain_measures(cfg: Configuration, surf: ReferenceSurface) -> StrainState:
    """Pullback strain measures of a configuration.

    stretch = (Q^T d_alpha y - d_alpha y0) (x) a^alpha; the reference
    differences are subtracted with the same stencil, so the reference
    configuration and exact rigid motions give identically zero strain.
    bending differences the rotation field through relative-rotation logs,
    keeping the axial-vector argument exactly skew.
    """
    Q = cfg.elastic_rotation(surf)
    dy = kernels.fd_apply(np.ascontiguousarray(cfg.y), surf.fd_idx, surf.fd_coef)
    E = kernels.stretch_strain(Q, dy, surf.dy0, surf.a_con)
    logs, ok = kernels.relative_logs(Q, surf.fd_idx)
    if not np.all(ok):
        bad = int(np.argmin(ok.reshape(ok.shape[0], -1).all(axis=1)))
        raise ValueError(
            f"rotation between stencil neighbors of node {bad} is near pi; "
            "the rotation field is too rough for this grid"
        )
    K = kernels.bending_strain(logs, surf.fd_coef, surf.a_con)
    return StrainState(stretch=E, bending=K, rotation=Q, normal=surf.normal.copy())


def alt_strain_measures(
    state: StrainState, surf: ReferenceSurface, fail_tol: float = 1e-8
) -> AltStrainState:
    """Alternative measures from a strain state, evaluated both ways.

    The deformed fields are reconstructed pointwise from the strains
    (F = Q(stretch + a), G = Q(c bending - b), d3 = Q n), every measure is
    computed from those fields and, independently, directly from the strain
    components; the two results must agree.  The field form is stored.
    """
    E, K, Q = state.stretch, state.bending, state.rotation
    n, a, c, b = surf.normal, surf.proj, surf.drill, surf.curv

    F = np.einsum("nij,njk->nik", Q, E + a)
    G = np.einsum("nij,njk->nik", Q, np.einsum("nij,njk->nik", c, K) - b)
    d3 = np.einsum("nij,nj->ni", Q, n)
    alt = _alt_from_fields(F, d3, G, surf)

    Et = np.transpose(E, (0, 2, 1))
    Epar = np.einsum("nij,njk->nik", a, E)
    sym_p = 0.5 * (Epar + np.transpose(Epar, (0, 2, 1)))
    skw_p = 0.5 * (Epar - np.transpose(Epar, (0, 2, 1)))
    half_EtE = 0.5 * np.einsum("nij,nik->njk", E, E)
    membrane2 = half_EtE + sym_p
    shear2 = np.einsum("nij,ni->nj", E, n)
    Eta = Et + a
    bending2 = np.einsum("nij,njk->nik", Eta, np.einsum("nij,njk->nik", c, K)) \
        + np.einsum("nij,njk->nik", half_EtE + skw_p, b)
    Kpar = np.einsum("nij,njk->nik", a, K)
    drill2 = np.einsum("nij,njk->nik", Eta, Kpar) \
        - np.einsum("nij,njk->nik", half_EtE + skw_p,
                    np.einsum("nij,njk->nik", c, b))

    gaps = {
        "membrane": float(np.abs(alt.membrane - membrane2).max()),
        "shear": float(np.abs(alt.shear - shear2).max()),
        "bending": float(np.abs(alt.bending - bending2).max()),
        "drill_bending": float(np.abs(alt.drill_bending - drill2).max()),
    }
    worst = max(gaps, key=gaps.get)
    if gaps[worst] > fail_tol:
        raise FormMismatch(
            f"{worst} measure differs between its two forms by {gaps[worst]:.3e} "
            f"(limit {fail_tol:.1e})"
        )
    alt.gaps = gaps
    return alt


def _alt_from_fields(F, d3, G, surf) -> AltStrainState:
    a, n, b = surf.proj, surf.normal, surf.curv
    membrane = 0.5 * (np.einsum("nij,nik->njk", F, F) - a)
    shear = np.einsum("nij,ni->nj", F, d3)
    memb_b = np.einsum("nij,njk->nik", membrane, b)
    bending = np.einsum("nij,nik->njk", F, G) + b + memb_b
    nxb = np.einsum("nij,njk->nik", _skew_mats(n), b)
    drill_bending = (
        np.einsum("nij,nik->njk", F, np.einsum("nij,njk->nik", _skew_mats(d3), G))
        + nxb
        + np.einsum("nij,njk->nik", membrane, nxb)
    )
    return AltStrainState(
        membrane=membrane, shear=shear, bending=bending, drill_bending=drill_bending
    )


def field_alt_measures(cfg: Configuration, surf: ReferenceSurface) -> AltStrainState:
    """Alternative measures straight from the position and director fields.

    Uses only F = Grad_s y, d3 = R e3 and G = Grad_s d3 (no rotation
    pullback), so the result is unchanged under any drill rotation of R
    to round-off.  This is the evaluation path the drill-free energy and
    the invariance certificates rely on.
    """
    F = surface_gradient(cfg.y, surf)
    d3 = cfg.director3
    G = surface_gradient(d3, surf)
    return _alt_from_fields(F, np.ascontiguousarray(d3), G, surf)


def linearized_measures(u, psi, surf: ReferenceSurface) -> AltStrainState:
    """Small-displacement, small-rotation limits of the alternative measures.

    membrane ~ sym(a Grad_s u), shear ~ n Grad_s u + c psi,
    bending ~ c Grad_s(a psi) + skew(a Grad_s u) b.  The drill companion
    measure has no linearized form here and is returned as None.
    """
    a, n, c, b = surf.proj, surf.normal, surf.drill, surf.curv
    Gu = surface_gradient(np.asarray(u, dtype=float), surf)
    aGu = np.einsum("nij,njk->nik", a, Gu)
    membrane = 0.5 * (aGu + np.transpose(aGu, (0, 2, 1)))
    shear = np.einsum("ni,nij->nj", n, Gu) + np.einsum(
        "nij,nj->ni", c, np.asarray(psi, dtype=float)
    )
    apsi = np.einsum("nij,nj->ni", a, np.asarray(psi, dtype=float))
    bending = np.einsum("nij,njk->nik", c, surface_gradient(apsi, surf)) \
        + np.einsum("nij,njk->nik", 0.5 * (aGu - np.transpose(aGu, (0, 2, 1))), b)
    return AltStrainState(
        membrane=membrane, shear=shear, bending=bending, drill_bending=None
    )


STRAIN_CSV_COLUMNS = (
    ["x1", "x2"]
    + [f"E{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
    + [f"K{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
)


def write_strain_csv(path, surf: ReferenceSurface, state: StrainState) -> None:
    """One row per node: x1, x2, stretch row-major, bending row-major."""
    x1, x2 = surf.grid.coords()
    table = np.column_stack(
        [x1, x2, state.stretch.reshape(-1, 9), state.bending.reshape(-1, 9)]
    )
    np.savetxt(
        path, table, delimiter=",", header=",".join(STRAIN_CSV_COLUMNS),
        comments="", fmt="%.17g",
    )
