"""Energy densities, coefficient families, and admissibility checks.

Two coefficient families are built in.  The drill-active family gives the
quadratic density a strictly positive definite Hessian, so the energy
controls all twelve strain components, including rotations about the
surface normal.  The drill-free family is the degenerate boundary case
whose quadratic form ignores exactly the drill channels; it is the
quadratic truncation of the full drill-invariant density.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import kernels

__all__ = [
    "MaterialModel",
    "QuadraticFormSpectrum",
    "CoercivityReport",
    "MARGIN_NAMES",
    "coefficients_drill_active",
    "coefficients_drill_free",
    "custom_coefficients",
    "counterpart",
    "energy_quadratic",
    "energy_reduced_quadratic",
    "energy_drill_free",
    "stress_resultants",
    "strain_hessian",
    "hessian_spectrum",
    "coercivity_margins",
    "check_coercivity",
]


@dataclass(frozen=True)
class MaterialModel:
    """Eight quadratic coefficients plus the constants they came from.

    alpha weight the stretch strain (force/length), beta the bending strain
    (force*length).  Engineering constants are retained when the model was
    built from them so the paired family can be derived for comparisons.
    """

    alpha: tuple[float, float, float, float]
    beta: tuple[float, float, float, float]
    family: str = "custom"  # drill_active | drill_free | custom
    youngs: float | None = None
    poisson: float | None = None
    thickness: float | None = None
    shear_correction: float = 1.0          # transverse-shear factor, drill-active set
    drill_correction: float = 1.0          # drill-couple factor, drill-active set
    reduced_shear_correction: float = 1.0  # transverse-shear factor, drill-free set

    def __post_init__(self):
        if len(self.alpha) != 4 or len(self.beta) != 4:
            raise ValueError("need exactly 4 stretch and 4 bending coefficients")
        if not all(np.isfinite(self.alpha)) or not all(np.isfinite(self.beta)):
            raise ValueError("coefficients must be finite")

    @property
    def stretching_stiffness(self) -> float:
        """C = E h / (1 - nu^2)."""
        self._need_constants()
        return self.youngs * self.thickness / (1.0 - self.poisson**2)

    @property
    def bending_stiffness(self) -> float:
        """D = E h^3 / (12 (1 - nu^2))."""
        self._need_constants()
        return self.youngs * self.thickness**3 / (12.0 * (1.0 - self.poisson**2))

    def _need_constants(self):
        if self.youngs is None or self.poisson is None or self.thickness is None:
            raise ValueError(
                f"material of family {self.family!r} carries no engineering constants"
            )


def _check_constants(youngs, poisson, thickness, factors):
    if not youngs > 0:
        raise ValueError("Young modulus must be positive")
    if not 0.0 <= poisson < 0.5:
        raise ValueError(f"Poisson ratio must satisfy 0 <= value < 0.5, got {poisson}")
    if not thickness > 0:
        raise ValueError("thickness must be positive")
    for name, val in factors.items():
        if not val > 0:
            raise ValueError(f"{name} must be positive, got {val}")


def coefficients_drill_active(
    youngs, poisson, thickness,
    shear_correction=1.0, drill_correction=1.0, reduced_shear_correction=1.0,
) -> MaterialModel:
    """Coefficient set whose quadratic energy is uniformly positive definite."""
    _check_constants(
        youngs, poisson, thickness,
        {"shear_correction": shear_correction, "drill_correction": drill_correction},
    )
    C = youngs * thickness / (1.0 - poisson**2)
    D = youngs * thickness**3 / (12.0 * (1.0 - poisson**2))
    return MaterialModel(
        alpha=(C * poisson, 0.0, C * (1.0 - poisson),
               shear_correction * C * (1.0 - poisson)),
        beta=(D * poisson, 0.0, D * (1.0 - poisson),
              drill_correction * D * (1.0 - poisson)),
        family="drill_active",
        youngs=youngs, poisson=poisson, thickness=thickness,
        shear_correction=shear_correction, drill_correction=drill_correction,
        reduced_shear_correction=reduced_shear_correction,
    )


def coefficients_drill_free(
    youngs, poisson, thickness, reduced_shear_correction,
    shear_correction=1.0, drill_correction=1.0,
) -> MaterialModel:
    """Coefficient set reproducing the quadratic part of the drill-free energy.

    Three of the eight admissibility margins vanish identically for this
    family, so the quadratic form is only positive semidefinite.
    """
    _check_constants(
        youngs, poisson, thickness,
        {"reduced_shear_correction": reduced_shear_correction},
    )
    C = youngs * thickness / (1.0 - poisson**2)
    D = youngs * thickness**3 / (12.0 * (1.0 - poisson**2))
    return MaterialModel(
        alpha=(C * poisson, C * (1.0 - poisson) / 2.0, C * (1.0 - poisson) / 2.0,
               C * (1.0 - poisson) * reduced_shear_correction / 2.0),
        beta=(D * (poisson - 1.0) / 2.0, -D * poisson, D, 0.0),
        family="drill_free",
        youngs=youngs, poisson=poisson, thickness=thickness,
        shear_correction=shear_correction, drill_correction=drill_correction,
        reduced_shear_correction=reduced_shear_correction,
    )


def custom_coefficients(alpha, beta) -> MaterialModel:
    return MaterialModel(alpha=tuple(map(float, alpha)), beta=tuple(map(float, beta)))


def counterpart(m: MaterialModel) -> MaterialModel:
    """The other built-in family, from the same engineering constants."""
    m._need_constants()
    if m.family == "drill_active":
        return coefficients_drill_free(
            m.youngs, m.poisson, m.thickness, m.reduced_shear_correction,
            m.shear_correction, m.drill_correction,
        )
    if m.family == "drill_free":
        return coefficients_drill_active(
            m.youngs, m.poisson, m.thickness,
            m.shear_correction, m.drill_correction, m.reduced_shear_correction,
        )
    raise ValueError(f"no counterpart for family {m.family!r}")


# ---------------------------------------------------------------------------
# energies


def _total(w_quad, density):
    # fixed-order pairwise reduction: reproducible independent of threading
    return float(np.add.reduce(w_quad * density))


def energy_quadratic(state, m: MaterialModel, surf):
    """Quadratic density in the pullback strains; returns (density, total)."""
    W, _, _ = kernels.quadratic_stress(
        state.stretch, state.bending, state.normal,
        np.asarray(m.alpha), np.asarray(m.beta),
    )
    return W, _total(surf.w_quad, W)


def stress_resultants(state, m: MaterialModel):
    """Surface stress and couple resultants N = Q dW/dE, M = Q dW/dK."""
    _, SE, SK = kernels.quadratic_stress(
        state.stretch, state.bending, state.normal,
        np.asarray(m.alpha), np.asarray(m.beta),
    )
    Q = state.rotation
    return np.einsum("nij,njk->nik", Q, SE), np.einsum("nij,njk->nik", Q, SK)


def energy_reduced_quadratic(state, m: MaterialModel, surf):
    """Literal reduced quadratic density written in stiffness constants.

    Must agree pointwise with energy_quadratic under the drill-free
    coefficient family built from the same constants.
    """
    C = m.stretching_stiffness
    D = m.bending_stiffness
    nu = m.poisson
    kap = m.reduced_shear_correction
    Ep = state.stretch_tangential
    en = state.stretch_normal_row
    Kp = state.bending_tangential
    tr_E = np.einsum("nii->n", Ep)
    trsq_E = np.einsum("nij,nji->n", Ep, Ep)
    frob_E = np.einsum("nij,nij->n", Ep, Ep)
    tr_K = np.einsum("nii->n", Kp)
    trsq_K = np.einsum("nij,nji->n", Kp, Kp)
    frob_K = np.einsum("nij,nij->n", Kp, Kp)
    W = 0.5 * (
        C * (nu * tr_E**2
             + 0.5 * (1.0 - nu) * trsq_E
             + 0.5 * (1.0 - nu) * frob_E)
        + 0.5 * C * (1.0 - nu) * kap * np.einsum("ni,ni->n", en, en)
        + D * (frob_K - 0.5 * (1.0 - nu) * tr_K**2 - nu * trsq_K)
    )
    return W, _total(surf.w_quad, W)


def energy_drill_free(alt, m: MaterialModel, surf):
    """Full drill-invariant density in the alternative measures.

    Super-quadratic in the pullback strains; its quadratic truncation is
    energy_reduced_quadratic.  Returns (density, total).
    """
    C = m.stretching_stiffness
    D = m.bending_stiffness
    nu = m.poisson
    kap = m.reduced_shear_correction
    EE, g, Ps = alt.membrane, alt.shear, alt.bending
    W = 0.5 * (
        C * ((1.0 - nu) * np.einsum("nij,nij->n", EE, EE)
             + nu * np.einsum("nii->n", EE) ** 2)
        + 0.5 * C * (1.0 - nu) * kap * np.einsum("ni,ni->n", g, g)
        + D * (0.5 * (1.0 - nu) * np.einsum("nij,nij->n", Ps, Ps)
               + 0.5 * (1.0 - nu) * np.einsum("nij,nji->n", Ps, Ps)
               + nu * np.einsum("nii->n", Ps) ** 2)
    )
    return W, _total(surf.w_quad, W)


# ---------------------------------------------------------------------------
# admissibility

MARGIN_NAMES = (
    "stretch_trace", "stretch_symmetric", "stretch_skew", "stretch_shear",
    "bending_trace", "bending_symmetric", "bending_skew", "bending_drill",
)


@dataclass(frozen=True)
class QuadraticFormSpectrum:
    """Eigen-decomposition of the 12x12 density Hessian in strain components.

    Component order: 6 stretch entries X[i, d] flattened as 2*i + d over
    director row i and tangent column d, then the 6 bending entries.
    """

    eigenvalues: np.ndarray        # (12,) ascending
    stretch_block: np.ndarray      # (6,) ascending
    bending_block: np.ndarray      # (6,) ascending
    null_directions: np.ndarray    # (k,12) eigenvectors of |eigenvalue| <= gate
    null_gate: float

    @property
    def smallest(self) -> float:
        return float(self.eigenvalues[0])


class _SingleNodeState:
    """Minimal strain-state stand-in for per-component Hessian probing."""

    def __init__(self, z):
        self.stretch = np.zeros((1, 3, 3))
        self.bending = np.zeros((1, 3, 3))
        self.stretch[0, :, :2] = z[:6].reshape(3, 2)
        self.bending[0, :, :2] = z[6:].reshape(3, 2)
        self.normal = np.array([[0.0, 0.0, 1.0]])


def strain_hessian(m: MaterialModel) -> np.ndarray:
    """12x12 Hessian of the quadratic density, assembled by polarization."""
    alpha, beta = np.asarray(m.alpha), np.asarray(m.beta)

    def W(z):
        s = _SingleNodeState(z)
        w, _, _ = kernels.quadratic_stress(s.stretch, s.bending, s.normal, alpha, beta)
        return float(w[0])

    H = np.empty((12, 12))
    basis = np.eye(12)
    diag = np.array([W(2.0 * basis[p]) / 2.0 for p in range(12)])
    for p in range(12):
        H[p, p] = diag[p]
        for q in range(p):
            H[p, q] = H[q, p] = W(basis[p] + basis[q]) - diag[p] / 2.0 - diag[q] / 2.0
    return H


def hessian_spectrum(m: MaterialModel, null_gate: float = 1e-12) -> QuadraticFormSpectrum:
    H = strain_hessian(m)
    sym_res = np.abs(H - H.T).max()
    if sym_res > 1e-12 * max(1.0, np.abs(H).max()):
        raise ValueError(f"density Hessian not symmetric: residual {sym_res:.3e}")
    vals, vecs = np.linalg.eigh(0.5 * (H + H.T))
    gate = null_gate * max(1.0, float(np.abs(vals).max()))
    null = vecs[:, np.abs(vals) <= gate].T
    return QuadraticFormSpectrum(
        eigenvalues=vals,
        stretch_block=np.sort(np.linalg.eigvalsh(H[:6, :6])),
        bending_block=np.sort(np.linalg.eigvalsh(H[6:, 6:])),
        null_directions=null,
        null_gate=gate,
    )


@dataclass(frozen=True)
class CoercivityReport:
    margins: dict  # name -> value of the left side of each inequality
    satisfied: bool
    spectrum: QuadraticFormSpectrum
    consistent: bool           # inequality verdict == spectrum verdict
    coercivity_constant: float | None  # smallest eigenvalue / 2 when satisfied

    def lines(self):
        rows = [
            f"{name:<20s} {val:+.6e}  {'ok' if val > 0 else 'VIOLATED'}"
            for name, val in self.margins.items()
        ]
        rows.append(f"smallest Hessian eigenvalue {self.spectrum.smallest:+.6e}")
        rows.append("admissible" if self.satisfied else "not uniformly positive")
        return rows


def coercivity_margins(m: MaterialModel) -> dict:
    a1, a2, a3, a4 = m.alpha
    b1, b2, b3, b4 = m.beta
    vals = (
        2.0 * a1 + a2 + a3, a2 + a3, a3 - a2, a4,
        2.0 * b1 + b2 + b3, b2 + b3, b3 - b2, b4,
    )
    return dict(zip(MARGIN_NAMES, vals))


def check_coercivity(m: MaterialModel) -> CoercivityReport:
    """Evaluate the eight admissibility margins and cross-check the Hessian.

    The margin multiset and the Hessian spectrum coincide analytically, so
    the two verdicts must always agree; `consistent` records this with the
    margins and eigenvalues compared against the same near-zero band.
    """
    margins = coercivity_margins(m)
    spectrum = hessian_spectrum(m)
    band = 1e-12 * max(
        1.0,
        float(np.abs(spectrum.eigenvalues).max()),
        max(abs(v) for v in margins.values()),
    )
    satisfied = all(v > 0.0 for v in margins.values())
    margin_verdict = all(v > band for v in margins.values())
    eig_verdict = spectrum.smallest > band
    return CoercivityReport(
        margins=margins,
        satisfied=satisfied,
        spectrum=spectrum,
        consistent=margin_verdict == eig_verdict,
        coercivity_constant=0.5 * spectrum.smallest if satisfied else None,
    )
