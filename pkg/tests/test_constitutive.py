"""Coefficient families, energy identities, admissibility margins."""
import numpy as np
import pytest

from shell6p import constitutive as co
from shell6p.invariance import random_smooth_configuration
from shell6p.kinematics import Configuration, alt_strain_measures, strain_measures


# reference constants: unit Young modulus, nu = 0.3, thickness 0.1
E0, NU0, H0 = 1.0, 0.3, 0.1

# stiffness values implied by those constants, frozen to full precision
C_EXPECTED = 0.10989010989010989
D_EXPECTED = 9.15750915750916e-05


def test_drill_active_coefficient_values():
    m = co.coefficients_drill_active(E0, NU0, H0)
    assert m.stretching_stiffness == pytest.approx(C_EXPECTED, rel=1e-15)
    assert m.bending_stiffness == pytest.approx(D_EXPECTED, rel=1e-15)
    a1, a2, a3, a4 = m.alpha
    b1, b2, b3, b4 = m.beta
    assert a1 == pytest.approx(0.03296703296703297, rel=1e-15)   # C nu
    assert a2 == 0.0
    assert a3 == pytest.approx(0.07692307692307691, rel=1e-14)   # C (1-nu)
    assert a4 == pytest.approx(a3, rel=1e-15)                    # unit shear factor
    assert b1 == pytest.approx(D_EXPECTED * NU0, rel=1e-14)
    assert b2 == 0.0
    assert b3 == pytest.approx(D_EXPECTED * (1.0 - NU0), rel=1e-14)
    assert b4 == pytest.approx(b3, rel=1e-15)


def test_drill_free_coefficient_values():
    m = co.coefficients_drill_free(E0, NU0, H0, reduced_shear_correction=1.0)
    a1, a2, a3, a4 = m.alpha
    b1, b2, b3, b4 = m.beta
    assert a1 == pytest.approx(0.03296703296703297, rel=1e-15)
    assert a2 == pytest.approx(0.03846153846153846, rel=1e-14)   # C (1-nu)/2
    assert a3 == a2
    assert a4 == pytest.approx(a2, rel=1e-15)
    assert b1 == pytest.approx(D_EXPECTED * (NU0 - 1.0) / 2.0, rel=1e-14)
    assert b2 == pytest.approx(-2.747252747252748e-05, rel=1e-14)  # -D nu
    assert b3 == pytest.approx(D_EXPECTED, rel=1e-14)
    assert b4 == 0.0


def test_drill_free_beta4_always_zero(rng):
    for _ in range(10):
        E, nu, h = rng.uniform(0.5, 2e5), rng.uniform(0.0, 0.49), rng.uniform(1e-3, 0.2)
        m = co.coefficients_drill_free(E, nu, h, reduced_shear_correction=rng.uniform(0.1, 2))
        assert m.beta[3] == 0.0


def test_constant_validation_messages():
    with pytest.raises(ValueError, match="0 <= value < 0.5"):
        co.coefficients_drill_active(E0, 0.7, H0)
    with pytest.raises(ValueError, match="Young modulus"):
        co.coefficients_drill_active(-1.0, NU0, H0)
    with pytest.raises(ValueError, match="thickness"):
        co.coefficients_drill_active(E0, NU0, 0.0)
    with pytest.raises(ValueError, match="shear_correction"):
        co.coefficients_drill_active(E0, NU0, H0, shear_correction=-2.0)


def test_counterpart_round_trip(active_material):
    other = co.counterpart(active_material)
    assert other.family == "drill_free"
    back = co.counterpart(other)
    assert back.family == "drill_active"
    assert np.allclose(back.alpha, active_material.alpha, rtol=1e-15)
    assert np.allclose(back.beta, active_material.beta, rtol=1e-15)
    with pytest.raises(ValueError, match="no engineering constants"):
        co.counterpart(co.custom_coefficients([1, 0, 1, 1], [1, 0, 1, 1]))


def test_custom_model_has_no_constants():
    m = co.custom_coefficients([1, 0, 1, 1], [1, 0, 1, 1])
    with pytest.raises(ValueError, match="no engineering constants"):
        _ = m.stretching_stiffness


from shell6p.kinematics import StrainState


def _random_states(n, rng, scale=0.3):
    return StrainState(
        stretch=scale * rng.normal(size=(n, 3, 3)),
        bending=scale * rng.normal(size=(n, 3, 3)),
        rotation=np.tile(np.eye(3), (n, 1, 1)),
        normal=np.tile(np.array([0.0, 0.0, 1.0]), (n, 1)),
    )


class _UnitSurf:
    """Quadrature stub: unit weights, so totals are plain sums."""

    def __init__(self, n):
        self.w_quad = np.ones(n)


def test_active_energy_positive_definite(rng, active_material):
    s = _random_states(64, rng)
    W, _ = co.energy_quadratic(s, active_material, _UnitSurf(64))
    assert np.all(W > 0.0)
    s0 = _random_states(1, rng, scale=0.0)
    W0, _ = co.energy_quadratic(s0, active_material, _UnitSurf(1))
    assert W0[0] == 0.0


def test_stress_is_energy_gradient(rng, active_material):
    # directional finite differences of the density against both resultants
    s = _random_states(8, rng)
    _, SE, SK = __import__("shell6p.backend", fromlist=["kernels"]).kernels.quadratic_stress(
        s.stretch, s.bending, s.normal,
        np.asarray(active_material.alpha), np.asarray(active_material.beta),
    )
    t = 1e-7
    for _ in range(6):
        dE = rng.normal(size=(8, 3, 3))
        dK = rng.normal(size=(8, 3, 3))
        sp, sm = _random_states(8, rng), _random_states(8, rng)
        sp.stretch, sp.bending = s.stretch + t * dE, s.bending + t * dK
        sm.stretch, sm.bending = s.stretch - t * dE, s.bending - t * dK
        Wp, _ = co.energy_quadratic(sp, active_material, _UnitSurf(8))
        Wm, _ = co.energy_quadratic(sm, active_material, _UnitSurf(8))
        fd = (Wp - Wm) / (2.0 * t)
        analytic = np.einsum("nij,nij->n", SE, dE) + np.einsum("nij,nij->n", SK, dK)
        assert np.abs(fd - analytic).max() < 1e-6 * max(1.0, np.abs(analytic).max())


def test_reduced_quadratic_equals_drill_free_family(rng):
    # pointwise identity between the literal reduced form and the quadratic
    # density under the matching coefficient set
    m = co.coefficients_drill_free(E0, NU0, H0, reduced_shear_correction=0.8)
    n = 1000
    s = _random_states(n, rng)
    W_red, _ = co.energy_reduced_quadratic(s, m, _UnitSurf(n))
    W_quad, _ = co.energy_quadratic(s, m, _UnitSurf(n))
    rel = np.abs(W_red - W_quad) / np.maximum(np.abs(W_quad), 1e-30)
    assert rel.max() < 1e-12


def test_drill_free_energy_quadratic_remainder(flat_surf):
    """The reduced quadratic is the exact quadratic part of the full density."""
    m = co.coefficients_drill_free(E0, NU0, H0, reduced_shear_correction=1.0)
    base = random_smooth_configuration(flat_surf, seed=9, displacement=1.0,
                                       rotation=1.0)
    du = base.y - flat_surf.y0
    # signed remainder changes sign near eps ~ 0.1 for this sample, so the
    # ladder stays below that crossing where the cubic term dominates
    scales = (3e-2, 1e-2, 3e-3, 1e-3)
    remainders = []
    for eps in scales:
        from shell6p.backend import kernels
        w = eps * kernels.log_field(
            np.einsum("nij,nkj->nik", base.R, flat_surf.Q0)
        )[0]
        cfg = Configuration(
            y=flat_surf.y0 + eps * du,
            R=np.einsum("nij,njk->nik", kernels.exp_field(w), flat_surf.Q0),
        )
        st = strain_measures(cfg, flat_surf)
        alt = alt_strain_measures(st, flat_surf)
        _, full = co.energy_drill_free(alt, m, flat_surf)
        _, quad = co.energy_quadratic(st, m, flat_surf)
        remainders.append(abs(full - quad))
    for (e_hi, e_lo), (r_hi, r_lo) in zip(
        zip(scales, scales[1:]), zip(remainders, remainders[1:])
    ):
        order = np.log(r_hi / r_lo) / np.log(e_hi / e_lo)
        assert order >= 2.7


def test_margins_and_spectrum_drill_active(active_material):
    rep = co.check_coercivity(active_material)
    assert rep.satisfied
    assert all(v > 0 for v in rep.margins.values())
    assert rep.spectrum.smallest > 0
    assert rep.consistent
    assert rep.coercivity_constant == pytest.approx(0.5 * rep.spectrum.smallest)
    assert rep.spectrum.null_directions.shape[0] == 0


def test_margins_and_spectrum_drill_free(free_material):
    rep = co.check_coercivity(free_material)
    assert not rep.satisfied
    # three margins vanish identically for this family
    assert abs(rep.margins["stretch_skew"]) < 1e-14
    assert abs(rep.margins["bending_trace"]) < 1e-14
    assert rep.margins["bending_drill"] == 0.0
    assert all(v > -1e-14 for v in rep.margins.values())
    assert abs(rep.spectrum.smallest) < 1e-12
    assert rep.spectrum.null_directions.shape[0] == 4
    assert rep.consistent
    assert rep.coercivity_constant is None


def test_margin_verdict_matches_eigenvalue_verdict(rng):
    # the two admissibility tests are algebraically the same set
    disagreements = 0
    for _ in range(1000):
        m = co.custom_coefficients(rng.normal(size=4), rng.normal(size=4))
        if not co.check_coercivity(m).consistent:
            disagreements += 1
    assert disagreements == 0


def test_margin_names_cover_both_blocks():
    assert len(co.MARGIN_NAMES) == 8
    m = co.coefficients_drill_active(E0, NU0, H0)
    vals = co.coercivity_margins(m)
    a1, _, a3, a4 = m.alpha
    assert vals["stretch_trace"] == pytest.approx(2 * a1 + a3)
    assert vals["stretch_shear"] == a4
