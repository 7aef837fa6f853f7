"""Drill-rotation invariance and the characteristic-flow first integrals."""

import numpy as np
import pytest
import scipy.linalg

from shell6p import constitutive as co
from shell6p.backend import kernels
from shell6p.invariance import (
    DrillField,
    OdeState,
    apply_drill,
    drill_invariance_report,
    drift_of,
    first_integral_rank,
    integral_drifts,
    ode_flow,
    random_smooth_configuration,
    representation_closure_check,
)
from shell6p.kinematics import Configuration, strain_measures
from shell6p.surface import CylinderChart, Grid, build_reference


# ---------------------------------------------------------------------------
# drill invariance


@pytest.mark.parametrize("seed", [0, 3, 11, 27])
def test_drill_invariance_free_vs_active(cyl_surf, active_material, seed):
    cfg = random_smooth_configuration(cyl_surf, seed=seed)
    field = DrillField.random(cyl_surf.grid, seed=seed + 101,
                              amplitude=np.pi / 4)
    rep = drill_invariance_report(cfg, cyl_surf, active_material, field)
    # the turned configuration must genuinely differ, else the check is vacuous
    assert rep.strain_change > 1e-2
    assert rep.delta_free < 1e-9
    assert rep.delta_active > 1e-3
    assert rep.dual_form_gap < 1e-10


def test_drill_invariance_accepts_free_material(cyl_surf, free_material):
    cfg = random_smooth_configuration(cyl_surf, seed=5)
    field = DrillField.constant(cyl_surf.grid, angle=0.4)
    rep = drill_invariance_report(cfg, cyl_surf, free_material, field)
    assert rep.delta_free < 1e-9
    assert rep.delta_active > 1e-4


def test_zero_drill_field_is_identity(cyl_surf):
    cfg = random_smooth_configuration(cyl_surf, seed=2)
    turned = apply_drill(cfg, DrillField(theta=np.zeros(cyl_surf.grid.size)))
    assert np.array_equal(turned.y, cfg.y)
    assert np.abs(turned.R - cfg.R).max() < 1e-15


def test_tangent_axis_rotation_is_not_invariant(cyl_surf, active_material):
    # negative control: the free energy only ignores rotations about the
    # third director, not about tangent axes
    cfg = random_smooth_configuration(cyl_surf, seed=4)
    axis = cyl_surf.a_cov[:, 0]
    axis = axis / np.linalg.norm(axis, axis=1)[:, None]
    turned = Configuration(
        y=cfg.y,
        R=np.einsum("nij,njk->nik", kernels.exp_field(0.3 * axis), cfg.R),
    )
    m_free = co.counterpart(active_material)
    from shell6p.kinematics import field_alt_measures

    _, before = co.energy_drill_free(
        field_alt_measures(cfg, cyl_surf), m_free, cyl_surf
    )
    _, after = co.energy_drill_free(
        field_alt_measures(turned, cyl_surf), m_free, cyl_surf
    )
    assert abs(after - before) / abs(before) > 1e-3


def test_closure_of_reduced_arguments(cyl_surf):
    rows = representation_closure_check(cyl_surf, samples=4, seed=1)
    for row in rows:
        assert row["argument_gap"] < 1e-10
        assert row["stretch_change"] > 1e-2
        assert row["bending_change"] > 1e-2


# ---------------------------------------------------------------------------
# characteristic flow


def _ode_state(rng=None, scale=0.4):
    surf = build_reference(CylinderChart(0.9), Grid(10, 10, (0., 1.), (0., 1.)))
    node = surf.grid.size // 3 + 4
    rng = rng or np.random.default_rng(13)
    return surf, OdeState.at_node(
        surf, node,
        stretch=scale * rng.normal(size=(3, 3)),
        bending=scale * rng.normal(size=(3, 3)),
    )


def test_ode_conserved_quantities_drift(rng):
    _, state = _ode_state(rng)
    drifts = integral_drifts(ode_flow(state, steps=512))
    for name, value in drifts.items():
        assert value < 1e-8, name


def test_ode_row_integrals_exact(rng):
    # the generator annihilates the normal row, so those two integrals carry
    # no truncation term at all, only round-off; contrast with gram/coupling
    # at ~3e-8 for the same step count
    _, state = _ode_state(rng)
    drifts = integral_drifts(ode_flow(state, steps=128))
    assert drifts["stretch_row"] < 1e-14
    assert drifts["bending_row"] < 1e-14


def test_ode_halving_factor(rng):
    _, state = _ode_state(rng)
    hi = integral_drifts(ode_flow(state, steps=128))
    lo = integral_drifts(ode_flow(state, steps=256))
    for name in ("gram", "coupling"):
        assert hi[name] > 1e-12
        factor = hi[name] / lo[name]
        assert 8.0 <= factor <= 32.0, (name, factor)


def test_ode_matches_closed_form(rng):
    _, state = _ode_state(rng)
    traj = ode_flow(state, steps=512)
    R = scipy.linalg.expm(traj.s[-1] * state.drill)
    exact_E = R @ (state.stretch + state.proj) - state.proj
    exact_K = R @ (state.bending + state.frame_curv) - state.frame_curv
    assert np.abs(traj.stretch[-1] - exact_E).max() < 1e-8
    assert np.abs(traj.bending[-1] - exact_K).max() < 1e-8


def test_ode_equilibrium_is_fixed_point():
    surf, _ = _ode_state()
    node = surf.grid.size // 3 + 4
    state = OdeState.at_node(
        surf, node, stretch=-surf.proj[node], bending=-surf.frame_curv[node]
    )
    traj = ode_flow(state, steps=64)
    assert np.array_equal(traj.stretch[-1], state.stretch)
    assert np.array_equal(traj.bending[-1], state.bending)


def test_ode_negative_control(rng):
    # a quantity outside the conserved family must visibly drift
    _, state = _ode_state(rng)
    traj = ode_flow(state, steps=512)
    assert drift_of(traj, lambda E, K: np.trace(E)) > 1e-3


def test_ode_step_floor():
    _, state = _ode_state()
    with pytest.raises(ValueError, match="16 steps"):
        ode_flow(state, steps=8)


def test_first_integral_ranks():
    surf, _ = _ode_state()
    ranks = first_integral_rank(surf, seed=3)
    assert ranks == {"full_without_bending_row": 14, "tangential_all": 11}
