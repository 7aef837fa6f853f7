"""Self-checking suites behind the `verify` subcommand.

Each suite runs seeded, mutually independent cases and emits rows
{case, quantity, value, tolerance, pass}.  Quantities ending in `_floor`
pass when value >= tolerance (the check asserts the value is large, as in
a negative control); every other quantity passes when value <= tolerance.
Rows are sorted by (case, quantity) so the report is independent of
evaluation order, and nothing time- or machine-dependent is recorded:
rerunning a suite with the same seed reproduces the report byte for byte.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.linalg

from . import constitutive
from .invariance import (
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
    _reduced_arguments,
)
from .kinematics import Configuration
from .solver import energy_gradient, total_energy, ENERGY_MODELS, LoadSpec
from .surface import CylinderChart, FlatChart, Grid, build_reference
from . import backend

__all__ = ["SUITE_NAMES", "run_suite"]

SUITE_NAMES = ("drill", "ode", "representation", "coercivity", "gradient")


def _row(case: str, quantity: str, value: float, tolerance: float) -> dict:
    value = float(value)
    if quantity.endswith("_floor"):
        ok = value >= tolerance
    else:
        ok = value <= tolerance
    return {
        "case": case,
        "quantity": quantity,
        "value": value,
        "tolerance": float(tolerance),
        "pass": bool(ok),
    }


def _material():
    return constitutive.coefficients_drill_active(
        youngs=1.0e4, poisson=0.3, thickness=0.05
    )


def _flat(n=12):
    return build_reference(FlatChart(), Grid(n, n, (0.0, 1.0), (0.0, 1.0)))


def _run_cases(case_fns):
    """Evaluate independent case functions concurrently, then sort rows.

    Every case owns its seed and shares no mutable state, so scheduling
    cannot change any value; sorting makes the assembled report identical
    no matter which case finished first.
    """
    rows = []
    with ThreadPoolExecutor(max_workers=4) as pool:
        for chunk in pool.map(lambda fn: fn(), case_fns):
            rows.extend(chunk)
    return sorted(rows, key=lambda r: (r["case"], r["quantity"]))


# ---------------------------------------------------------------------------
# drill suite


def drill_suite(seed: int, cases: int = 6) -> list[dict]:
    surf = _flat()
    m = _material()

    def one(k):
        def run():
            cfg = random_smooth_configuration(surf, seed=seed + 101 * k)
            field = DrillField.random(
                surf.grid, seed=seed + 101 * k + 53, amplitude=np.pi / 4
            )
            rep = drill_invariance_report(cfg, surf, m, field)
            case = f"config{k:02d}"
            return [
                _row(case, "invariant_energy_change", rep.delta_free, 1e-9),
                _row(case, "active_energy_change_floor", rep.delta_active, 1e-3),
                _row(case, "dual_form_gap", rep.dual_form_gap, 1e-10),
                _row(case, "pullback_strain_change_floor", rep.strain_change, 1e-3),
            ]
        return run

    def reference():
        field = DrillField.random(surf.grid, seed=seed, amplitude=np.pi / 4)
        cfg = Configuration(y=surf.y0.copy(), R=surf.Q0.copy())
        rep = drill_invariance_report(cfg, surf, m, field)
        return [_row("reference", "invariant_energy_change", rep.delta_free, 1e-12)]

    return _run_cases([one(k) for k in range(cases)] + [reference])


# ---------------------------------------------------------------------------
# ode suite


def _ode_surface():
    return build_reference(CylinderChart(0.9), Grid(10, 10, (0.0, 1.0), (0.0, 1.2)))


def ode_suite(seed: int, states: int = 5) -> list[dict]:
    surf = _ode_surface()
    node = surf.n_nodes // 3 + 4

    def one(k):
        def run():
            rng = np.random.default_rng(seed + 211 * k)
            st = OdeState.at_node(
                surf, node, rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
            )
            case = f"state{k:02d}"
            rows = []
            drifts = integral_drifts(ode_flow(st, steps=512))
            for name, val in drifts.items():
                rows.append(_row(case, f"drift_{name}", val, 1e-8))
            # superconvergent pair: these drifts sit far above round-off,
            # so the halving factor is clean
            lo = integral_drifts(ode_flow(st, steps=128))
            hi = integral_drifts(ode_flow(st, steps=256))
            for name in ("gram", "coupling"):
                if hi[name] > 1e-12:
                    factor = lo[name] / hi[name]
                    rows.append(_row(case, f"halving_factor_{name}_floor", factor, 8.0))
                    rows.append(_row(case, f"halving_factor_{name}", factor, 32.0))
            # closed form: the generator is constant, so the flow is a
            # matrix exponential acting on the shifted strains
            R = scipy.linalg.expm(2.0 * np.pi * st.drill)
            traj = ode_flow(st, steps=512)
            exact_E = R @ (st.stretch + st.proj) - st.proj
            exact_K = R @ (st.bending + st.frame_curv) - st.frame_curv
            gap = max(
                float(np.abs(traj.stretch[-1] - exact_E).max()),
                float(np.abs(traj.bending[-1] - exact_K).max()),
            )
            rows.append(_row(case, "closed_form_gap", gap, 1e-8))
            rows.append(
                _row(
                    case,
                    "negative_control_drift_floor",
                    drift_of(traj, lambda E, K: np.trace(E)),
                    1e-3,
                )
            )
            return rows
        return run

    def equilibrium():
        st = OdeState.at_node(
            surf, node, -surf.proj[node], -surf.frame_curv[node]
        )
        drifts = integral_drifts(ode_flow(st, steps=64))
        return [
            _row("equilibrium", f"drift_{name}", val, 0.0)
            for name, val in drifts.items()
        ]

    return _run_cases([one(k) for k in range(states)] + [equilibrium])


# ---------------------------------------------------------------------------
# representation suite


def representation_suite(seed: int, samples: int = 4) -> list[dict]:
    surf = _flat()

    def closure():
        rows = []
        for rec in representation_closure_check(surf, samples=samples, seed=seed):
            case = f"sample{rec['sample']:02d}"
            rows.append(_row(case, "argument_gap", rec["argument_gap"], 1e-10))
            rows.append(
                _row(case, "pullback_strain_change_floor", rec["stretch_change"], 1e-2)
            )
        return rows

    def identity():
        cfg = random_smooth_configuration(surf, seed=seed + 7)
        turned = apply_drill(cfg, DrillField(theta=np.zeros(surf.n_nodes)))
        gap = max(
            float(np.abs(x - y).max())
            for x, y in zip(_reduced_arguments(cfg, surf), _reduced_arguments(turned, surf))
        )
        return [_row("identity", "argument_gap", gap, 0.0)]

    def ranks():
        counts = first_integral_rank(_ode_surface(), seed=seed)
        return [
            _row("ranks", "independent_count_floor", min(counts.values()), 11.0),
            _row("ranks", "tangential_rank_floor", counts["tangential_all"], 11.0),
        ]

    return _run_cases([closure, identity, ranks])


# ---------------------------------------------------------------------------
# coercivity suite


def coercivity_suite(seed: int, vectors: int = 1000) -> list[dict]:
    def active():
        rep = constitutive.check_coercivity(_material())
        rows = [
            _row("uniform", f"margin_{name}_floor", val, 1e-12)
            for name, val in rep.margins.items()
        ]
        rows.append(
            _row("uniform", "smallest_eigenvalue_floor", rep.spectrum.smallest, 1e-12)
        )
        rows.append(_row("uniform", "verdict_consistent_floor", rep.consistent, 1.0))
        return rows

    def free():
        rep = constitutive.check_coercivity(constitutive.counterpart(_material()))
        rows = []
        for name in ("stretch_skew", "bending_trace", "bending_drill"):
            rows.append(_row("semidefinite", f"zero_margin_{name}", abs(rep.margins[name]), 1e-14))
        for name, val in rep.margins.items():
            rows.append(_row("semidefinite", f"margin_{name}_floor", val, -1e-14))
        rows.append(
            _row("semidefinite", "smallest_eigenvalue_band",
                 abs(rep.spectrum.smallest), 1e-12)
        )
        rows.append(_row("semidefinite", "null_count_floor",
                         rep.spectrum.null_directions.shape[0], 3.0))
        return rows

    def random_verdicts():
        rng = np.random.default_rng(seed)
        disagreements = 0
        for _ in range(vectors):
            m = constitutive.custom_coefficients(
                rng.normal(size=4), rng.normal(size=4)
            )
            if not constitutive.check_coercivity(m).consistent:
                disagreements += 1
        return [_row("random_vectors", "verdict_disagreements", disagreements, 0.0)]

    return _run_cases([active, free, random_verdicts])


# ---------------------------------------------------------------------------
# gradient suite


def gradient_suite(seed: int, n: int = 12, directions: int = 6) -> list[dict]:
    surf = _flat(n)
    m = _material()
    loads = LoadSpec(
        body_force=np.array([0.0, 0.2, 0.6]),
        director_couple=np.array([0.05, 0.0, 0.1]),
        edge_force={"east": np.array([0.3, 0.0, 0.4])},
        edge_couple={"north": np.array([0.0, 0.1, 0.0])},
    )

    def one(model):
        def run():
            cfg = random_smooth_configuration(
                surf, seed=seed + 17, displacement=0.05, rotation=0.15
            )
            rng = np.random.default_rng(seed + 997 * ENERGY_MODELS.index(model))
            g_y, g_w = energy_gradient(cfg, surf, m, loads, None, model)
            worst = 0.0
            t = 1e-5
            for _ in range(directions):
                dv = rng.normal(size=(surf.n_nodes, 3))
                dw = rng.normal(size=(surf.n_nodes, 3))
                scale = np.sqrt(np.add.reduce((dv * dv + dw * dw).ravel()))
                dv /= scale
                dw /= scale
                analytic = float(np.add.reduce((g_y * dv + g_w * dw).ravel()))
                e_plus = total_energy(_stepped(cfg, surf, dv, dw, t), surf, m, loads, None, model)
                e_minus = total_energy(_stepped(cfg, surf, dv, dw, -t), surf, m, loads, None, model)
                fd = (e_plus - e_minus) / (2.0 * t)
                worst = max(worst, abs(analytic - fd) / max(abs(analytic), 1e-12))
            return [_row(model, "gradient_fd_error", worst, 1e-6)]
        return run

    return _run_cases([one(model) for model in ENERGY_MODELS])


def _stepped(cfg, surf, dv, dw, t):
    R = np.einsum("nij,njk->nik", backend.kernels.exp_field(t * dw), cfg.R)
    return Configuration(y=cfg.y + t * dv, R=R)


# ---------------------------------------------------------------------------
# runner


_SUITES = {
    "drill": drill_suite,
    "ode": ode_suite,
    "representation": representation_suite,
    "coercivity": coercivity_suite,
    "gradient": gradient_suite,
}


def run_suite(suite: str, seed: int = 0) -> dict:
    """Run one suite (or `all`) and assemble the report dictionary."""
    if suite == "all":
        rows = []
        for name in SUITE_NAMES:
            for row in _SUITES[name](seed):
                row["case"] = f"{name}:{row['case']}"
                rows.append(row)
    elif suite in _SUITES:
        rows = _SUITES[suite](seed)
    else:
        raise ValueError(f"unknown suite {suite!r}; pick from {SUITE_NAMES + ('all',)}")
    failed = sum(not r["pass"] for r in rows)
    return {
        "suite": suite,
        "seed": seed,
        "counts": {"total": len(rows), "failed": failed},
        "passed": failed == 0,
        "rows": rows,
    }
