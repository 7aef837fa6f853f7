"""Total-potential minimization over position and rotation fields.

The functional is the quadrature of a strain-energy density minus a dead-load
potential.  Its exact first variation is assembled through the adjoints of
the difference stencils (positions) and of the relative-rotation logarithms
(rotations, left-trivialized).  Minimization is limited-memory quasi-Newton
on the product of R^3 and SO(3) per node: additive position updates,
multiplicative exponential rotation updates, curvature history kept in the
current trivialization.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .backend import kernels
from .constitutive import (
    MaterialModel,
    counterpart,
    energy_drill_free,
    energy_quadratic,
    stress_resultants,
)
from .kinematics import (
    Configuration,
    StrainState,
    _alt_from_fields,
    field_alt_measures,
    strain_measures,
)
from .surface import EDGE_NAMES, ReferenceSurface, surface_gradient

__all__ = [
    "ENERGY_MODELS",
    "LineSearchFailure",
    "NullSpaceDetected",
    "LoadSpec",
    "EdgeCondition",
    "BoundaryConditions",
    "SolverConfig",
    "SolveResult",
    "total_energy",
    "energy_gradient",
    "minimize",
    "FIELDS_CSV_COLUMNS",
    "write_fields_csv",
]

ENERGY_MODELS = ("quadratic_drill_active", "quadratic_drill_free", "full_drill_free")


class LineSearchFailure(RuntimeError):
    """Backtracking found no acceptable step; `result` holds the last iterate."""

    def __init__(self, message: str, result: "SolveResult | None" = None):
        super().__init__(message)
        self.result = result


class NullSpaceDetected(RuntimeError):
    """The data cannot fix the rigid-motion modes of the functional."""


# ---------------------------------------------------------------------------
# problem data


def _broadcast_rows(value, count: int, what: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape == (3,):
        arr = np.broadcast_to(arr, (count, 3))
    if arr.shape != (count, 3):
        raise ValueError(f"{what} must be a 3-vector or a ({count},3) field")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class LoadSpec:
    """Dead loads; every potential is linear in y or in the third director.

    body_force f (force/area) and edge_force (force/length) act on the
    displacement; director_couple (couple/area) and edge_couple act on d3.
    Edge entries are keyed by edge name and must sit on traction edges.
    """

    body_force: Optional[np.ndarray] = None       # (3,) or (N,3)
    director_couple: Optional[np.ndarray] = None  # (3,) or (N,3)
    edge_force: Optional[dict] = None             # name -> (3,) or (n_edge,3)
    edge_couple: Optional[dict] = None

    def __post_init__(self):
        for table in (self.edge_force, self.edge_couple):
            for name in table or {}:
                if name not in EDGE_NAMES:
                    raise ValueError(f"unknown edge name {name!r}")

    @property
    def is_zero(self) -> bool:
        parts = [self.body_force, self.director_couple]
        parts += list((self.edge_force or {}).values())
        parts += list((self.edge_couple or {}).values())
        return all(p is None or not np.any(np.asarray(p)) for p in parts)


@dataclass(frozen=True)
class EdgeCondition:
    """One edge of the chart rectangle: clamped to data, or load-bearing."""

    kind: str  # "dirichlet" | "traction"
    position: Optional[np.ndarray] = None  # (n_edge,3); None = reference
    rotation: Optional[np.ndarray] = None  # (n_edge,3,3); None = reference

    def __post_init__(self):
        if self.kind not in ("dirichlet", "traction"):
            raise ValueError(f"edge kind must be dirichlet or traction, got {self.kind!r}")
        if self.kind == "traction" and (
            self.position is not None or self.rotation is not None
        ):
            raise ValueError("traction edges carry no prescribed fields")


@dataclass(frozen=True)
class BoundaryConditions:
    """Per-edge conditions; edges not listed are traction (free) edges."""

    edges: dict

    def __post_init__(self):
        for name, cond in self.edges.items():
            if name not in EDGE_NAMES:
                raise ValueError(f"unknown edge name {name!r}")
            if not isinstance(cond, EdgeCondition):
                raise TypeError("edge conditions must be EdgeCondition instances")

    @classmethod
    def free(cls) -> "BoundaryConditions":
        return cls(edges={})

    @classmethod
    def clamp(cls, *names: str) -> "BoundaryConditions":
        """Dirichlet edges held at the reference configuration."""
        return cls(edges={n: EdgeCondition(kind="dirichlet") for n in names})

    @property
    def dirichlet_edges(self) -> tuple:
        return tuple(n for n in EDGE_NAMES
                     if self.edges.get(n, None) is not None
                     and self.edges[n].kind == "dirichlet")

    def is_traction(self, name: str) -> bool:
        cond = self.edges.get(name)
        return cond is None or cond.kind == "traction"

    def mask(self, surf: ReferenceSurface) -> np.ndarray:
        """Boolean node mask of the eliminated (prescribed) unknowns."""
        fixed = np.zeros(surf.n_nodes, dtype=bool)
        for name in self.dirichlet_edges:
            fixed[surf.edges[name]] = True
        return fixed

    def apply(self, cfg: Configuration, surf: ReferenceSurface) -> None:
        """Overwrite prescribed nodes in place; later edges win at corners."""
        for name in self.dirichlet_edges:
            cond = self.edges[name]
            nodes = surf.edges[name]
            cfg.y[nodes] = surf.y0[nodes] if cond.position is None else cond.position
            cfg.R[nodes] = surf.Q0[nodes] if cond.rotation is None else cond.rotation


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 500
    gradient_tolerance: float = 1e-8      # relative to the initial gradient norm
    backtracking_factor: float = 0.5
    sufficient_decrease: float = 1e-4
    memory: int = 10
    energy_model: str = "quadratic_drill_active"
    allow_unconstrained: bool = False     # permit solves without Dirichlet data

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be nonnegative")
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be positive")
        if not 0.0 < self.backtracking_factor < 1.0:
            raise ValueError("backtracking_factor must lie in (0, 1)")
        if not 0.0 < self.sufficient_decrease < 1.0:
            raise ValueError("sufficient_decrease must lie in (0, 1)")
        if self.memory < 1:
            raise ValueError("memory must be at least 1")
        if self.energy_model not in ENERGY_MODELS:
            raise ValueError(
                f"energy_model must be one of {ENERGY_MODELS}, got {self.energy_model!r}"
            )


@dataclass
class SolveResult:
    configuration: Configuration
    energy_history: np.ndarray   # functional value before and after each accepted step
    gradient_norm: float
    iterations: int
    strain: StrainState
    stress_stretch: np.ndarray   # (N,3,3) force resultant, force/length
    stress_bending: np.ndarray   # (N,3,3) couple resultant, force
    functional_value: float
    status: str                  # converged | max_iterations | line_search_failure

    @property
    def converged(self) -> bool:
        return self.status == "converged"


# ---------------------------------------------------------------------------
# functional and first variation


def _effective_model(m: MaterialModel, energy_model: str) -> MaterialModel:
    if energy_model not in ENERGY_MODELS:
        raise ValueError(
            f"energy_model must be one of {ENERGY_MODELS}, got {energy_model!r}"
        )
    if energy_model == "quadratic_drill_active" or m.family == "drill_free":
        return m
    # the drill-free evaluations need the drill-free coefficient set
    return counterpart(m)


def _reduce(values: np.ndarray) -> float:
    # fixed-order pairwise summation keeps totals thread-count independent
    return float(np.add.reduce(values))


def _load_potential(cfg, surf, loads, bc) -> float:
    # potentials are measured from the reference configuration (u and the
    # director change), so they vanish there; the constant offset of the
    # absolute form would otherwise swamp the strain-energy scale and ruin
    # the line search's ability to certify small decreases
    if loads is None:
        return 0.0
    lam = 0.0
    u = cfg.y - surf.y0
    dd3 = cfg.director3 - surf.Q0[:, :, 2]
    if loads.body_force is not None:
        f = _broadcast_rows(loads.body_force, surf.n_nodes, "body_force")
        lam += _reduce(surf.w_quad * np.einsum("ni,ni->n", f, u))
    if loads.director_couple is not None:
        c = _broadcast_rows(loads.director_couple, surf.n_nodes, "director_couple")
        lam += _reduce(surf.w_quad * np.einsum("ni,ni->n", c, dd3))
    for name, value in (loads.edge_force or {}).items():
        nodes, wts = _traction_edge(surf, bc, name)
        g = _broadcast_rows(value, len(nodes), f"edge_force[{name!r}]")
        lam += _reduce(wts * np.einsum("ki,ki->k", g, u[nodes]))
    for name, value in (loads.edge_couple or {}).items():
        nodes, wts = _traction_edge(surf, bc, name)
        g = _broadcast_rows(value, len(nodes), f"edge_couple[{name!r}]")
        lam += _reduce(wts * np.einsum("ki,ki->k", g, dd3[nodes]))
    return lam


def _traction_edge(surf, bc, name):
    if bc is not None and not bc.is_traction(name):
        raise ValueError(f"edge load on Dirichlet edge {name!r}")
    return surf.edges[name], surf.edge_weights[name]


def total_energy(cfg, surf, m, loads=None, bc=None,
                 energy_model: str = "quadratic_drill_active") -> float:
    """Strain energy minus load potential; Dirichlet data is assumed applied."""
    m_eff = _effective_model(m, energy_model)
    if energy_model == "full_drill_free":
        _, strain_total = energy_drill_free(field_alt_measures(cfg, surf), m_eff, surf)
    else:
        _, strain_total = energy_quadratic(strain_measures(cfg, surf), m_eff, surf)
    return strain_total - _load_potential(cfg, surf, loads, bc)


def _gradient_quadratic(cfg, surf, m):
    Q = cfg.elastic_rotation(surf)
    dy = kernels.fd_apply(np.ascontiguousarray(cfg.y), surf.fd_idx, surf.fd_coef)
    E = kernels.stretch_strain(Q, dy, surf.dy0, surf.a_con)
    logs, ok = kernels.relative_logs(Q, surf.fd_idx)
    if not np.all(ok):
        raise ValueError("rotation field too rough: stencil neighbors near pi apart")
    K = kernels.bending_strain(logs, surf.fd_coef, surf.a_con)
    _, SE, SK = kernels.quadratic_stress(
        E, K, surf.normal, np.asarray(m.alpha), np.asarray(m.beta)
    )
    w = surf.w_quad
    QSE = np.einsum("nij,njk->nik", Q, SE)
    stress_dirs = np.einsum("nik,ndk->ndi", QSE, surf.a_con)
    g_y = kernels.fd_scatter(
        np.ascontiguousarray(w[:, None, None] * stress_dirs), surf.fd_idx, surf.fd_coef
    )
    # stretch part of the rotation variation is local to the node
    g_w = -w[:, None] * np.add.reduce(np.cross(dy, stress_dirs), axis=1)
    couple_tab = w[:, None, None] * np.einsum("nik,ndk->ndi", SK, surf.a_con)
    g_w += kernels.rotation_gradient_bending(
        logs, surf.fd_idx, surf.fd_coef, np.ascontiguousarray(couple_tab), Q
    )
    return g_y, g_w


def _gradient_full_drill_free(cfg, surf, m):
    F = surface_gradient(cfg.y, surf)
    d3 = np.ascontiguousarray(cfg.director3)
    G = surface_gradient(d3, surf)
    alt = _alt_from_fields(F, d3, G, surf)

    C, D = m.stretching_stiffness, m.bending_stiffness
    nu, kap = m.poisson, m.reduced_shear_correction
    eye = np.eye(3)
    tr_m = np.einsum("nii->n", alt.membrane)
    S_m = C * ((1.0 - nu) * alt.membrane + nu * tr_m[:, None, None] * eye)
    s_g = 0.5 * C * (1.0 - nu) * kap * alt.shear
    Ps = alt.bending
    tr_p = np.einsum("nii->n", Ps)
    S_p = D * (0.5 * (1.0 - nu) * (Ps + np.transpose(Ps, (0, 2, 1)))
               + nu * tr_p[:, None, None] * eye)

    Sb = np.einsum("nij,nkj->nik", S_p, surf.curv)  # S_p b^T
    A = (
        np.einsum("nij,njk->nik", F, S_m + 0.5 * (Sb + np.transpose(Sb, (0, 2, 1))))
        + d3[:, :, None] * s_g[:, None, :]
        + np.einsum("nij,nkj->nik", G, S_p)
    )
    B = np.einsum("nij,njk->nik", F, S_p)
    p = np.einsum("nij,nj->ni", F, s_g)

    w = surf.w_quad
    tab_a = w[:, None, None] * np.einsum("nik,ndk->ndi", A, surf.a_con)
    g_y = kernels.fd_scatter(np.ascontiguousarray(tab_a), surf.fd_idx, surf.fd_coef)
    tab_b = w[:, None, None] * np.einsum("nik,ndk->ndi", B, surf.a_con)
    q = kernels.fd_scatter(np.ascontiguousarray(tab_b), surf.fd_idx, surf.fd_coef)
    g_w = np.cross(d3, q) + w[:, None] * np.cross(d3, p)
    return g_y, g_w


def energy_gradient(cfg, surf, m, loads=None, bc=None,
                    energy_model: str = "quadratic_drill_active"):
    """Exact gradient of the functional.

    Returns (g_y, g_w), both (N,3).  g_w is the derivative with respect to a
    left multiplicative increment exp(skew(w)) R at w = 0.  Rows of
    eliminated (Dirichlet) nodes are zeroed.
    """
    m_eff = _effective_model(m, energy_model)
    if energy_model == "full_drill_free":
        g_y, g_w = _gradient_full_drill_free(cfg, surf, m_eff)
    else:
        g_y, g_w = _gradient_quadratic(cfg, surf, m_eff)

    if loads is not None:
        u_dofs = np.zeros_like(g_y)
        if loads.body_force is not None:
            f = _broadcast_rows(loads.body_force, surf.n_nodes, "body_force")
            g_y -= surf.w_quad[:, None] * f
        if loads.director_couple is not None:
            c = _broadcast_rows(loads.director_couple, surf.n_nodes, "director_couple")
            g_w -= surf.w_quad[:, None] * np.cross(cfg.director3, c)
        for name, value in (loads.edge_force or {}).items():
            nodes, wts = _traction_edge(surf, bc, name)
            g = _broadcast_rows(value, len(nodes), f"edge_force[{name!r}]")
            np.add.at(u_dofs, nodes, -wts[:, None] * g)
        g_y += u_dofs
        for name, value in (loads.edge_couple or {}).items():
            nodes, wts = _traction_edge(surf, bc, name)
            g = _broadcast_rows(value, len(nodes), f"edge_couple[{name!r}]")
            np.add.at(
                g_w, nodes, -wts[:, None] * np.cross(cfg.director3[nodes], g)
            )
    if bc is not None:
        fixed = bc.mask(surf)
        g_y[fixed] = 0.0
        g_w[fixed] = 0.0
    return g_y, g_w


# ---------------------------------------------------------------------------
# minimization


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.add.reduce(a * b))


def _norm(a: np.ndarray) -> float:
    return float(np.sqrt(np.add.reduce(a * a)))


def _hessian_diag(surf, m) -> np.ndarray:
    """Per-DOF curvature estimate, packed (y block, then rotation block).

    The stretch channels see the difference operator through the position
    DOFs and a node-local mass term through the rotations; the bending
    channels see the difference operator through the rotations.  A Jacobi
    estimate from those three contributions evens out the vastly different
    stiffness scales of the two blocks; its norm also sets the gradient
    magnitude of a unit-strain state, which anchors the round-off floor of
    the convergence test.
    """
    s_a = float(np.add.reduce(np.abs(np.asarray(m.alpha))))
    s_b = float(np.add.reduce(np.abs(np.asarray(m.beta))))
    grad_sq = np.zeros(surf.n_nodes)
    weight = surf.w_quad[:, None, None] * (
        surf.fd_coef**2 * np.einsum("ndi,ndi->nd", surf.a_con, surf.a_con)[:, :, None]
    )
    for d in range(2):
        for k in range(3):
            np.add.at(grad_sq, surf.fd_idx[:, d, k], weight[:, d, k])
    h_y = s_a * grad_sq
    h_w = s_b * grad_sq + s_a * surf.w_quad
    return np.concatenate([np.repeat(h_y, 3), np.repeat(h_w, 3)])


def _pack(g_y: np.ndarray, g_w: np.ndarray) -> np.ndarray:
    return np.concatenate([g_y.ravel(), g_w.ravel()])


def _two_loop(g, pairs, gamma, scale):
    q = g.copy()
    alphas = []
    for s, yk, rho in reversed(pairs):
        a = rho * _dot(s, q)
        alphas.append(a)
        q -= a * yk
    q *= gamma * scale
    for (s, yk, rho), a in zip(pairs, reversed(alphas)):
        b = rho * _dot(yk, q)
        q += (a - b) * s
    return q


def _stepped(cfg, free, dy, dw, t):
    trial = cfg.copy()
    trial.y[free] += t * dy[free]
    trial.R[free] = np.einsum(
        "nij,njk->nik", kernels.exp_field(np.ascontiguousarray(t * dw[free])),
        trial.R[free],
    )
    return trial


def minimize(cfg0, surf, m, loads=None, bc=None, opts: SolverConfig | None = None):
    """Descend the functional from cfg0; returns a SolveResult.

    Raises NullSpaceDetected for data that leaves rigid motions free and
    LineSearchFailure (carrying the last iterate) when no decreasing step
    exists along the available directions.
    """
    opts = opts if opts is not None else SolverConfig()
    bc = bc if bc is not None else BoundaryConditions.free()
    m_eff = _effective_model(m, opts.energy_model)

    if not bc.dirichlet_edges:
        zero = loads is None or loads.is_zero
        if zero:
            raise NullSpaceDetected(
                "no Dirichlet edge and zero loads: every rigid motion minimizes"
            )
        if not opts.allow_unconstrained:
            raise NullSpaceDetected(
                "no Dirichlet edge: set allow_unconstrained for "
                "self-equilibrated loads"
            )

    cfg = cfg0.copy()
    bc.apply(cfg, surf)
    free = ~bc.mask(surf)

    def f_of(c):
        return total_energy(c, surf, m, loads, bc, opts.energy_model)

    def g_of(c):
        return _pack(*energy_gradient(c, surf, m, loads, bc, opts.energy_model))

    diag = _hessian_diag(surf, m_eff)
    scale = 1.0 / diag
    history = [f_of(cfg)]
    g = g_of(cfg)
    gnorm = _norm(g)
    # gradients below 1e-13 of the unit-strain magnitude are round-off
    tol = max(opts.gradient_tolerance * gnorm, 1e-13 * _norm(diag))
    pairs: list = []
    gamma = None
    status = "max_iterations"
    iterations = 0

    def result(status_name):
        state = strain_measures(cfg, surf)
        n_res, m_res = stress_resultants(state, m_eff)
        return SolveResult(
            configuration=cfg,
            energy_history=np.asarray(history),
            gradient_norm=gnorm,
            iterations=iterations,
            strain=state,
            stress_stretch=n_res,
            stress_bending=m_res,
            functional_value=history[-1],
            status=status_name,
        )

    if gnorm <= tol or gnorm == 0.0:
        return result("converged")

    for _ in range(opts.max_iterations):
        if gamma is None:
            gb = np.sqrt(_dot(g, scale * g))
            d = -(1.0 / gb) * scale * g
        else:
            d = -_two_loop(g, pairs, gamma, scale)
        slope = _dot(g, d)
        if slope >= 0.0:  # curvature history turned sour; drop it
            pairs.clear()
            gamma = None
            gb = np.sqrt(_dot(g, scale * g))
            d = -(1.0 / gb) * scale * g
            slope = _dot(g, d)

        dy, dw = d[: 3 * surf.n_nodes].reshape(-1, 3), d[3 * surf.n_nodes:].reshape(-1, 3)
        f0 = history[-1]
        t = 1.0
        trial = None
        for _bt in range(60):
            cand = _stepped(cfg, free, dy, dw, t)
            f_t = f_of(cand)
            if f_t <= f0 + opts.sufficient_decrease * t * slope:
                trial = cand
                break
            t *= opts.backtracking_factor
        if trial is None:
            if pairs:
                pairs.clear()
                gamma = None
                continue
            raise LineSearchFailure(
                f"no decreasing step after 60 backtracks at iteration {iterations}",
                result=result("line_search_failure"),
            )

        trial.R[free] = kernels.polar_field(np.ascontiguousarray(trial.R[free]), 2)
        g_new = g_of(trial)
        s = t * d  # d vanishes on eliminated nodes, so s is the applied step
        yk = g_new - g
        sy = _dot(s, yk)
        if sy > 1e-12 * _norm(s) * _norm(yk):
            pairs.append((s, yk, 1.0 / sy))
            if len(pairs) > opts.memory:
                pairs.pop(0)
            gamma = sy / _dot(yk, scale * yk)

        cfg = trial
        g = g_new
        gnorm = _norm(g)
        iterations += 1
        history.append(f_t)
        if gnorm <= tol:
            status = "converged"
            break

    return result(status)


# ---------------------------------------------------------------------------
# field output

FIELDS_CSV_COLUMNS = (
    ["x1", "x2", "y1", "y2", "y3", "w1", "w2", "w3"]
    + [f"E{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
    + [f"K{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
    + [f"N{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
    + [f"M{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
)


def write_fields_csv(path, surf: ReferenceSurface, res: SolveResult) -> None:
    """Per-node solution table; rotations as log vectors of the full R."""
    x1, x2 = surf.grid.coords()
    w, ok = kernels.log_field(np.ascontiguousarray(res.configuration.R))
    if not np.all(ok):
        raise ValueError("a nodal rotation is within 1e-3 of the cut locus at pi")
    table = np.column_stack(
        [
            x1, x2, res.configuration.y, w,
            res.strain.stretch.reshape(-1, 9),
            res.strain.bending.reshape(-1, 9),
            res.stress_stretch.reshape(-1, 9),
            res.stress_bending.reshape(-1, 9),
        ]
    )
    np.savetxt(
        path, table, delimiter=",", header=",".join(FIELDS_CSV_COLUMNS),
        comments="", fmt="%.17g",
    )
