"""Reference surface: charts, grids, metric data and difference stencils.

A chart samples midsurface positions y0 and director triads Q0 (columns
d1, d2, d3) on a tensor-product grid.  `build_reference` turns that into
the per-node geometric fields every other module consumes: tangent vectors,
dual frame, normal projector, drill tensor, curvature, initial frame
curvature, quadrature weights and the finite-difference stencil tables.

Conventions: nodes are stored flat with index n = i * n2 + j; direction 0
differentiates along x1 (index i), direction 1 along x2.  Interior stencils
are second-order central, boundaries second-order one-sided.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "DegenerateMetric",
    "NonInjectiveChart",
    "Grid",
    "FlatChart",
    "CylinderChart",
    "TabulatedChart",
    "chart_from_config",
    "ReferenceSurface",
    "build_reference",
    "surface_gradient",
    "initial_curvature",
    "EDGE_NAMES",
]

EDGE_NAMES = ("west", "east", "south", "north")


class DegenerateMetric(ValueError):
    """Tangent vectors do not span a surface element at some node."""


class NonInjectiveChart(ValueError):
    """Two grid nodes map to the same point in space."""


@dataclass(frozen=True)
class Grid:
    """Uniform tensor-product parameter grid, n1 x n2 nodes."""

    n1: int
    n2: int
    x1_lim: tuple[float, float]
    x2_lim: tuple[float, float]

    def __post_init__(self):
        if self.n1 < 3 or self.n2 < 3:
            raise ValueError("grid needs at least 3 nodes per direction")
        if self.x1_lim[1] <= self.x1_lim[0] or self.x2_lim[1] <= self.x2_lim[0]:
            raise ValueError("grid limits must be increasing")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n1, self.n2)

    @property
    def size(self) -> int:
        return self.n1 * self.n2

    @property
    def spacing(self) -> tuple[float, float]:
        return (
            (self.x1_lim[1] - self.x1_lim[0]) / (self.n1 - 1),
            (self.x2_lim[1] - self.x2_lim[0]) / (self.n2 - 1),
        )

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat (N,) arrays of the x1 and x2 node coordinates."""
        x1 = np.linspace(*self.x1_lim, self.n1)
        x2 = np.linspace(*self.x2_lim, self.n2)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        return X1.ravel(), X2.ravel()


class FlatChart:
    """Planar reference: y0 = (x1, x2, 0), identity triad."""

    analytic = True

    def sample(self, grid: Grid):
        x1, x2 = grid.coords()
        y0 = np.column_stack([x1, x2, np.zeros_like(x1)])
        Q0 = np.broadcast_to(np.eye(3), (grid.size, 3, 3)).copy()
        dy0 = np.zeros((grid.size, 2, 3))
        dy0[:, 0, 0] = 1.0
        dy0[:, 1, 1] = 1.0
        return y0, Q0, dy0


class CylinderChart:
    """Circular cylinder of given radius; x1 is arclength, x2 axial.

    Directors: d1 circumferential, d2 axial, d3 the outward normal.
    """

    analytic = True

    def __init__(self, radius: float):
        if radius <= 0:
            raise ValueError("cylinder radius must be positive")
        self.radius = float(radius)

    def sample(self, grid: Grid):
        x1, x2 = grid.coords()
        phi = x1 / self.radius
        cp, sp = np.cos(phi), np.sin(phi)
        zeros = np.zeros_like(phi)
        y0 = np.column_stack([self.radius * cp, self.radius * sp, x2])
        d1 = np.column_stack([-sp, cp, zeros])
        d2 = np.column_stack([zeros, zeros, np.ones_like(phi)])
        d3 = np.column_stack([cp, sp, zeros])
        Q0 = np.stack([d1, d2, d3], axis=2)
        dy0 = np.stack([d1, d2], axis=1)
        return y0, Q0, dy0


class TabulatedChart:
    """Chart given by per-node samples of (x1, x2, y0, d1, d2, d3).

    Rows may arrive in any order; they are sorted into grid order and must
    cover exactly the requested tensor grid.  Tangents are recovered by
    fourth-order central differences (second-order near the boundary).
    """

    analytic = False

    def __init__(self, x1, x2, y0, d1, d2, d3):
        order = np.lexsort((np.asarray(x2), np.asarray(x1)))
        self.x1 = np.asarray(x1, dtype=float)[order]
        self.x2 = np.asarray(x2, dtype=float)[order]
        self.y0 = np.asarray(y0, dtype=float)[order]
        triad = np.stack(
            [np.asarray(d, dtype=float)[order] for d in (d1, d2, d3)], axis=2
        )
        self.Q0 = triad

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=_csv_header_rows(path))
        if data.ndim == 1:
            data = data[None, :]
        if data.shape[1] != 14:
            raise ValueError(
                f"tabulated chart CSV needs 14 columns "
                f"(x1, x2, y0[3], d1[3], d2[3], d3[3]); got {data.shape[1]}"
            )
        return cls(
            data[:, 0], data[:, 1], data[:, 2:5],
            data[:, 5:8], data[:, 8:11], data[:, 11:14],
        )

    def sample(self, grid: Grid):
        if self.x1.size != grid.size:
            raise ValueError(
                f"tabulated chart has {self.x1.size} rows, grid has {grid.size} nodes"
            )
        gx1, gx2 = grid.coords()
        h = min(grid.spacing)
        if np.abs(self.x1 - gx1).max() > 1e-9 * max(1.0, h) or \
           np.abs(self.x2 - gx2).max() > 1e-9 * max(1.0, h):
            raise ValueError("tabulated chart nodes do not match the grid")
        return self.y0.copy(), self.Q0.copy(), None


def _csv_header_rows(path) -> int:
    with open(path) as fh:
        first = fh.readline()
    head = first.split(",")[0].strip()
    try:
        float(head)
        return 0
    except ValueError:
        return 1


def chart_from_config(spec: dict):
    kind = spec.get("type")
    if kind == "flat":
        return FlatChart()
    if kind == "cylinder":
        return CylinderChart(spec["radius"])
    if kind == "tabulated":
        return TabulatedChart.from_csv(spec["path"])
    raise ValueError(f"unknown chart type {kind!r}")


# ---------------------------------------------------------------------------
# difference stencils


def _fd_tables(grid: Grid):
    """Three-slot stencil tables (index, coefficient) for both directions."""
    n1, n2 = grid.n1, grid.n2
    h1, h2 = grid.spacing
    idx = np.empty((grid.size, 2, 3), dtype=np.int64)
    coef = np.empty((grid.size, 2, 3))

    def line(n, h, pos):
        # offsets and weights of the second-order stencil at position pos
        if pos == 0:
            return (0, 1, 2), (-1.5 / h, 2.0 / h, -0.5 / h)
        if pos == n - 1:
            return (0, -1, -2), (1.5 / h, -2.0 / h, 0.5 / h)
        return (-1, 0, 1), (-0.5 / h, 0.0, 0.5 / h)

    for i in range(n1):
        off1, c1 = line(n1, h1, i)
        for j in range(n2):
            n = i * n2 + j
            off2, c2 = line(n2, h2, j)
            for k in range(3):
                idx[n, 0, k] = (i + off1[k]) * n2 + j
                coef[n, 0, k] = c1[k]
                idx[n, 1, k] = i * n2 + (j + off2[k])
                coef[n, 1, k] = c2[k]
    return idx, coef


def _fd_line_weights(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _fd4_derivative(y, grid: Grid):
    """Fourth-order tangents of a sampled position field (boundary: 2nd)."""
    n1, n2 = grid.n1, grid.n2
    h1, h2 = grid.spacing
    f = y.reshape(n1, n2, -1)
    out = np.empty((n1, n2, 2, f.shape[2]))
    for axis, h in ((0, h1), (1, h2)):
        g = np.moveaxis(f, axis, 0)
        d = np.empty_like(g)
        n = g.shape[0]
        d[2:-2] = (g[:-4] - 8 * g[1:-3] + 8 * g[3:-1] - g[4:]) / (12 * h)
        d[1] = (g[2] - g[0]) / (2 * h)
        d[-2] = (g[-1] - g[-3]) / (2 * h)
        d[0] = (-3 * g[0] + 4 * g[1] - g[2]) / (2 * h)
        d[-1] = (3 * g[-1] - 4 * g[-2] + g[-3]) / (2 * h)
        out[:, :, axis, :] = np.moveaxis(d, 0, axis)
    return out.reshape(grid.size, 2, f.shape[2])


# ---------------------------------------------------------------------------
# reference surface


@dataclass
class ReferenceSurface:
    """Per-node geometry of the reference midsurface (flat node layout)."""

    grid: Grid
    y0: np.ndarray          # (N,3) positions
    Q0: np.ndarray          # (N,3,3) triads, columns d1, d2, d3
    a_cov: np.ndarray       # (N,2,3) tangent vectors (best available order)
    dy0: np.ndarray         # (N,2,3) stencil differences of y0 (strain reference)
    a_con: np.ndarray       # (N,2,3) dual tangent frame
    metric: np.ndarray      # (N,2,2)
    jac: np.ndarray         # (N,) sqrt(det metric)
    normal: np.ndarray      # (N,3) = d3
    proj: np.ndarray        # (N,3,3) tangent projector 1 - n (x) n
    drill: np.ndarray       # (N,3,3) c = d1 (x) d2 - d2 (x) d1
    curv: np.ndarray        # (N,3,3) b = -Grad_s n
    frame_curv: np.ndarray  # (N,3,3) axl(dQ0 Q0^T) (x) a^alpha
    w_quad: np.ndarray      # (N,) area quadrature weights
    fd_idx: np.ndarray      # (N,2,3) stencil neighbor indices
    fd_coef: np.ndarray     # (N,2,3) stencil coefficients
    edges: dict = field(default_factory=dict)          # name -> node indices
    edge_weights: dict = field(default_factory=dict)   # name -> line weights

    @property
    def n_nodes(self) -> int:
        return self.y0.shape[0]

    def boundary_mask(self, edge_names=EDGE_NAMES) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        for name in edge_names:
            mask[self.edges[name]] = True
        return mask


def build_reference(chart, grid: Grid, min_area: float = 1e-6) -> ReferenceSurface:
    """Sample a chart on a grid and assemble all reference-surface fields.

    Raises DegenerateMetric when det(a_ab) < min_area^2 at any node and
    NonInjectiveChart when two nodes coincide within 1e-12.
    """
    from .backend import kernels

    y0, Q0, dy0_analytic = chart.sample(grid)
    N = grid.size

    ortho = np.abs(np.einsum("nji,njk->nik", Q0, Q0) - np.eye(3)).max()
    if ortho > 1e-6:
        raise ValueError(f"director triads are not orthonormal (residual {ortho:.3e})")
    if ortho > 1e-12:
        Q0 = kernels.polar_field(Q0, 6)
    if np.any(np.linalg.det(Q0) < 0.0):
        raise ValueError("director triads must be right-handed")

    # coincident nodes
    pairs = cKDTree(y0).query_pairs(r=1e-12)
    if pairs:
        i, j = sorted(pairs)[0]
        raise NonInjectiveChart(f"nodes {i} and {j} coincide within 1e-12")

    a_cov = dy0_analytic if dy0_analytic is not None else _fd4_derivative(y0, grid)

    metric = np.einsum("ndi,nei->nde", a_cov, a_cov)
    det = metric[:, 0, 0] * metric[:, 1, 1] - metric[:, 0, 1] * metric[:, 1, 0]
    bad = det < min_area**2
    if np.any(bad):
        n = int(np.argmax(bad))
        raise DegenerateMetric(
            f"metric determinant {det[n]:.3e} below {min_area**2:.3e} at node {n}"
        )
    inv = np.empty_like(metric)
    inv[:, 0, 0] = metric[:, 1, 1] / det
    inv[:, 1, 1] = metric[:, 0, 0] / det
    inv[:, 0, 1] = -metric[:, 0, 1] / det
    inv[:, 1, 0] = -metric[:, 1, 0] / det
    a_con = np.einsum("nde,nei->ndi", inv, a_cov)

    normal = Q0[:, :, 2].copy()
    n_geo = np.cross(a_cov[:, 0, :], a_cov[:, 1, :])
    n_geo /= np.linalg.norm(n_geo, axis=1, keepdims=True)
    tol_n = 1e-8 if dy0_analytic is not None else 50.0 * max(grid.spacing) ** 2
    worst = np.abs(n_geo - normal).max()
    if worst > tol_n:
        raise ValueError(
            f"third director deviates from the surface normal by {worst:.3e} "
            f"(tolerance {tol_n:.3e})"
        )

    proj = np.eye(3)[None] - normal[:, :, None] * normal[:, None, :]
    d1, d2 = Q0[:, :, 0], Q0[:, :, 1]
    drill = d1[:, :, None] * d2[:, None, :] - d2[:, :, None] * d1[:, None, :]

    fd_idx, fd_coef = _fd_tables(grid)
    dy0 = kernels.fd_apply(np.ascontiguousarray(y0), fd_idx, fd_coef)
    dn = kernels.fd_apply(np.ascontiguousarray(normal), fd_idx, fd_coef)
    curv = -np.einsum("ndi,ndj->nij", dn, a_con)
    # derivative of a unit field is tangential in the continuum; one-sided
    # stencils leak an O(h^3) normal row that would break the exact algebraic
    # relations between the strain-measure families, so remove it
    curv = np.einsum("nij,njk->nik", proj, curv)

    # Frame curvature from relative-rotation logs rather than entry
    # differences: the axial-vector argument stays exactly skew, which is the
    # only way a tight skew gate survives one-sided boundary stencils.
    logs, ok = kernels.relative_logs(Q0, fd_idx)
    if not np.all(ok):
        n = int(np.argmin(ok.reshape(N, -1).all(axis=1)))
        raise ValueError(
            f"triad rotation between stencil neighbors of node {n} is near pi; "
            "the frame field is too rough for this grid"
        )
    kv_mat = np.einsum("ndk,ndki->ndi", fd_coef, logs)
    kv = np.einsum("nij,ndj->ndi", Q0, kv_mat)
    frame_curv = np.einsum("ndi,ndj->nij", kv, a_con)

    h1, h2 = grid.spacing
    w1 = _fd_line_weights(grid.n1, h1)
    w2 = _fd_line_weights(grid.n2, h2)
    w_quad = (w1[:, None] * w2[None, :]).ravel() * np.sqrt(det)

    n1, n2 = grid.n1, grid.n2
    node = np.arange(N).reshape(n1, n2)
    edges = {
        "west": node[0, :].copy(),
        "east": node[-1, :].copy(),
        "south": node[:, 0].copy(),
        "north": node[:, -1].copy(),
    }
    edge_weights = {}
    for name, along, w_line in (
        ("west", 1, _fd_line_weights(n2, h2)),
        ("east", 1, _fd_line_weights(n2, h2)),
        ("south", 0, _fd_line_weights(n1, h1)),
        ("north", 0, _fd_line_weights(n1, h1)),
    ):
        nodes = edges[name]
        stretch = np.linalg.norm(a_cov[nodes, along, :], axis=1)
        edge_weights[name] = w_line * stretch

    return ReferenceSurface(
        grid=grid, y0=y0, Q0=Q0, a_cov=a_cov, dy0=dy0, a_con=a_con,
        metric=metric, jac=np.sqrt(det), normal=normal, proj=proj,
        drill=drill, curv=curv, frame_curv=frame_curv, w_quad=w_quad,
        fd_idx=fd_idx, fd_coef=fd_coef, edges=edges, edge_weights=edge_weights,
    )


def surface_gradient(field, surf: ReferenceSurface) -> np.ndarray:
    """Surface gradient of a nodal field.

    Scalars (N,) give (N,3); vector or stacked fields (N,C) give (N,C,3),
    each row being sum_d D_d[f] (x) a^d.
    """
    from .backend import kernels

    f = np.asarray(field, dtype=float)
    scalar = f.ndim == 1
    if scalar:
        f = f[:, None]
    df = kernels.fd_apply(np.ascontiguousarray(f), surf.fd_idx, surf.fd_coef)
    grad = np.einsum("ndc,ndj->ncj", df, surf.a_con)
    return grad[:, 0, :] if scalar else grad


def initial_curvature(chart, grid: Grid) -> np.ndarray:
    """Per-node initial frame curvature of a chart (see ReferenceSurface)."""
    return build_reference(chart, grid).frame_curv
