"""Numba and numpy kernels must be interchangeable."""

import os
import subprocess
import sys

import numpy as np
import pytest

from shell6p import _kernels_numpy as knp
from shell6p import constitutive as co
from shell6p.invariance import random_smooth_configuration

knb = pytest.importorskip("shell6p._kernels_numba")


def _close(a, b, tol=5e-14):
    a, b = np.asarray(a), np.asarray(b)
    assert a.shape == b.shape
    scale = max(np.abs(a).max(), 1.0)
    assert np.abs(a - b).max() <= tol * scale


def test_kernel_parity(cyl_surf, active_material, rng):
    surf = cyl_surf
    cfg = random_smooth_configuration(surf, seed=3)
    y = np.ascontiguousarray(cfg.y)
    w = 0.4 * rng.normal(size=(surf.n_nodes, 3))

    R_np = knp.exp_field(w)
    R_nb = knb.exp_field(w)
    _close(R_np, R_nb)

    u_np, ok_np = knp.log_field(R_np)
    u_nb, ok_nb = knb.log_field(R_np)
    _close(u_np, u_nb)
    assert np.array_equal(ok_np, ok_nb)

    A = R_np + 0.05 * rng.normal(size=R_np.shape)
    _close(knp.polar_field(A), knb.polar_field(A), tol=1e-12)

    dy_np = knp.fd_apply(y, surf.fd_idx, surf.fd_coef)
    dy_nb = knb.fd_apply(y, surf.fd_idx, surf.fd_coef)
    _close(dy_np, dy_nb)

    tab = np.ascontiguousarray(rng.normal(size=(surf.n_nodes, 2, 3)))
    _close(
        knp.fd_scatter(tab, surf.fd_idx, surf.fd_coef),
        knb.fd_scatter(tab, surf.fd_idx, surf.fd_coef),
    )

    Q = np.ascontiguousarray(cfg.elastic_rotation(surf))
    E_np = knp.stretch_strain(Q, dy_np, surf.dy0, surf.a_con)
    E_nb = knb.stretch_strain(Q, dy_nb, surf.dy0, surf.a_con)
    _close(E_np, E_nb)

    logs_np, lok_np = knp.relative_logs(Q, surf.fd_idx)
    logs_nb, lok_nb = knb.relative_logs(Q, surf.fd_idx)
    _close(logs_np, logs_nb)
    assert np.array_equal(lok_np, lok_nb)

    K_np = knp.bending_strain(logs_np, surf.fd_coef, surf.a_con)
    K_nb = knb.bending_strain(logs_np, surf.fd_coef, surf.a_con)
    _close(K_np, K_nb)

    alpha = np.asarray(active_material.alpha)
    beta = np.asarray(active_material.beta)
    W_np, SE_np, SK_np = knp.quadratic_stress(E_np, K_np, surf.normal, alpha, beta)
    W_nb, SE_nb, SK_nb = knb.quadratic_stress(E_np, K_np, surf.normal, alpha, beta)
    _close(W_np, W_nb)
    _close(SE_np, SE_nb)
    _close(SK_np, SK_nb)

    couple = np.ascontiguousarray(
        surf.w_quad[:, None, None]
        * np.einsum("nik,ndk->ndi", SK_np, surf.a_con)
    )
    g_np = knp.rotation_gradient_bending(
        logs_np, surf.fd_idx, surf.fd_coef, couple, Q
    )
    g_nb = knb.rotation_gradient_bending(
        logs_np, surf.fd_idx, surf.fd_coef, couple, Q
    )
    _close(g_np, g_nb, tol=1e-13)


_PROBE = (
    "import shell6p.backend as b;"
    "from shell6p.surface import FlatChart, Grid, build_reference;"
    "from shell6p.invariance import random_smooth_configuration;"
    "from shell6p import constitutive as co;"
    "from shell6p.solver import total_energy;"
    "s = build_reference(FlatChart(), Grid(8, 8, (0., 1.), (0., 1.)));"
    "c = random_smooth_configuration(s, seed=4);"
    "m = co.coefficients_drill_active(1e4, 0.3, 0.05);"
    "print(b.BACKEND, repr(total_energy(c, s, m)))"
)


def _probe(backend):
    env = dict(os.environ, SHELL6P_BACKEND=backend)
    return subprocess.run(
        [sys.executable, "-c", _PROBE], env=env, capture_output=True, text=True
    )


def test_env_flag_selects_backend():
    out_np = _probe("numpy")
    out_nb = _probe("numba")
    assert out_np.returncode == 0, out_np.stderr
    assert out_nb.returncode == 0, out_nb.stderr
    name_np, val_np = out_np.stdout.split()
    name_nb, val_nb = out_nb.stdout.split()
    assert name_np == "numpy"
    assert name_nb == "numba"
    a, b = float(val_np), float(val_nb)
    assert abs(a - b) <= 1e-12 * abs(a)


def test_env_flag_rejects_unknown_backend():
    out = _probe("fortran")
    assert out.returncode != 0
    assert "SHELL6P_BACKEND" in out.stderr
