#!/usr/bin/env python3
"""Time the hot kernels on the numba and numpy backends.

Usage: python benchmarks/bench_backends.py [--n1 96] [--n2 96] [--repeats 7]

The numba numbers include neither compilation nor cache loading: every
kernel is called once for warmup before timing.  The table reports the best
of the repeats, which is the least noisy estimator on a shared machine.
"""
import argparse
import time

import numpy as np

from shell6p import _kernels_numba as knb
from shell6p import _kernels_numpy as knp
from shell6p import constitutive as co
from shell6p.invariance import random_smooth_configuration
from shell6p.surface import CylinderChart, Grid, build_reference


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n1", type=int, default=96)
    ap.add_argument("--n2", type=int, default=96)
    ap.add_argument("--repeats", type=int, default=7)
    args = ap.parse_args()

    surf = build_reference(
        CylinderChart(0.9), Grid(args.n1, args.n2, (0.0, 1.0), (0.0, 1.2))
    )
    cfg = random_smooth_configuration(surf, seed=3)
    m = co.coefficients_drill_active(youngs=1e4, poisson=0.3, thickness=0.05)
    alpha, beta = np.asarray(m.alpha), np.asarray(m.beta)

    y = np.ascontiguousarray(cfg.y)
    Q = np.ascontiguousarray(cfg.elastic_rotation(surf))
    w = np.ascontiguousarray(0.3 * np.random.default_rng(0).normal(size=(surf.n_nodes, 3)))
    dy = knp.fd_apply(y, surf.fd_idx, surf.fd_coef)
    E = knp.stretch_strain(Q, dy, surf.dy0, surf.a_con)
    logs, _ = knp.relative_logs(Q, surf.fd_idx)
    K = knp.bending_strain(logs, surf.fd_coef, surf.a_con)
    _, _, SK = knp.quadratic_stress(E, K, surf.normal, alpha, beta)
    couple = np.ascontiguousarray(
        surf.w_quad[:, None, None] * np.einsum("nik,ndk->ndi", SK, surf.a_con)
    )
    tab = np.ascontiguousarray(couple)

    cases = [
        ("exp_field", lambda k: k.exp_field(w)),
        ("log_field", lambda k: k.log_field(Q)),
        ("fd_apply", lambda k: k.fd_apply(y, surf.fd_idx, surf.fd_coef)),
        ("fd_scatter", lambda k: k.fd_scatter(tab, surf.fd_idx, surf.fd_coef)),
        ("stretch_strain", lambda k: k.stretch_strain(Q, dy, surf.dy0, surf.a_con)),
        ("relative_logs", lambda k: k.relative_logs(Q, surf.fd_idx)),
        ("bending_strain", lambda k: k.bending_strain(logs, surf.fd_coef, surf.a_con)),
        ("quadratic_stress",
         lambda k: k.quadratic_stress(E, K, surf.normal, alpha, beta)),
        ("rotation_gradient_bending",
         lambda k: k.rotation_gradient_bending(logs, surf.fd_idx, surf.fd_coef, couple, Q)),
    ]

    print(f"grid {args.n1}x{args.n2} ({surf.n_nodes} nodes), "
          f"best of {args.repeats}")
    print(f"{'kernel':>28s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speedup':>9s}")
    for name, call in cases:
        call(knb)  # warmup covers the jit path
        t_np = best_of(lambda: call(knp), args.repeats)
        t_nb = best_of(lambda: call(knb), args.repeats)
        print(f"{name:>28s} {1e3 * t_np:>12.3f} {1e3 * t_nb:>12.3f} "
              f"{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
