"""Command-line front end.

Three subcommands: `solve` runs a case file through the minimizer, `verify`
runs the self-checking suites, `compare` solves one case under both built-in
coefficient families.  All JSON output is written by a fixed-format dumper
(17 significant digits, sorted verify rows), so verify reports are byte
identical for equal seeds; solve results additionally record wall time.

Exit codes: 0 success/converged, 1 configuration error, 2 failed checks or
an unconverged solve (partial result still written).
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
import time

import numpy as np

from . import constitutive
from .config import ConfigError, load_case
from .kinematics import Configuration
from .solver import (
    LineSearchFailure,
    NullSpaceDetected,
    minimize,
    total_energy,
    write_fields_csv,
)
from .verify import SUITE_NAMES, run_suite

__all__ = ["main"]


# ---------------------------------------------------------------------------
# deterministic JSON


def _fmt(obj, indent: int) -> str:
    pad = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not np.isfinite(value):
            raise ValueError(f"non-finite value in output: {value}")
        return format(value, ".16e")
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        inner = ",\n".join(pad + "  " + _fmt(v, indent + 1) for v in obj)
        return "[\n" + inner + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        inner = ",\n".join(
            pad + "  " + _fmt(str(k), 0) + ": " + _fmt(v, indent + 1)
            for k, v in obj.items()
        )
        return "{\n" + inner + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dump_json(obj) -> str:
    return _fmt(obj, 0) + "\n"


def _write(path, text: str) -> None:
    with open(path, "w", newline="\n") as handle:
        handle.write(text)


def _apply_threads(n) -> None:
    """Cap the numba thread pool; compute kernels are serial, so this only
    affects scheduling, never values."""
    if n is None:
        return
    if n < 1:
        raise ConfigError("--threads", "thread count must be >= 1")
    try:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except ImportError:
        pass


# ---------------------------------------------------------------------------
# solve


def _result_payload(case, surf, m, res, wall: float) -> dict:
    strain_energy = total_energy(
        res.configuration, surf, m, None, None, case.solver.get(
            "energy_model", "quadratic_drill_active"
        )
    )
    R = res.configuration.R
    ortho = float(
        np.abs(np.einsum("nji,njk->nik", R, R) - np.eye(3)).max()
    )
    history = [float(v) for v in res.energy_history]
    return {
        "status": res.status,
        "converged": res.converged,
        "iterations": res.iterations,
        "energies": {
            "functional": res.functional_value,
            "strain_energy": strain_energy,
            "load_potential": strain_energy - res.functional_value,
            "initial_functional": history[0],
        },
        "residuals": {
            "gradient_norm": res.gradient_norm,
            "rotation_orthogonality": ortho,
            "energy_history_non_increasing": bool(
                np.all(np.diff(res.energy_history) <= 0.0)
            ),
        },
        "energy_history": history,
        "wall_time_seconds": wall,
        "config": case.raw,
    }


def _solve_case(case):
    surf = case.build_surface()
    m = case.build_material()
    loads = case.build_loads()
    bc = case.build_boundary()
    opts = case.build_solver()
    cfg0 = Configuration(y=surf.y0.copy(), R=surf.Q0.copy())
    t0 = time.perf_counter()
    try:
        res = minimize(cfg0, surf, m, loads, bc, opts)
    except LineSearchFailure as exc:
        res = exc.result
    wall = time.perf_counter() - t0
    return surf, m, res, wall


def cmd_solve(args) -> int:
    try:
        case = load_case(args.config)
        surf, m, res, wall = _solve_case(case)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NullSpaceDetected, ValueError) as exc:
        print(f"case error: {exc}", file=sys.stderr)
        return 1

    out = args.out or case.output.get("result", "result.json")
    _write(out, dump_json(_result_payload(case, surf, m, res, wall)))
    fields = args.fields or case.output.get("fields")
    if fields:
        write_fields_csv(fields, surf, res)
    print(
        f"{res.status}: iterations={res.iterations} "
        f"functional={res.functional_value:.10e} "
        f"gradient_norm={res.gradient_norm:.3e}"
    )
    return 0 if res.converged else 2


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    report = run_suite(args.suite, args.seed)
    _write(args.out, dump_json(report))
    counts = report["counts"]
    print(
        f"suite={report['suite']} seed={report['seed']} "
        f"checks={counts['total']} failed={counts['failed']}"
    )
    for row in report["rows"]:
        if not row["pass"]:
            print(
                f"  FAIL {row['case']}/{row['quantity']}: "
                f"value={row['value']:.6e} tolerance={row['tolerance']:.6e}"
            )
    print("PASS" if report["passed"] else "FAIL")
    return 0 if report["passed"] else 2


# ---------------------------------------------------------------------------
# compare


def _family_pair(m):
    if m.family == "drill_active":
        return m, constitutive.counterpart(m)
    if m.family == "drill_free":
        return constitutive.counterpart(m), m
    raise ConfigError(
        "material.family",
        "compare needs engineering constants; custom coefficients have no counterpart",
    )


def _compare_entry(case, m, model):
    surf = case.build_surface()
    loads = case.build_loads()
    bc = case.build_boundary()
    opts = dataclasses.replace(case.build_solver(), energy_model=model)
    cfg0 = Configuration(y=surf.y0.copy(), R=surf.Q0.copy())
    try:
        res = minimize(cfg0, surf, m, loads, bc, opts)
    except LineSearchFailure as exc:
        res = exc.result
    disp = res.configuration.y - surf.y0
    normal_disp = np.einsum("ni,ni->n", disp, surf.normal)
    return {
        "status": res.status,
        "iterations": res.iterations,
        "functional": res.functional_value,
        "strain_energy": total_energy(res.configuration, surf, m, None, None, model),
        "max_displacement": float(np.linalg.norm(disp, axis=1).max()),
        "max_normal_deflection": float(np.abs(normal_disp).max()),
    }


def cmd_compare(args) -> int:
    try:
        case = load_case(args.config)
        m_active, m_free = _family_pair(case.build_material())
        entries = {
            "drill_active": _compare_entry(case, m_active, "quadratic_drill_active"),
            "drill_free": _compare_entry(case, m_free, "quadratic_drill_free"),
        }
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NullSpaceDetected, ValueError) as exc:
        print(f"case error: {exc}", file=sys.stderr)
        return 1

    a, f = entries["drill_active"], entries["drill_free"]
    payload = {
        "results": entries,
        "difference": {
            "strain_energy": a["strain_energy"] - f["strain_energy"],
            "functional": a["functional"] - f["functional"],
            "max_normal_deflection": a["max_normal_deflection"] - f["max_normal_deflection"],
        },
        "config": case.raw,
    }
    _write(args.out, dump_json(payload))

    header = f"{'model':>14s} {'status':>12s} {'iters':>6s} {'strain energy':>22s} {'max deflection':>22s}"
    print(header)
    for label, e in entries.items():
        print(
            f"{label:>14s} {e['status']:>12s} {e['iterations']:>6d} "
            f"{e['strain_energy']:>22.15e} {e['max_normal_deflection']:>22.15e}"
        )
    print(
        f"{'difference':>14s} {'':>12s} {'':>6s} "
        f"{payload['difference']['strain_energy']:>22.15e} "
        f"{payload['difference']['max_normal_deflection']:>22.15e}"
    )
    ok = all(e["status"] == "converged" for e in entries.values())
    return 0 if ok else 2


# ---------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="shell6p",
        description="six-parameter resultant shell: solve, verify, compare",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="minimize the energy of a case file")
    p_solve.add_argument("--config", required=True, help="case JSON path")
    p_solve.add_argument("--out", help="result JSON path (default from case or result.json)")
    p_solve.add_argument("--fields", help="optional per-node CSV path")
    p_solve.add_argument("--threads", type=int, help="numba thread cap")
    p_solve.set_defaults(func=cmd_solve)

    p_verify = sub.add_parser("verify", help="run a self-check suite")
    p_verify.add_argument(
        "--suite", choices=SUITE_NAMES + ("all",), default="all"
    )
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--out", default="report.json")
    p_verify.add_argument("--threads", type=int, help="numba thread cap")
    p_verify.set_defaults(func=cmd_verify)

    p_cmp = sub.add_parser(
        "compare", help="solve one case under both coefficient families"
    )
    p_cmp.add_argument("--config", required=True)
    p_cmp.add_argument("--out", default="compare.json")
    p_cmp.add_argument("--threads", type=int, help="numba thread cap")
    p_cmp.set_defaults(func=cmd_compare)

    args = parser.parse_args(argv)
    try:
        _apply_threads(args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
