"""Run orchestration for the command-line subcommands.

Each ``run_*`` function takes a validated ``RunConfig`` and an output
directory, writes its artifacts and returns an exit status.
"""

import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import __version__
from ..discretization import build_grid, build_robin_operator
from ..potentials import (affine_minorant, check_coercivity, check_fenchel_young,
                          check_symmetry)
from ..reference_solver import (NewtonConfig, relative_l2q_distance, solve_reference,
                                step_differences)
from ..state_dynamics import make_problem
from ..variational_solver import (VerifyTolerances, continuation_solve, gap_integrand,
                                  verify_weak_solution)
from .config import RunConfig, config_to_dict
from .serialize import write_csv, write_json, write_trajectory

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3
SWEEP_AXES = ("lambda", "sigma", "steps", "cells")
TOOL = "brezis-ekeland"

# Fenchel-Young tolerances for the hard check
FY_VIOLATION_TOL = 1e-10
FY_EQUALITY_TOL = 1e-8


def build_problem(cfg: RunConfig):
    """Grid, operator, sampled data and potential for a configuration."""
    grid = build_grid(cfg.domain.dim, cfg.domain.lengths, cfg.domain.cells)
    op = build_robin_operator(grid, cfg.robin_alpha)
    f, y0 = cfg.field_presets()
    data = make_problem(grid, op, cfg.time.T, cfg.time.steps, f, y0, cfg.data.box)
    return data, cfg.potential_spec()


def _newton_config(cfg):
    return NewtonConfig(tol=cfg.reference.newton_tol, max_iter=cfg.reference.max_iter)


def _header(cfg):
    return {"tool": {"name": TOOL, "version": __version__},
            "config": config_to_dict(cfg),
            "defaults_applied": list(cfg.defaults_applied)}


def solve_and_report(cfg: RunConfig):
    """Run the continuation solve; returns ``(traj, data, spec, report_dict, verdict)``."""
    data, spec = build_problem(cfg)
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        traj, rep = continuation_solve(data, spec, cfg.solver)
    elapsed = time.perf_counter() - t0
    check = verify_weak_solution(traj, data, spec, VerifyTolerances(gap=cfg.solver.gap_tol))
    stages = [{"index": s.index, "lambda": s.lam, "sigma": s.sigma, "iterations": s.iterations,
               "converged": s.converged, "stalled": s.stalled, "regularized_J": s.regularized_J,
               "gap": s.gap, "grad_norm": s.grad_norm, "cg_iterations": s.cg_iterations}
              for s in rep.stages]
    body = {
        "J": rep.J, "gap": rep.gap, "gap_location": {"step": rep.gap_location[0], "node": rep.gap_location[1]},
        "energy_residual": rep.energy_residual, "inclusion_violation": rep.inclusion_violation,
        "constraint_residual": rep.constraint_residual, "verdict": rep.verdict,
        "converged": rep.converged, "failed_stage": rep.failed_stage,
        "short_circuit": rep.short_circuit, "warnings": rep.warnings, "stages": stages,
        "total_iterations": rep.total_iterations,
        "weak_solution": {"constraint_residual": check.constraint_residual,
                          "energy_residual": check.energy_residual, "gap": check.gap,
                          "box_ok": check.box_ok, "y_min": check.y_min, "y_max": check.y_max,
                          "verdict": check.verdict},
    }
    timing = {"total_seconds": elapsed, "stage_seconds": rep.stage_seconds}
    return traj, data, spec, body, timing, rep.verdict


def run_solve(cfg: RunConfig, out_dir=None) -> int:
    """Write ``report.json`` and ``trajectory.csv``; exit 0 iff the verdict holds."""
    out = Path(out_dir or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    traj, data, spec, body, timing, verdict = solve_and_report(cfg)
    if "json" in cfg.output.formats:
        write_json(out / "report.json", {**_header(cfg), "report": body, "timing": timing})
    if "csv" in cfg.output.formats:
        write_trajectory(out / "trajectory.csv", traj, data, gap_integrand(traj, data, spec))
    print(f"gap {body['gap']:.6e}  energy residual {body['energy_residual']:.3e}  "
          f"verdict {'true' if verdict else 'false'}")
    return EXIT_OK if verdict else EXIT_FAILED


def run_compare(cfg: RunConfig, out_dir=None) -> int:
    """Variational solve against the implicit-Euler reference on the same data."""
    out = Path(out_dir or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    traj, data, spec, body, timing, verdict = solve_and_report(cfg)
    t0 = time.perf_counter()
    ref = solve_reference(data, spec, cfg.reference.lam, _newton_config(cfg))
    timing["reference_seconds"] = time.perf_counter() - t0
    l2, vd = step_differences(traj, ref, data)
    dist = relative_l2q_distance(traj, ref, data)
    write_csv(out / "comparison.csv", ("k", "t", "l2_diff", "vdual_diff"),
              [(k, k * data.dt, l2[k], vd[k]) for k in range(data.K + 1)])
    summary = {"relative_l2q_distance": dist, "max_l2_diff": float(np.max(l2)),
               "max_vdual_diff": float(np.max(vd)), "variational_gap": body["gap"],
               "variational_verdict": verdict, "reference_lambda": cfg.reference.lam}
    write_json(out / "summary.json", {**_header(cfg), "summary": summary, "timing": timing})
    print(f"relative L2(Q) distance {dist:.6e}")
    return EXIT_OK


def sweep_config(cfg: RunConfig, axis, value) -> RunConfig:
    """Configuration with one axis replaced by ``value``."""
    if axis == "lambda":
        return replace(cfg, solver=replace(cfg.solver, lambda_schedule=(float(value),)))
    if axis == "sigma":
        return replace(cfg, solver=replace(cfg.solver, sigma_schedule=(float(value),)))
    if axis == "steps":
        return replace(cfg, time=replace(cfg.time, steps=int(value)))
    if axis == "cells":
        return replace(cfg, domain=replace(cfg.domain, cells=(int(value),) * cfg.domain.dim))
    raise ValueError(f"unknown sweep axis {axis!r}")


SWEEP_COLUMNS = ("value", "gap", "energy_residual", "iterations", "runtime", "reference_distance", "error")


def _sweep_row(args):
    cfg, axis, value, with_reference = args
    t0 = time.perf_counter()
    try:
        c = sweep_config(cfg, axis, value)
        traj, data, spec, body, _, _ = solve_and_report(c)
        dist = None
        if with_reference:
            ref = solve_reference(data, spec, c.reference.lam, _newton_config(c))
            dist = relative_l2q_distance(traj, ref, data)
        return (value, body["gap"], body["energy_residual"], body["total_iterations"],
                time.perf_counter() - t0, dist, "")
    except Exception as exc:  # recorded in-row; the sweep continues
        return (value, None, None, None, time.perf_counter() - t0, None, f"{type(exc).__name__}: {exc}")


def validate_sweep_values(values):
    vals = [float(v) for v in values]
    if any(not v > 0 for v in vals):
        raise ValueError("sweep values must be positive")
    d = np.diff(vals)
    if len(vals) > 1 and not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("sweep values must be strictly monotone")
    return vals


def run_sweep(cfg: RunConfig, axis, values, out_dir=None, jobs=1, with_reference=False):
    """One solve per value; writes ``sweep.csv`` and returns ``(status, rows)``."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}")
    vals = validate_sweep_values(values)
    out = Path(out_dir or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, axis, v, with_reference) for v in vals]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_row, tasks))
    else:
        rows = [_sweep_row(t) for t in tasks]
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    for r in rows:
        print(f"{axis}={r[0]:g}  gap={'-' if r[1] is None else format(r[1], '.3e')}  {r[6]}")
    return EXIT_OK, rows


def run_check_potential(cfg: RunConfig, out_dir=None) -> int:
    """Assumption checks on the configured potential; exit 1 only if Fenchel-Young fails."""
    spec = cfg.potential_spec()
    fy = check_fenchel_young(spec)
    coer = check_coercivity(spec)
    sym = check_symmetry(spec, 10.0)
    aff = affine_minorant(spec)
    fy_ok = fy.max_violation <= FY_VIOLATION_TOL and fy.max_equality_defect <= FY_EQUALITY_TOL
    rows = [
        ("fenchel_young", "pass" if fy_ok else "FAIL",
         f"max violation {fy.max_violation:.2e}, equality defect {fy.max_equality_defect:.2e}"),
        ("coercivity", "pass" if coer.weakly_coercive else "warn",
         f"superlinear j {coer.superlinear_j}, superlinear j* {coer.superlinear_jstar}"),
        ("symmetry", "pass" if sym.holds else "warn",
         f"gamma1={sym.gamma1:g}, gamma2={sym.gamma2:g}, worst at r={sym.worst_ratio_location:g}"),
        ("affine_minorant", "pass" if aff.verified else "warn",
         f"k1={aff.k1:g} k2={aff.k2:g} k3={aff.k3:g} k4={aff.k4:g}"),
    ]
    width = max(len(r[0]) for r in rows)
    for name, status, detail in rows:
        print(f"{name:<{width}}  {status:<4}  {detail}")
    if out_dir is not None or "json" in cfg.output.formats:
        out = Path(out_dir or cfg.output.directory)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "check_potential.json", {
            **_header(cfg),
            "checks": {"fenchel_young": fy, "coercivity": {**coer.__dict__, "weakly_coercive": coer.weakly_coercive},
                       "symmetry": sym, "affine_minorant": aff},
            "status": {name: status for name, status, _ in rows},
        })
    return EXIT_OK if fy_ok else EXIT_FAILED
