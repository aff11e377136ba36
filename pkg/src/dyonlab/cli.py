"""Command-line experiment runner.

    dyonlab <command> --config run.toml [--out DIR] [--seed N] [--format csv|json]

Exit status: 0 all checks pass, 1 a check failed, 2 configuration error,
3 runtime or numerical error. ``DYONLAB_THREADS`` caps the number of worker
threads used by ``verify-all``.
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import checks
from . import dynamics as dyn
from .checks import CheckResult
from .config import COMMANDS, ExperimentConfig, load_config
from .errors import ConfigError, DyonlabError
from .geometry import Curvature
from .model import Replacement, flatten_potential, iv2_residual
from .output import validate_report, write_csv, write_json
from .quantum import (RadialProblem, analytic_spectrum, radial_eigenvalues, selection_rule_table,
                      sphere_coulomb_spectrum)

__all__ = ["main", "dispatch", "TRAJECTORY_HEADER", "EXIT_OK", "EXIT_CHECK", "EXIT_CONFIG", "EXIT_RUNTIME"]

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

TRAJECTORY_HEADER = ["t", "x1", "x2", "x3", "pi1", "pi2", "pi3", "E", "J1", "J2", "J3", "A1", "A2", "A3",
                     "cone_residual"]
SPECTRUM_HEADER = ["s", "l", "n_r", "n", "energy", "reference", "relative_error"]
SELECTION_HEADER = ["l", "m", "lp", "mp", "component", "value"]
SECTION_HEADER = ["t", "x1", "x2", "x3", "pi1", "pi2", "pi3", "rho", "p_rho"]


def _threads() -> int:
    raw = os.environ.get("DYONLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"DYONLAB_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("DYONLAB_THREADS must be >= 1")
    return n


def _table(out_dir: Path, stem: str, fmt: str, header, rows) -> Path:
    if fmt == "csv":
        return write_csv(out_dir / f"{stem}.csv", header, rows)
    return write_json(out_dir / f"{stem}.json", {"columns": list(header), "rows": [list(r) for r in rows]})


# -- commands ------------------------------------------------------------------

def _need_initial(cfg: ExperimentConfig):
    if cfg.initial is None:
        raise ConfigError("this command needs an initial state: system.x/system.pi or "
                          "system.energy/system.angular_momentum")
    return cfg.initial


def cmd_simulate(cfg: ExperimentConfig, out_dir: Path, fmt: str):
    if cfg.is_nbody:
        system = cfg.raw["system"]
        traj = dyn.integrate_nbody(cfg.system, system["positions"], system["momenta"], cfg.integrator)
        E = dyn.energy_series(traj)
        n = cfg.system.n
        header = ["t"] + [f"x{i}_{k}" for i in range(n) for k in (1, 2, 3)] + \
                 [f"pi{i}_{k}" for i in range(n) for k in (1, 2, 3)] + ["E"]
        rows = [[t, *y, e] for t, y, e in zip(traj.times, traj.y, E)]
        return [_table(out_dir, cfg.output["trajectory"], fmt, header, rows)], []
    state0 = _need_initial(cfg)
    traj = dyn.integrate(cfg.system, state0, cfg.integrator)
    s = cfg.system.s
    alpha, _, _ = flatten_potential(cfg.system.potential)
    E = dyn.energy_series(traj)
    J = dyn.angular_momentum((traj.x, traj.pi), s)
    A = dyn.runge_lenz((traj.x, traj.pi), s, cfg.system.mu, alpha)
    cone = np.einsum("ij,ij->i", J, traj.x) - s * np.linalg.norm(traj.x, axis=1)
    rows = [[t, *y, e, *j, *a, c] for t, y, e, j, a, c in zip(traj.times, traj.y, E, J, A, cone)]
    path = _table(out_dir, cfg.output["trajectory"], fmt, TRAJECTORY_HEADER, rows)
    return [path], []


def _radial_problem(cfg):
    system = cfg.raw["system"]
    spec = cfg.system
    include = spec.replacement is not Replacement.NONE
    if system["alpha"] and not system["omega"]:
        return RadialProblem.coulomb(system["alpha"], spec.metric, spec.mu, include), "coulomb"
    if system["omega"] and not system["alpha"]:
        return RadialProblem.oscillator(system["omega"], spec.metric, spec.mu, include), "oscillator"
    raise ConfigError("spectrum needs exactly one of system.alpha and system.omega to be nonzero")


def _reference(kind, cfg, n_r, l):
    spec = cfg.system
    n = n_r + l + 1
    if spec.replacement is Replacement.NONE and cfg.quantum_s:
        return None
    if kind == "coulomb":
        alpha = cfg.raw["system"]["alpha"]
        if spec.metric.curvature is Curvature.FLAT:
            return analytic_spectrum(spec.mu, alpha, n)
        if spec.metric.curvature is Curvature.SPHERE:
            return sphere_coulomb_spectrum(spec.mu, alpha, n, spec.metric.r0)
        return None
    if spec.metric.curvature is Curvature.FLAT:
        return cfg.raw["system"]["omega"] * (2 * n_r + l + 1.5)
    return None


def cmd_spectrum(cfg: ExperimentConfig, out_dir: Path, fmt: str, tol: float = 1e-4):
    if cfg.is_nbody:
        raise ConfigError("spectrum is defined for single-particle systems only")
    problem, kind = _radial_problem(cfg)
    s = cfg.quantum_s
    rows, worst, have_ref = [], 0.0, False
    l = abs(s)
    while l <= cfg.l_max + 1e-12 and l + 1 <= cfg.n_max + 1e-12:
        count = int(round(cfg.n_max - l - 1)) + 1
        for res in radial_eigenvalues(problem, l, s, count, cfg.grid):
            ref = _reference(kind, cfg, res.n_r, l)
            rel = None if ref is None else abs(res.energy - ref) / abs(ref)
            if rel is not None:
                have_ref = True
                worst = max(worst, rel)
            rows.append([s, l, res.n_r, res.n_r + l + 1, res.energy,
                         "" if ref is None else ref, "" if rel is None else rel])
        l += 1
    path = _table(out_dir, cfg.output["spectrum"], fmt, SPECTRUM_HEADER, rows)
    results = [CheckResult.le("spectrum_relative_error", "spectrum", worst, tol)] if have_ref else []
    return [path], results


def cmd_fields_check(cfg: ExperimentConfig, out_dir: Path, fmt: str, rng):
    if cfg.is_nbody or not cfg.system.centers:
        raise ConfigError("fields-check needs at least one [[centers]] entry")
    centers = list(cfg.system.centers)
    results = []
    if cfg.system.metric.is_flat:
        results += checks.check_duality(centers, rng)
    else:
        results += checks.check_duality(centers, rng, metric=cfg.system.metric, n_points=20)
    results += checks.check_flux(centers)
    results += checks.check_green(metrics=[cfg.system.metric])
    if cfg.system.susy_kappa is not None:
        kappa = cfg.system.susy_kappa
        pts = checks.random_field_points(centers, 20, rng)
        res = _iv2(centers, kappa, pts, rng.normal(size=(20, 3)), cfg.system.metric)
        results.append(CheckResult.le("iv2_residual", "completed-square", res.residual, 1e-10,
                                      "" if res.precondition_ok else "q_i = kappa g_i violated"))
    return [], results


def _iv2(centers, kappa, pts, moms, metric):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return iv2_residual(centers, kappa, pts, moms, metric)


def cmd_selection_rules(cfg: ExperimentConfig, out_dir: Path, fmt: str):
    s = cfg.quantum_s
    table = selection_rule_table(s, cfg.l_max)
    path = _table(out_dir, cfg.output["selection"], fmt, SELECTION_HEADER, table)
    results = []
    if s == 0:
        got = {(l, m, lp, mp) for l, m, lp, mp, _, _ in table}
        mismatch = len(got ^ checks.standard_rule_set(0.0, cfg.l_max))
        results.append(CheckResult.le("standard_rules_s0", "selection-rules", mismatch, 0))
    return [path], results


def _section_coordinates(section, x, p):
    n = np.asarray(section.normal, float)
    n = n / np.linalg.norm(n)
    d = x - np.asarray(section.point, float)
    d = d - np.outer(d @ n, n)
    rho = np.linalg.norm(d, axis=1)
    prho = np.einsum("ij,ij->i", d, p) / np.where(rho > 0, rho, 1.0)
    return rho, prho


def cmd_poincare(cfg: ExperimentConfig, out_dir: Path, fmt: str):
    if cfg.is_nbody:
        raise ConfigError("poincare is defined for single-particle systems only")
    state0 = _need_initial(cfg)
    st = cfg.section_settings
    res = dyn.poincare_section(cfg.system, state0, cfg.section, st["crossings"], cfg.integrator.h,
                               st["t_max"], st["tol"])
    rho, prho = _section_coordinates(cfg.section, res.x, res.pi)
    rows = [[t, *y[:6], a, b] for t, y, a, b in zip(res.times, res.y, rho, prho)]
    path = _table(out_dir, cfg.output["section"], fmt, SECTION_HEADER, rows)
    if len(rho) >= 8:
        dev = dyn.closed_curve_deviation(np.column_stack([rho, prho]))
    else:
        dev = math.inf
    detail = f"{len(rho)} crossings" + ("" if res.complete else " (incomplete)")
    return [path], [CheckResult.le("section_regularity", "poincare-regularity", dev, st["regularity_tol"], detail)]


def cmd_verify_all(cfg: ExperimentConfig, out_dir: Path, fmt: str, rng):
    threads = _threads()
    if threads == 1:
        return [], checks.run_battery(rng)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return [], checks.run_battery(rng, pool)


# -- dispatch ------------------------------------------------------------------

def dispatch(cfg: ExperimentConfig, out_dir, fmt: str | None = None, seed: int | None = None):
    """Run ``cfg.command``; returns ``(exit_status, report)`` and writes the report file."""
    out_dir = Path(out_dir)
    fmt = fmt or cfg.output["format"]
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    report = {"command": cfg.command, "seed": int(seed), "passed": False, "checks": [], "artifacts": []}
    status = EXIT_OK
    try:
        if cfg.command == "simulate":
            paths, results = cmd_simulate(cfg, out_dir, fmt)
        elif cfg.command == "spectrum":
            paths, results = cmd_spectrum(cfg, out_dir, fmt)
        elif cfg.command == "fields-check":
            paths, results = cmd_fields_check(cfg, out_dir, fmt, rng)
        elif cfg.command == "selection-rules":
            paths, results = cmd_selection_rules(cfg, out_dir, fmt)
        elif cfg.command == "poincare":
            paths, results = cmd_poincare(cfg, out_dir, fmt)
        else:
            paths, results = cmd_verify_all(cfg, out_dir, fmt, rng)
        report["artifacts"] = [p.name for p in paths]
        report["checks"] = [r.as_dict() for r in results]
        report["passed"] = all(r.passed for r in results)
        status = EXIT_OK if report["passed"] else EXIT_CHECK
    except ConfigError as exc:
        report["error"] = f"config: {exc}"
        status = EXIT_CONFIG
    except (DyonlabError, ArithmeticError, ValueError, OSError) as exc:
        report["error"] = f"{type(exc).__name__}: {exc}"
        status = EXIT_RUNTIME
    validate_report(report)
    write_json(out_dir / cfg.output["report"], report)
    return status, report


def _parser():
    p = argparse.ArgumentParser(prog="dyonlab", description="MICZ-Kepler and dyon-field experiment runner.")
    p.add_argument("command", nargs="?", choices=COMMANDS,
                   help="experiment to run (defaults to the command in the config file)")
    p.add_argument("--config", required=True, help="TOML experiment file")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="seed for random verification points")
    p.add_argument("--format", choices=("csv", "json"), default=None, help="table output format")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("dyonlab: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        if args.command:
            cfg = dataclasses.replace(cfg, command=args.command)
        _threads()
    except ConfigError as exc:
        print(f"dyonlab: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status, report = dispatch(cfg, args.out, args.format, args.seed)
    for entry in report["checks"]:
        mark = "PASS" if entry["passed"] else "FAIL"
        print(f"{mark} {entry['name']}: residual={entry['residual']} tol={entry['tolerance']}")
    if "error" in report:
        print(f"dyonlab: {report['error']}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
