"""Command-line front end: solve | verify | study | simulate.

All structured input comes from a JSON config file (a "version": 1 field
is required); flags only select the command, config path, output directory
and verbosity. Exit codes are a stable contract:

    0  success
    1  configuration error
    2  solver failure
    3  property-check failure (verify)
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import diagnostics, mc, operator as op_mod, solver as solver_mod
from .convex import ConvexError, MoreauEnvelope, NormMinusConstant, QuadraticForm
from .convex import body_from_config, check_envelope_properties, constraint_from_config
from .expr import ExprError
from .penalty import ConcaveBridgeStub, PenaltyFamily

__all__ = ["main", "cmd_solve", "cmd_verify", "cmd_study", "cmd_simulate"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_PROPERTY = 3


class ConfigError(ValueError):
    pass


def _load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict) or cfg.get("version") != 1:
        raise ConfigError('config must be a JSON object with "version": 1')
    return cfg


def _build_problem(cfg):
    try:
        pc = cfg["problem"]
        problem = op_mod.EllipticProblem(
            dim=int(pc["dim"]),
            box=pc["box"],
            a=pc["a"],
            b=pc.get("b", "0"),
            c=pc["c"],
            f=pc["f"],
            g=pc.get("g", "0"),
        )
    except KeyError as exc:
        raise ConfigError(f"problem block missing field {exc}") from exc
    return problem


def _build_shape(cfg, problem):
    try:
        shape = tuple(int(n) for n in cfg["grid"]["shape"])
    except KeyError as exc:
        raise ConfigError(f"grid block missing field {exc}") from exc
    if len(shape) != problem.dim:
        raise ConfigError("grid shape rank must match the problem dimension")
    return shape


def _build_schedule(cfg):
    sc = cfg.get("schedule")
    if sc is None:
        return solver_mod.ContinuationSchedule.default()
    newton_cfg = sc.get("newton", {})
    newton = solver_mod.NewtonParams(
        max_iter=int(newton_cfg.get("max_iter", 100)),
        abs_tol=float(newton_cfg.get("abs_tol", 1e-10)),
        armijo=float(newton_cfg.get("armijo", 1e-4)),
        min_step=float(newton_cfg.get("min_step", 2.0**-20)),
    )
    if "eps_list" in sc:
        return solver_mod.ContinuationSchedule(sc["eps_list"], newton=newton)
    return solver_mod.ContinuationSchedule.geometric(
        float(sc.get("eps_start", 0.5)),
        float(sc.get("eps_final", 0.5 * 2.0**-10)),
        factor=float(sc.get("factor", 2.0)),
        newton=newton,
    )


def _build_constraint(cfg, problem):
    try:
        return constraint_from_config(cfg["constraint"], dim=problem.dim)
    except KeyError as exc:
        raise ConfigError(f"constraint block missing field {exc}") from exc


def _build_penalty_factory(cfg):
    bridge = cfg.get("penalty_bridge", "standard")
    if bridge == "standard":
        return PenaltyFamily
    if bridge == "concave_stub":  # fault-injection hook for verify
        return ConcaveBridgeStub
    raise ConfigError(f"unknown penalty bridge {bridge!r}")


def _prepare_outdir(outdir):
    try:
        os.makedirs(outdir, exist_ok=True)
        probe = os.path.join(outdir, ".write_probe")
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as exc:
        raise ConfigError(f"output directory {outdir} is not writable: {exc}")


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_free_boundary_csv(path, u, mask):
    axes = u.interior_axes()
    names = mask.flag_names()
    boundary = np.zeros(mask.flags.shape, dtype=int)
    for cell in mask.boundary_cells():
        boundary[tuple(cell)] = 1
    with open(path, "w") as fh:
        if u.dim == 1:
            fh.write("x1,flag,on_boundary\n")
            for i, x in enumerate(axes[0]):
                fh.write(f"{x:.17g},{names[i]},{boundary[i]}\n")
        else:
            fh.write("x1,x2,flag,on_boundary\n")
            for i, x in enumerate(axes[0]):
                for j, y in enumerate(axes[1]):
                    fh.write(f"{x:.17g},{y:.17g},{names[i, j]},{boundary[i, j]}\n")


def cmd_solve(config_path, outdir, quiet=False):
    cfg = _load_config(config_path)
    problem = _build_problem(cfg)
    shape = _build_shape(cfg, problem)
    constraint = _build_constraint(cfg, problem)
    schedule = _build_schedule(cfg)
    _prepare_outdir(outdir)

    report = solver_mod.solve_constrained(problem, constraint, schedule, shape)
    op_mod.write_grid_csv(report.u, os.path.join(outdir, "solution.csv"))
    _write_free_boundary_csv(
        os.path.join(outdir, "free_boundary.csv"), report.u, report.free_boundary
    )
    payload = report.to_dict()
    payload["shape"] = list(shape)
    payload["h"] = list(report.u.h)
    payload["free_boundary_counts"] = report.free_boundary.counts()
    _write_json(os.path.join(outdir, "report.json"), payload)
    if not quiet:
        comp = report.complementarity
        print(
            f"solve: converged through {len(report.per_eps)} eps stages, "
            f"final residual {report.per_eps[-1].residual:.3e}, "
            f"complementarity upper {comp['max_upper']:.3e}"
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _check_penalty(factory, eps_values=(0.5, 0.1, 0.01), n=10_000, seed=0):
    rng = np.random.default_rng(seed)
    checks = []
    for eps in eps_values:
        fam = factory(eps)
        z = rng.uniform(-3.0, 3.0, size=n)
        zneg = z[z <= 0]
        ztail = np.abs(z) + 2 * eps
        beta = fam.beta(z)
        worst_zero = float(np.max(np.abs(fam.beta(zneg)))) if zneg.size else 0.0
        worst_tail = float(np.max(np.abs(fam.beta(ztail) - (ztail - eps) / eps)))
        worst_mono = float(np.max(np.maximum(-fam.beta_prime(z), 0.0)))
        hstep = eps / 7.0
        d2 = fam.beta(z + hstep) - 2 * beta + fam.beta(z - hstep)
        worst_convex = float(np.max(np.maximum(-d2, 0.0)))
        worst_growth = float(np.max(np.maximum(beta - z * fam.beta_prime(z), 0.0)))
        # C1 smoothness at the two junctions, centered differences
        d = 1e-8
        junction = 0.0
        for z0, target in ((0.0, 0.0), (2 * eps, 1.0 / eps)):
            slope = (fam.beta(z0 + d) - fam.beta(z0 - d)) / (2 * d)
            junction = max(junction, abs(slope - target))
        checks.append(
            {
                "name": f"penalty_eps_{eps:g}",
                "passed": bool(
                    worst_zero <= 1e-9
                    and worst_tail <= 1e-9
                    and worst_mono <= 1e-9
                    and worst_convex <= 1e-9
                    and worst_growth <= 1e-9
                    and junction <= 1e-6 * max(1.0, 1.0 / eps)
                ),
                "detail": {
                    "zero_branch": worst_zero,
                    "linear_tail": worst_tail,
                    "monotone": worst_mono,
                    "convex": worst_convex,
                    "growth_identity": worst_growth,
                    "c1_junctions": junction,
                },
            }
        )
    return checks


def _check_envelopes(dim, seed=1):
    rng = np.random.default_rng(seed)
    bases = [
        ("norm", NormMinusConstant(1.0, 1.0, dim=dim)),
        ("quadratic", QuadraticForm(np.eye(dim), 1.0)),
    ]
    checks = []
    for name, h0 in bases:
        samples = [
            (rng.uniform(-2, 2, size=dim), rng.uniform(-1, 1, size=dim))
            for _ in range(200)
        ]
        for t in (0.5, 0.1):
            rep = check_envelope_properties(h0, t, samples)
            ok = rep["origin_negative"] and rep["upper_max_violation"] <= 1e-8
            if rep["lower_max_violation"] is not None:
                ok = ok and rep["lower_max_violation"] <= 1e-8
            if rep["locality_max_violation"] is not None:
                ok = ok and rep["locality_max_violation"] <= 1e-6
            checks.append(
                {
                    "name": f"envelope_{name}_t_{t:g}",
                    "passed": bool(ok),
                    "detail": {
                        k: v
                        for k, v in rep.items()
                        if k not in ("count",)
                    },
                }
            )
    return checks


def cmd_verify(config_path, outdir, quiet=False):
    cfg = _load_config(config_path)
    problem = _build_problem(cfg)
    shape = _build_shape(cfg, problem)
    constraint = _build_constraint(cfg, problem)
    schedule = _build_schedule(cfg)
    factory = _build_penalty_factory(cfg)
    _prepare_outdir(outdir)
    tols = cfg.get("verify", {})
    comp_upper_tol = float(tols.get("comp_upper_tol", 1e-2))
    comp_slack_tol = float(tols.get("comp_slack_tol", 5e-2))

    checks = _check_penalty(factory)
    checks.extend(_check_envelopes(problem.dim))

    report = solver_mod.solve_constrained(problem, constraint, schedule, shape)
    g_floor = float(np.min(op_mod.boundary_grid(problem, shape).values))
    sw = diagnostics.sandwich_check(report.u, report.ubar)
    sw_ok = sw.upper_violation <= sw.tol and (
        g_floor < 0 or sw.lower_violation <= sw.tol
    )
    checks.append(
        {
            "name": "sandwich",
            "passed": bool(sw_ok),
            "detail": {
                "lower_violation": sw.lower_violation,
                "upper_violation": sw.upper_violation,
            },
        }
    )
    comp = report.complementarity
    checks.append(
        {
            "name": "complementarity",
            "passed": bool(
                comp["max_upper"] <= comp_upper_tol
                and comp["max_min_slack"] <= comp_slack_tol
            ),
            "detail": comp,
        }
    )
    f2 = f"({problem.f}) + 0.5"
    try:
        pairs = diagnostics.comparison_test(
            problem, constraint, [{"f": (problem.f, f2)}], schedule, shape
        )
        checks.append(
            {"name": "comparison", "passed": True, "detail": {"pairs": pairs}}
        )
    except diagnostics.ComparisonError as exc:
        checks.append(
            {"name": "comparison", "passed": False, "detail": {"error": str(exc)}}
        )

    all_passed = all(c["passed"] for c in checks)
    _write_json(
        os.path.join(outdir, "verify.json"),
        {"all_passed": all_passed, "checks": checks},
    )
    if not quiet:
        for c in checks:
            print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}")
    return EXIT_OK if all_passed else EXIT_PROPERTY


def cmd_study(config_path, outdir, quiet=False):
    cfg = _load_config(config_path)
    if "study" not in cfg:
        raise ConfigError("study block required")
    problem = _build_problem(cfg)
    constraint = _build_constraint(cfg, problem)
    schedule = _build_schedule(cfg)
    shapes = cfg["study"].get("shapes")
    if not shapes or len(shapes) < 3:
        raise ConfigError("study block needs at least 3 grid shapes")
    _prepare_outdir(outdir)
    result = diagnostics.convergence_study(problem, constraint, schedule, shapes)
    path = os.path.join(outdir, "rates.csv")
    with open(path, "w") as fh:
        fh.write("row_type,h,value_err,grad_err\n")
        for row in result["rows"]:
            fh.write(
                f"level,{row['h']:.17g},{row['value_err']:.17g},"
                f"{row['grad_err']:.17g}\n"
            )
        fh.write(f"fit,,{result['value_slope']:.17g},\n")
        fh.write(f"richardson,,{result['richardson_ratio']:.17g},\n")
    if not quiet:
        print(f"study: fitted value slope {result['value_slope']:.3f}")
    return EXIT_OK


def cmd_simulate(config_path, outdir, quiet=False):
    cfg = _load_config(config_path)
    if "mc" not in cfg:
        raise ConfigError("mc block required")
    for key in ("problem", "constraint", "grid"):
        if key not in cfg:
            raise ConfigError("free boundary required: config must include "
                              "problem, constraint and grid blocks to solve")
    problem = _build_problem(cfg)
    if problem.dim != 1:
        raise ConfigError("simulate supports 1D problems only")
    shape = _build_shape(cfg, problem)
    constraint = _build_constraint(cfg, problem)
    schedule = _build_schedule(cfg)
    mcc = cfg["mc"]
    try:
        body = body_from_config(mcc["body"])
        x0_list = [float(x) for x in np.atleast_1d(mcc["x0"])]
        n_paths = int(mcc["n_paths"])
        dt = float(mcc["dt"])
        seed = int(mcc.get("seed", 0))
    except KeyError as exc:
        raise ConfigError(f"mc block missing field {exc}") from exc
    _prepare_outdir(outdir)

    report = solver_mod.solve_constrained(problem, constraint, schedule, shape)
    estimates = []
    for x0 in x0_list:
        region = mc.policy_region_from_mask(report.u, report.free_boundary, x0)
        est = mc.estimate_value(problem, region, body, x0, n_paths, dt, seed)
        entry = est.to_dict()
        entry["region"] = list(region)
        entry["pde_value"] = _interp_grid(report.u, x0)
        estimates.append(entry)
        if not quiet:
            print(
                f"simulate: x0={x0:g} mean={est.mean:.5f} "
                f"se={est.std_error:.5f} pde={entry['pde_value']:.5f}"
            )
    _write_json(os.path.join(outdir, "mc.json"), {"estimates": estimates})
    return EXIT_OK


def _interp_grid(u, x0):
    axes = u.axes()
    return float(np.interp(x0, axes[0], u.values))


# ---------------------------------------------------------------------------


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="gchjb",
        description=(
            "Solve max{Lu - f, H(Du)} = 0 on a box by penalization, verify "
            "its certified properties, run refinement studies, or cross-"
            "check against Monte Carlo simulation."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "verify", "study", "simulate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    handlers = {
        "solve": cmd_solve,
        "verify": cmd_verify,
        "study": cmd_study,
        "simulate": cmd_simulate,
    }
    try:
        return handlers[args.command](args.config, args.out, quiet=args.quiet)
    except (ConfigError, ExprError, ConvexError, op_mod.ValidationError,
            op_mod.AssemblyError, mc.McError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except solver_mod.SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
