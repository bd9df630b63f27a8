"""Executable checks and studies on solver output.

Covers the ordering bounds (solution between 0 and the unconstrained
solution, monotonicity in the data), extraction of the free boundary
separating the PDE region from the gradient-constrained region, empirical
regularity statistics on interior subdomains, and refinement studies for
convergence rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import operator as op_mod
from . import solver as solver_mod

__all__ = [
    "SandwichResult",
    "sandwich_check",
    "FreeBoundaryMask",
    "free_boundary",
    "RegularityReport",
    "regularity_scan",
    "ComparisonError",
    "comparison_test",
    "convergence_study",
]

PDE_ACTIVE = 0
CONSTRAINT_ACTIVE = 1
BOTH_NEAR = 2

_FLAG_NAMES = {PDE_ACTIVE: "pde_active", CONSTRAINT_ACTIVE: "constraint_active",
               BOTH_NEAR: "both_near"}


@dataclass
class SandwichResult:
    passed: bool
    max_violation: float
    lower_violation: float
    upper_violation: float
    tol: float


def sandwich_check(u, ubar, tol=1e-8):
    """Check -tol <= u <= ubar + tol pointwise on the full grid."""
    lower = float(np.max(np.maximum(-u.values, 0.0)))
    upper = float(np.max(np.maximum(u.values - ubar.values, 0.0)))
    worst = max(lower, upper)
    return SandwichResult(worst <= tol, worst, lower, upper, tol)


@dataclass
class FreeBoundaryMask:
    """Per-interior-point branch flags plus the extracted interface."""

    flags: np.ndarray  # interior shape, values in {0, 1, 2}
    tol: float
    pde_residual: np.ndarray = field(repr=False)
    constraint_residual: np.ndarray = field(repr=False)

    def flag_names(self):
        return np.vectorize(_FLAG_NAMES.get)(self.flags)

    def counts(self):
        return {
            name: int(np.sum(self.flags == flag))
            for flag, name in _FLAG_NAMES.items()
        }

    def boundary_cells(self):
        """Interior cells where the flag differs from an axis neighbor."""
        flags = self.flags
        active = flags != PDE_ACTIVE
        edge = np.zeros_like(flags, dtype=bool)
        if flags.ndim == 1:
            change = active[1:] != active[:-1]
            edge[1:] |= change
            edge[:-1] |= change
        else:
            change = active[1:, :] != active[:-1, :]
            edge[1:, :] |= change
            edge[:-1, :] |= change
            change = active[:, 1:] != active[:, :-1]
            edge[:, 1:] |= change
            edge[:, :-1] |= change
        return np.argwhere(edge)


def free_boundary(u, constraint, opr, f_h, tol=1e-6):
    """Flag each interior point by which branch of the equation is active.

    Points where both |Lu - f| and |H(Du)| fall within tol are flagged
    both_near; otherwise a point gets the branch whose residual is smaller,
    which makes the flags exhaustive and exclusive.
    """
    lu_vals = op_mod.apply_operator(opr, u).interior_flat()
    pde_res = np.abs(lu_vals - np.asarray(f_h).reshape(-1))
    grads = op_mod.gradient(u).reshape(-1, u.dim)
    con_res = np.abs(constraint.value_many(grads))
    flags = np.where(pde_res <= con_res, PDE_ACTIVE, CONSTRAINT_ACTIVE)
    flags = np.where((pde_res <= tol) & (con_res <= tol), BOTH_NEAR, flags)
    shape = u.shape
    return FreeBoundaryMask(
        flags.reshape(shape),
        tol,
        pde_res.reshape(shape),
        con_res.reshape(shape),
    )


# ---------------------------------------------------------------------------
# regularity


@dataclass
class RegularityReport:
    interior_margin: float
    sup_grad: float
    sup_second_diff: float
    holder_alpha_estimate: float
    holder_alpha_raw: float
    holder_r2: float
    second_diff_spread: float  # max/min of sup_second across eps at finest h
    table: list  # one row per (eps, h) pair

    def bounded_in_eps(self, rel=0.2):
        return self.second_diff_spread <= 1.0 + rel


def _interior_mask(gf, margin_cells):
    shape = gf.shape
    if gf.dim == 1:
        m = np.zeros(shape, dtype=bool)
        m[margin_cells : shape[0] - margin_cells] = True
        return m
    m = np.zeros(shape, dtype=bool)
    m[margin_cells : shape[0] - margin_cells,
      margin_cells : shape[1] - margin_cells] = True
    return m


def _holder_fit(gf, margin_cells, n_pairs=600, seed=7, min_per_scale=10):
    """Regress log gradient differences on log distances over point pairs."""
    grads = op_mod.gradient(gf)
    mask = _interior_mask(gf, margin_cells)
    axes = gf.interior_axes()
    if gf.dim == 1:
        coords = axes[0].reshape(-1, 1)
        gvals = grads.reshape(-1, 1)
    else:
        xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
        coords = np.stack([xx.ravel(), yy.ravel()], axis=1)
        gvals = grads.reshape(-1, gf.dim)
    keep = mask.reshape(-1)
    coords, gvals = coords[keep], gvals[keep]
    rng = np.random.default_rng(seed)
    n = len(coords)
    i = rng.integers(0, n, size=n_pairs)
    j = rng.integers(0, n, size=n_pairs)
    ok = i != j
    i, j = i[ok], j[ok]
    dist = np.linalg.norm(coords[i] - coords[j], axis=1)
    diff = np.linalg.norm(gvals[i] - gvals[j], axis=1)
    ok = (dist > 0) & (diff > 0)
    dist, diff = dist[ok], diff[ok]
    if len(dist) < 2 * min_per_scale:
        return float("nan"), float("nan")
    # keep only distance octaves populated by enough pairs
    octave = np.floor(np.log2(dist / np.min(dist))).astype(int)
    counts = np.bincount(octave)
    good = np.isin(octave, np.flatnonzero(counts >= min_per_scale))
    dist, diff = dist[good], diff[good]
    if len(dist) < 2 * min_per_scale:
        return float("nan"), float("nan")
    x, y = np.log(dist), np.log(diff)
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def regularity_scan(solves, margin_cells=5):
    """Gradient and second-difference statistics across eps and h.

    solves is a list of (eps, gridfunction) pairs covering at least three
    eps values and two grid resolutions. Statistics are taken on the
    interior submesh margin_cells away from the boundary, which also keeps
    box corners out of the sample. The Hoelder exponent comes from a
    log-log fit of gradient differences; it is reported with its R^2 and
    never used as a hard gate.
    """
    eps_values = sorted({e for e, _ in solves})
    h_values = sorted({gf.h for _, gf in solves})
    if len(eps_values) < 3:
        raise ValueError("regularity scan needs at least 3 eps values")
    if len(h_values) < 2:
        raise ValueError("regularity scan needs at least 2 grid resolutions")

    table = []
    for eps, gf in solves:
        mask = _interior_mask(gf, margin_cells)
        grads = op_mod.gradient(gf)
        d2 = op_mod.second_differences(gf)
        gnorm = np.linalg.norm(grads, axis=-1)
        dmax = np.max(np.abs(d2), axis=-1)
        table.append(
            {
                "eps": eps,
                "h": max(gf.h),
                "sup_grad": float(np.max(gnorm[mask])),
                "sup_second_diff": float(np.max(dmax[mask])),
            }
        )

    finest_h = min(row["h"] for row in table)
    finest = [r for r in table if r["h"] == finest_h]
    sups = [r["sup_second_diff"] for r in finest]
    spread = max(sups) / min(sups) if min(sups) > 0 else float("inf")

    fine_eps, fine_gf = min(
        ((e, gf) for e, gf in solves if max(gf.h) == finest_h),
        key=lambda pair: pair[0],
    )
    alpha_raw, r2 = _holder_fit(fine_gf, margin_cells)
    alpha = min(alpha_raw, 1.0) if np.isfinite(alpha_raw) else float("nan")
    margin = margin_cells * finest_h
    return RegularityReport(
        interior_margin=margin,
        sup_grad=max(r["sup_grad"] for r in finest),
        sup_second_diff=max(sups),
        holder_alpha_estimate=alpha,
        holder_alpha_raw=alpha_raw,
        holder_r2=r2,
        second_diff_spread=spread,
        table=table,
    )


# ---------------------------------------------------------------------------
# comparison principle surrogate


class ComparisonError(AssertionError):
    """Ordered data produced unordered solutions: scheme monotonicity bug."""


def comparison_test(problem, constraint, perturbations, schedule, shape, tol=1e-8):
    """Solve ordered data pairs and assert pointwise ordering of solutions.

    perturbations is a list of dicts {"f": (f1, f2)} or {"g": (g1, g2)}
    with f1 <= f2 (resp. g1 <= g2) pointwise. A violation beyond tol raises
    ComparisonError: on a monotone discretization ordering is structural,
    not a tolerance matter.
    """
    results = []
    for pert in perturbations:
        if "f" in pert:
            lo_expr, hi_expr = pert["f"]
            p1 = replace(problem, f=lo_expr, gamma=None, delta=None)
            p2 = replace(problem, f=hi_expr, gamma=None, delta=None)
            label = f"f: {lo_expr} <= {hi_expr}"
        elif "g" in pert:
            lo_expr, hi_expr = pert["g"]
            p1 = replace(problem, g=lo_expr, gamma=None, delta=None)
            p2 = replace(problem, g=hi_expr, gamma=None, delta=None)
            label = f"g: {lo_expr} <= {hi_expr}"
        else:
            raise ValueError("perturbation must order f or g")
        r1 = solver_mod.solve_constrained(p1, constraint, schedule, shape)
        r2 = solver_mod.solve_constrained(p2, constraint, schedule, shape)
        violation = float(np.max(r1.u.values - r2.u.values))
        results.append({"pair": label, "violation": violation})
        if violation > tol:
            raise ComparisonError(
                f"comparison violated for {label}: u1 exceeds u2 by {violation:.3e}"
            )
    return results


# ---------------------------------------------------------------------------
# convergence study


def _restrict_to(gf_fine, gf_coarse):
    """Fine-grid values sampled at coarse grid points (nested refinement)."""
    ratios = []
    for (nf,), (nc,) in zip(
        [(n,) for n in gf_fine.shape], [(n,) for n in gf_coarse.shape]
    ):
        r = (nf + 1) // (nc + 1)
        if (nc + 1) * r != nf + 1:
            raise ValueError("grids are not nested; use factor-of-two shapes")
        ratios.append(r)
    vals = gf_fine.values
    if gf_fine.dim == 1:
        return vals[:: ratios[0]]
    return vals[:: ratios[0], :: ratios[1]]


def convergence_study(
    problem, constraint, schedule, shapes, analytic=None, margin_cells=1
):
    """Error-vs-h table over nested grids with fitted convergence slopes.

    The reference is the analytic callable when given, otherwise the
    finest-grid solve (whose trustworthiness is reported through the
    Richardson ratio of successive differences). Gradient errors use the
    central-difference gradient on each grid.
    """
    if len(shapes) < 3:
        raise ValueError("need at least 3 grid levels")
    shapes = [tuple(int(n) for n in np.atleast_1d(s)) for s in shapes]
    shapes.sort(key=lambda s: s[0])
    reports = []
    for shape in shapes:
        rep = solver_mod.solve_constrained(problem, constraint, schedule, shape)
        reports.append(rep)

    rows = []
    if analytic is not None:
        for shape, rep in zip(shapes, reports):
            u = rep.u
            mesh = op_mod.grid_mesh(problem.box, shape)
            exact = np.asarray(analytic(*mesh), dtype=float)
            err = float(np.max(np.abs(u.values - exact)))
            ge = _gradient_error(u, analytic, margin_cells)
            rows.append({"h": max(u.h), "value_err": err, "grad_err": ge})
    else:
        ref = reports[-1].u
        for shape, rep in zip(shapes[:-1], reports[:-1]):
            u = rep.u
            ref_vals = _restrict_to(ref, u)
            err = float(np.max(np.abs(u.values - ref_vals)))
            rows.append({"h": max(u.h), "value_err": err, "grad_err": float("nan")})

    hs = np.array([r["h"] for r in rows])
    errs = np.array([r["value_err"] for r in rows])
    ok = errs > 0
    slope = float(np.polyfit(np.log(hs[ok]), np.log(errs[ok]), 1)[0]) if ok.sum() >= 2 else float("nan")
    richardson = float("nan")
    if len(rows) >= 3 and errs[-1] > 0:
        richardson = errs[-2] / errs[-1]
    return {"rows": rows, "value_slope": slope, "richardson_ratio": richardson}


def _gradient_error(u, analytic, margin_cells, delta=1e-6):
    """Sup error of the discrete gradient against finite differences of the
    analytic solution, away from the boundary."""
    grads = op_mod.gradient(u)
    mask = _interior_mask(u, margin_cells)
    axes = u.interior_axes()
    if u.dim == 1:
        x = axes[0]
        exact = (np.asarray(analytic(x + delta)) - np.asarray(analytic(x - delta))) / (
            2 * delta
        )
        diff = np.abs(grads[:, 0] - exact)
        return float(np.max(diff[mask]))
    xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
    ex = (np.asarray(analytic(xx + delta, yy)) - np.asarray(analytic(xx - delta, yy))) / (2 * delta)
    ey = (np.asarray(analytic(xx, yy + delta)) - np.asarray(analytic(xx, yy - delta))) / (2 * delta)
    diff = np.maximum(np.abs(grads[..., 0] - ex), np.abs(grads[..., 1] - ey))
    return float(np.max(diff[mask]))
