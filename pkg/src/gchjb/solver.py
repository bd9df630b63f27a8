"""Damped-Newton solver for the penalized equation with eps-continuation.

The discrete penalized problem is

    A u + beta_eps(H(D u)) = f

with A the monotone discretization of L, D the central-difference gradient
and Dirichlet values folded into the right-hand side. Each eps stage is
solved by semismooth Newton (generalized Jacobian built from a subgradient
selection of H) with backtracking on the residual sup norm, warm-started
from the previous stage. The first stage starts from the unconstrained
solution, which lies above the solution, so the active set is discovered
from the feasible side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import operator as op_mod
from .penalty import PenaltyFamily

__all__ = [
    "SolverError",
    "NewtonParams",
    "ContinuationSchedule",
    "EpsRecord",
    "SolveReport",
    "solve_unconstrained",
    "solve_penalized",
    "solve_constrained",
]


class SolverError(RuntimeError):
    """Newton stagnation or a singular linearized system."""


@dataclass(frozen=True)
class NewtonParams:
    max_iter: int = 100
    abs_tol: float = 1e-10
    armijo: float = 1e-4
    min_step: float = 2.0**-20

    def __post_init__(self):
        if self.abs_tol < 0 or self.min_step <= 0 or self.armijo <= 0:
            raise ValueError("Newton tolerances must be positive")


@dataclass
class ContinuationSchedule:
    eps_list: list
    newton: NewtonParams = field(default_factory=NewtonParams)

    def __post_init__(self):
        eps = [float(e) for e in self.eps_list]
        if not eps or any(e <= 0 for e in eps):
            raise ValueError("eps values must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps values must be strictly decreasing")
        self.eps_list = eps

    @classmethod
    def default(cls, newton=None):
        return cls(
            [0.5 * 2.0**-k for k in range(11)], newton=newton or NewtonParams()
        )

    @classmethod
    def geometric(cls, start, stop, factor=2.0, newton=None):
        if not 0 < stop <= start or factor <= 1:
            raise ValueError("need 0 < stop <= start and factor > 1")
        eps = []
        e = float(start)
        while e > stop * (1 + 1e-12):
            eps.append(e)
            e /= factor
        eps.append(float(stop))
        return cls(eps, newton=newton or NewtonParams())

    def clamped(self, theta):
        """Drop eps values >= theta (penalization assumes eps below the
        convexity modulus); returns (schedule, clamped_flag)."""
        if theta is None or theta <= 0 or math.isinf(theta):
            return self, False
        kept = [e for e in self.eps_list if e < theta]
        if not kept:
            kept = [theta / 2**k for k in range(1, 6)]
        if kept == self.eps_list:
            return self, False
        return ContinuationSchedule(kept, newton=self.newton), True


@dataclass
class EpsRecord:
    eps: float
    iterations: int
    residual: float
    max_beta: float
    sup_grad: float
    sup_second: float

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class SolveReport:
    u: op_mod.GridFunction
    ubar: op_mod.GridFunction
    per_eps: list
    free_boundary: object  # diagnostics.FreeBoundaryMask
    complementarity: dict
    eps_clamped: bool
    theta: float
    gamma: float
    delta: float

    def to_dict(self):
        return {
            "gamma": self.gamma,
            "delta": self.delta,
            "theta": self.theta,
            "eps_clamped": self.eps_clamped,
            "per_eps": [r.to_dict() for r in self.per_eps],
            "complementarity": self.complementarity,
            "sandwich": {
                "lower_violation": float(np.max(np.maximum(-self.u.values, 0.0))),
                "upper_violation": float(
                    np.max(np.maximum(self.u.values - self.ubar.values, 0.0))
                ),
            },
        }


def solve_unconstrained(problem, shape, opr=None):
    """Direct solve of L u = f with the Dirichlet data; no constraint."""
    if opr is None:
        op_mod.validate(problem, shape)
        opr = op_mod.assemble(problem, shape)
    f_h = op_mod.interior_values(problem, shape, problem.f)
    lu = spla.splu(sp.csc_matrix(opr.matrix))
    flat = lu.solve(f_h - opr.boundary)
    if not np.all(np.isfinite(flat)):
        raise SolverError("unconstrained solve produced non-finite values")
    base = op_mod.boundary_grid(problem, shape)
    return base.with_interior(flat)


def _central_difference_matrices(shape, h):
    """Interior-to-interior central difference operators per axis."""
    mats = []
    if len(shape) == 1:
        n = shape[0]
        c = sp.diags([-np.ones(n - 1), np.ones(n - 1)], offsets=[-1, 1]) / (2 * h[0])
        mats.append(sp.csr_matrix(c))
    else:
        n1, n2 = shape
        e1 = sp.diags([-np.ones(n1 - 1), np.ones(n1 - 1)], offsets=[-1, 1]) / (
            2 * h[0]
        )
        e2 = sp.diags([-np.ones(n2 - 1), np.ones(n2 - 1)], offsets=[-1, 1]) / (
            2 * h[1]
        )
        mats.append(sp.csr_matrix(sp.kron(e1, sp.identity(n2))))
        mats.append(sp.csr_matrix(sp.kron(sp.identity(n1), e2)))
    return mats


class _PenalizedSystem:
    """Residual and generalized Jacobian of the discrete penalized equation."""

    def __init__(self, problem, constraint, fam, shape, opr):
        self.problem = problem
        self.constraint = constraint
        self.fam = fam
        self.opr = opr
        self.shape = tuple(shape)
        self.f_h = op_mod.interior_values(problem, shape, problem.f)
        self.template = op_mod.boundary_grid(problem, shape)
        self.cdiff = _central_difference_matrices(self.shape, opr.h)
        self._rowsum = float(np.max(np.abs(opr.matrix).sum(axis=1)))
        self._fmax = float(np.max(np.abs(self.f_h))) + float(
            np.max(np.abs(opr.boundary), initial=0.0)
        )
        self._hmin = min(opr.h)
        if constraint.dim != problem.dim:
            raise ValueError("constraint dimension does not match the problem")

    def residual_floor(self, flat):
        """Attainable residual accuracy in double precision.

        The computed residual carries rounding noise of order
        eps * (|A| |u| + |f| + beta' |Du| noise); an absolute tolerance
        below this floor is unreachable on fine grids where the matrix
        scale is 1/h^2.
        """
        unorm = float(np.max(np.abs(flat), initial=0.0))
        bpmax = 1.0 / self.fam.epsilon
        return (
            4.0
            * np.finfo(float).eps
            * (self._rowsum * unorm + self._fmax + bpmax * unorm / self._hmin + 1.0)
        )

    def grid(self, flat):
        return self.template.with_interior(flat)

    def gradients(self, flat):
        return op_mod.gradient(self.grid(flat)).reshape(-1, self.problem.dim)

    def residual(self, flat):
        h_vals = self.constraint.value_many(self.gradients(flat))
        pen = self.fam.beta(h_vals)
        return self.opr.matrix @ flat + self.opr.boundary + pen - self.f_h

    def jacobian(self, flat):
        grads = self.gradients(flat)
        h_vals = self.constraint.value_many(grads)
        bp = self.fam.beta_prime(h_vals)
        subg = self.constraint.subgradient_many(grads)
        jac = self.opr.matrix
        for k, cmat in enumerate(self.cdiff):
            jac = jac + sp.diags(bp * subg[:, k]) @ cmat
        return sp.csc_matrix(jac)


def solve_penalized(
    problem, constraint, fam, shape, initial_guess=None, newton=None, opr=None
):
    """Solve A u + beta_eps(H(Du)) = f by damped semismooth Newton.

    Returns (GridFunction, iteration count). Raises SolverError when the
    backtracking line search collapses before the residual tolerance is met.
    """
    newton = newton or NewtonParams()
    if opr is None:
        op_mod.validate(problem, shape)
        opr = op_mod.assemble(problem, shape)
    if constraint.value(np.zeros(problem.dim)) >= 0:
        raise ValueError("constraint must be negative at zero gradient")
    system = _PenalizedSystem(problem, constraint, fam, shape, opr)
    if initial_guess is None:
        initial_guess = solve_unconstrained(problem, shape, opr=opr)
    flat = initial_guess.interior_flat().astype(float).copy()

    res = system.residual(flat)
    rnorm = float(np.max(np.abs(res)))
    for it in range(newton.max_iter):
        # the floor rescues realistic tolerances from rounding noise;
        # abs_tol = 0 explicitly demands the impossible and must stagnate
        tol = max(newton.abs_tol, system.residual_floor(flat)) if newton.abs_tol > 0 else 0.0
        if rnorm <= tol:
            return system.grid(flat), it
        try:
            lu = spla.splu(system.jacobian(flat))
        except RuntimeError as exc:  # singular factorization
            raise SolverError(f"linearized system is singular: {exc}") from exc
        step = lu.solve(-res)
        if not np.all(np.isfinite(step)):
            raise SolverError("Newton step is non-finite")
        s = 1.0
        while True:
            cand = flat + s * step
            cres = system.residual(cand)
            cnorm = float(np.max(np.abs(cres)))
            if cnorm <= (1.0 - newton.armijo * s) * rnorm:
                flat, res, rnorm = cand, cres, cnorm
                break
            s *= 0.5
            if s < newton.min_step:
                if cnorm <= tol or rnorm <= tol:
                    return system.grid(flat), it + 1
                raise SolverError(
                    f"Newton stagnation at eps={fam.epsilon:g}: residual "
                    f"{rnorm:.3e} above tolerance {tol:g}"
                )
    final_tol = (
        max(newton.abs_tol, system.residual_floor(flat)) if newton.abs_tol > 0 else 0.0
    )
    if rnorm <= final_tol:
        return system.grid(flat), newton.max_iter
    raise SolverError(
        f"Newton did not converge in {newton.max_iter} iterations at "
        f"eps={fam.epsilon:g}: residual {rnorm:.3e}"
    )


def complementarity_residuals(problem, constraint, u, opr=None):
    """Pointwise residuals of max{Lu - f, H(Du)} = 0 on the interior.

    Returns a dict with the positive part of each branch, of their max, and
    the worst min-slack (how far the nearer branch is from being active).
    """
    shape = u.shape
    if opr is None:
        opr = op_mod.assemble(problem, shape)
    lu_vals = op_mod.apply_operator(opr, u).interior_flat()
    f_h = op_mod.interior_values(problem, shape, problem.f)
    grads = op_mod.gradient(u).reshape(-1, problem.dim)
    h_vals = constraint.value_many(grads)
    pde = lu_vals - f_h
    upper = np.maximum(pde, h_vals)
    min_slack = np.minimum(-pde, -h_vals)
    return {
        "max_pde_excess": float(np.max(np.maximum(pde, 0.0))),
        "max_constraint_excess": float(np.max(np.maximum(h_vals, 0.0))),
        "max_upper": float(np.max(np.maximum(upper, 0.0))),
        "max_min_slack": float(np.max(np.maximum(min_slack, 0.0))),
    }


def solve_constrained(problem, constraint, schedule, shape):
    """Continuation along the eps schedule, warm-starting every stage."""
    op_mod.validate(problem, shape)
    opr = op_mod.assemble(problem, shape)
    theta = min(1.0, constraint.curvature_lower())
    sched, clamped = schedule.clamped(theta if theta > 0 else None)

    ubar = solve_unconstrained(problem, shape, opr=opr)
    u = ubar
    records = []
    for eps in sched.eps_list:
        fam = PenaltyFamily(eps)
        try:
            u, iters = solve_penalized(
                problem, constraint, fam, shape,
                initial_guess=u, newton=sched.newton, opr=opr,
            )
        except SolverError as exc:
            raise SolverError(f"continuation failed at eps={eps:g}: {exc}") from exc
        grads = op_mod.gradient(u).reshape(-1, problem.dim)
        h_vals = constraint.value_many(grads)
        res = _final_residual(problem, constraint, fam, u, opr)
        records.append(
            EpsRecord(
                eps=eps,
                iterations=iters,
                residual=res,
                max_beta=float(np.max(fam.beta(h_vals))),
                sup_grad=float(np.max(np.linalg.norm(grads, axis=1))),
                sup_second=_interior_sup_second(u),
            )
        )

    comp = complementarity_residuals(problem, constraint, u, opr=opr)
    from .diagnostics import free_boundary  # late import, avoids a cycle

    f_h = op_mod.interior_values(problem, shape, problem.f)
    mask = free_boundary(u, constraint, opr, f_h)
    return SolveReport(
        u=u,
        ubar=ubar,
        per_eps=records,
        free_boundary=mask,
        complementarity=comp,
        eps_clamped=clamped,
        theta=theta,
        gamma=problem.gamma,
        delta=problem.delta,
    )


def _final_residual(problem, constraint, fam, u, opr):
    lu_vals = op_mod.apply_operator(opr, u).interior_flat()
    f_h = op_mod.interior_values(problem, u.shape, problem.f)
    grads = op_mod.gradient(u).reshape(-1, problem.dim)
    pen = fam.beta(constraint.value_many(grads))
    return float(np.max(np.abs(lu_vals + pen - f_h)))


def _interior_sup_second(u, margin=5):
    """Sup of axis second differences away from the boundary layer."""
    d2 = np.abs(op_mod.second_differences(u))
    if u.dim == 1:
        m = min(margin, (u.shape[0] - 1) // 2)
        return float(np.max(d2[m : u.shape[0] - m]))
    m1 = min(margin, (u.shape[0] - 1) // 2)
    m2 = min(margin, (u.shape[1] - 1) // 2)
    return float(np.max(d2[m1 : u.shape[0] - m1, m2 : u.shape[1] - m2]))
