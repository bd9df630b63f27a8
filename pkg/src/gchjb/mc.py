"""Monte Carlo estimate of the singular-control value function in 1D.

The policy is induced by a solved free boundary: inside the policy region
the state diffuses with dX = -b dt + sigma dW, discounted at rate c and
paying running cost f. When an Euler step lands beyond a region endpoint
but still inside the domain, singular control acts: in the constrained
band the marginal control cost l(rho) exactly offsets the marginal value
drop, so the optimal action pushes the state straight through the band to
the domain boundary, paying the support cost of the push direction per
unit displacement, and the path ends there. (Pushing the state back
inward instead both pays the control and raises the remaining value, so
it is strictly wasteful.) Raising the state costs l(-1), lowering it
costs l(+1), matching dX = -rho dxi with |rho| = 1.

Any concrete policy upper-bounds the value function, so estimates sit
above the PDE solution up to the O(sqrt(dt)) overshoot bias of discrete
monitoring.

Simulation is vectorized over paths with a single Philox stream, stepping
all live paths synchronously; results are deterministic for fixed
(seed, n_paths, dt).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import diagnostics
from .convex import support_value

__all__ = [
    "McError",
    "McEstimate",
    "sigma_from_a",
    "support_cost",
    "estimate_value",
    "simulate_path_trace",
    "policy_region_from_mask",
]


class McError(ValueError):
    """Invalid simulation inputs."""


@dataclass(frozen=True)
class McEstimate:
    x0: float
    n_paths: int
    mean: float
    std_error: float
    dt: float
    seed: int

    def to_dict(self):
        return {
            "x0": self.x0,
            "mean": self.mean,
            "std_error": self.std_error,
            "n_paths": self.n_paths,
            "dt": self.dt,
            "seed": self.seed,
        }


def sigma_from_a(problem):
    """Volatility sigma(x) = sqrt(2 a(x)) for a 1D problem."""
    if problem.dim != 1:
        raise McError("Monte Carlo cross-check is 1D only")
    a_expr = problem.a[0]

    def sigma(x):
        return np.sqrt(2.0 * a_expr.eval((x,)))

    return sigma


def support_cost(body, direction):
    """Control cost per unit displacement: l(+1) or l(-1)."""
    if body.dim != 1:
        raise McError("support_cost expects a 1D convex body")
    if direction not in (-1, 1, -1.0, 1.0):
        raise McError("direction must be +1 or -1")
    return support_value(body, np.array([float(direction)]))


def _default_t_max(problem, f_max, delta, ell_max, sigma_max, tail_tol=1e-6):
    rate = f_max + ell_max * sigma_max + 1.0
    return math.log(rate / (tail_tol * delta) + 1.0) / delta


def _coefficient_functions(problem):
    b_expr, c_expr, f_expr = problem.b[0], problem.c, problem.f
    sigma = sigma_from_a(problem)
    return (
        lambda x: np.broadcast_to(np.asarray(b_expr.eval((x,)), dtype=float), x.shape),
        lambda x: np.broadcast_to(np.asarray(c_expr.eval((x,)), dtype=float), x.shape),
        lambda x: np.broadcast_to(np.asarray(f_expr.eval((x,)), dtype=float), x.shape),
        lambda x: np.broadcast_to(np.asarray(sigma(x), dtype=float), x.shape),
    )


def _validate_region(problem, region, x0, dt):
    (o_lo, o_hi) = problem.box[0]
    r_lo, r_hi = float(region[0]), float(region[1])
    if not (o_lo <= r_lo < r_hi <= o_hi):
        raise McError("policy region must be a subinterval of the domain")
    if not (r_lo <= x0 <= r_hi):
        raise McError(f"x0 = {x0} lies outside the policy region [{r_lo}, {r_hi}]")
    probe = np.linspace(r_lo, r_hi, 201)
    sig_max = float(np.max(sigma_from_a(problem)(probe)))
    if r_hi - r_lo < 2.0 * sig_max * math.sqrt(dt):
        warnings.warn(
            "time step too coarse for the region width; reflection bias "
            "will dominate",
            stacklevel=3,
        )
    return o_lo, o_hi, r_lo, r_hi, sig_max


def estimate_value(
    problem, region, body, x0, n_paths, dt, seed, t_max=None, tail_tol=1e-6
):
    """Discounted-cost estimate at x0 under the reflection policy."""
    if n_paths < 100:
        raise McError("need at least 100 paths for a meaningful standard error")
    if dt <= 0:
        raise McError("dt must be positive")
    x0 = float(x0)
    o_lo, o_hi, r_lo, r_hi, sig_max = _validate_region(problem, region, x0, dt)
    b_fn, c_fn, f_fn, s_fn = _coefficient_functions(problem)
    # dX = -rho dxi: raising the state uses rho = -1, lowering uses rho = +1
    ell_raise = support_cost(body, -1)
    ell_lower = support_cost(body, +1)

    probe = np.linspace(o_lo, o_hi, 401)
    delta = float(np.min(c_fn(probe)))
    if delta <= 0:
        raise McError("discount rate c must be positive on the domain")
    if t_max is None:
        f_max = float(np.max(f_fn(probe)))
        t_max = _default_t_max(
            problem, f_max, delta, max(ell_raise, ell_lower), sig_max, tail_tol
        )

    rng = np.random.default_rng(np.random.Philox(int(seed)))
    sqrt_dt = math.sqrt(dt)
    x = np.full(n_paths, x0)
    disc = np.ones(n_paths)
    cost = np.zeros(n_paths)
    final = np.zeros(n_paths)
    idx = np.arange(n_paths)

    steps = int(math.ceil(t_max / dt))
    for _ in range(steps):
        if idx.size == 0:
            break
        cost += disc * f_fn(x) * dt  # left-endpoint rule
        xn = x - b_fn(x) * dt + s_fn(x) * sqrt_dt * rng.standard_normal(idx.size)
        disc = disc * np.exp(-c_fn(x) * dt)
        exited = (xn <= o_lo) | (xn >= o_hi)  # free exit, no terminal charge
        push_up = ~exited & (xn > r_hi)  # controlled exit through upper band
        if np.any(push_up):
            cost[push_up] += disc[push_up] * ell_raise * (o_hi - xn[push_up])
        push_dn = ~exited & (xn < r_lo)  # controlled exit through lower band
        if np.any(push_dn):
            cost[push_dn] += disc[push_dn] * ell_lower * (xn[push_dn] - o_lo)
        dead = exited | push_up | push_dn
        if np.any(dead):
            final[idx[dead]] = cost[dead]
            live = ~dead
            x, disc, cost, idx = xn[live], disc[live], cost[live], idx[live]
        else:
            x = xn
    if idx.size:
        final[idx] = cost  # truncated tail, bounded by tail_tol

    mean = float(np.mean(final))
    std_error = float(np.std(final, ddof=1) / math.sqrt(n_paths))
    return McEstimate(x0, int(n_paths), mean, std_error, float(dt), int(seed))


def simulate_path_trace(problem, region, body, x0, n_steps, dt, seed):
    """Single-path trace for invariant checks.

    Returns arrays t, x, xi (cumulative control), rho (control direction at
    each step, 0 when no control acted), discount and running cost.
    """
    x0 = float(x0)
    o_lo, o_hi, r_lo, r_hi, _ = _validate_region(problem, region, x0, dt)
    b_fn, c_fn, f_fn, s_fn = _coefficient_functions(problem)
    ell_raise = support_cost(body, -1)
    ell_lower = support_cost(body, +1)
    rng = np.random.default_rng(np.random.Philox(int(seed)))
    sqrt_dt = math.sqrt(dt)

    ts = [0.0]
    xs = [x0]
    xis = [0.0]
    rhos = [0.0]
    discs = [1.0]
    costs = [0.0]
    x, disc, cost, xi = x0, 1.0, 0.0, 0.0
    for k in range(n_steps):
        arr = np.array([x])
        cost += disc * float(f_fn(arr)[0]) * dt
        xn = (
            x
            - float(b_fn(arr)[0]) * dt
            + float(s_fn(arr)[0]) * sqrt_dt * rng.standard_normal()
        )
        disc *= math.exp(-float(c_fn(arr)[0]) * dt)
        rho = 0.0
        done = xn <= o_lo or xn >= o_hi
        if not done and xn > r_hi:
            rho = -1.0  # push up through the band to the exit
            dxi = o_hi - xn
            cost += disc * ell_raise * dxi
            xi += dxi
            xn, done = o_hi, True
        elif not done and xn < r_lo:
            rho = 1.0  # push down through the band to the exit
            dxi = xn - o_lo
            cost += disc * ell_lower * dxi
            xi += dxi
            xn, done = o_lo, True
        x = xn
        ts.append((k + 1) * dt)
        xs.append(x)
        xis.append(xi)
        rhos.append(rho)
        discs.append(disc)
        costs.append(cost)
        if done:
            break
    return {
        "t": np.array(ts),
        "x": np.array(xs),
        "xi": np.array(xis),
        "rho": np.array(rhos),
        "discount": np.array(discs),
        "cost": np.array(costs),
    }


def policy_region_from_mask(u, mask, x0):
    """Closure of the diffusion region containing x0, from a solved mask.

    Cells flagged constraint_active bound the region; runs touching the
    domain boundary extend to it, interior run ends extend half a cell
    toward the neighboring constrained cell.
    """
    if u.dim != 1:
        raise McError("policy region extraction is 1D only")
    flags = np.asarray(mask.flags).reshape(-1)
    diffusive = flags != diagnostics.CONSTRAINT_ACTIVE
    coords = u.interior_axes()[0]
    h = u.h[0]
    (o_lo, o_hi) = u.box[0]
    if not np.any(diffusive):
        raise McError("no diffusion region found in the free-boundary mask")
    i0 = int(np.argmin(np.abs(coords - x0)))
    if not diffusive[i0]:
        raise McError(f"x0 = {x0} lies in the gradient-constrained region")
    lo_i = i0
    while lo_i > 0 and diffusive[lo_i - 1]:
        lo_i -= 1
    hi_i = i0
    while hi_i < len(coords) - 1 and diffusive[hi_i + 1]:
        hi_i += 1
    lo = o_lo if lo_i == 0 else coords[lo_i] - 0.5 * h
    hi = o_hi if hi_i == len(coords) - 1 else coords[hi_i] + 0.5 * h
    return float(lo), float(hi)
