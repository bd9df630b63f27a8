"""Convex gradient-constraint functions and their regularizations.

A constraint is a convex function H with H(0) < 0; the solver enforces
H(Du) <= 0. The catalog covers weighted norms, positive-definite quadratic
forms and support-function constraints derived from a convex body K, where
H(p) = max_{|v|=1} (p.v - l(v)) and l is the support function of K, so that
{H <= 0} = K.

On top of any catalog member sits a three-step smoothing ladder, applied in
this fixed order:

    MoreauEnvelope(H, t)        inf-convolution with |.|^2/(2t)
    Mollified(envelope, rho)    convolution with a compactly supported bump
    Convexified(mollified, th)  add th*|p|^2 to gain uniform convexity

Composing in a different order changes the curvature constants the
diagnostics check, so the constructors enforce the order.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "ConvexError",
    "ConvexBody",
    "Ball",
    "Interval",
    "Polytope",
    "support_value",
    "ConstraintFunction",
    "NormMinusConstant",
    "QuadraticForm",
    "SupportDerived",
    "MoreauEnvelope",
    "Mollified",
    "Convexified",
    "AffineStub",
    "build_regularized",
    "check_envelope_properties",
    "constraint_from_config",
    "body_from_config",
]


class ConvexError(ValueError):
    """Invalid constraint data or failed inner solve."""


# ---------------------------------------------------------------------------
# convex bodies and support functions


class ConvexBody:
    """Closed convex set with 0 in its interior."""

    dim: int

    def support(self, v):
        raise NotImplementedError

    def contains(self, p, slack=0.0):
        raise NotImplementedError


class Ball(ConvexBody):
    """Centered ball of radius delta, dimension 1 or 2."""

    def __init__(self, radius, dim=1):
        if radius <= 0:
            raise ConvexError("ball radius must be positive")
        if dim not in (1, 2):
            raise ConvexError("dimension must be 1 or 2")
        self.radius = float(radius)
        self.dim = dim

    def support(self, v):
        return self.radius

    def contains(self, p, slack=0.0):
        return float(np.linalg.norm(p)) <= self.radius + slack


class Interval(ConvexBody):
    """1D interval [lo, hi] with lo < 0 < hi."""

    def __init__(self, lo, hi):
        if not lo < 0 < hi:
            raise ConvexError("interval must satisfy lo < 0 < hi")
        self.lo = float(lo)
        self.hi = float(hi)
        self.dim = 1

    def support(self, v):
        return self.hi if float(np.asarray(v).ravel()[0]) > 0 else -self.lo

    def contains(self, p, slack=0.0):
        x = float(np.asarray(p).ravel()[0])
        return self.lo - slack <= x <= self.hi + slack


class Polytope(ConvexBody):
    """2D convex polygon given by vertices; 0 must be strictly interior."""

    def __init__(self, vertices):
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
            raise ConvexError("polytope needs at least 3 planar vertices")
        hull = _convex_hull_ccw(verts)
        if len(hull) < 3:
            raise ConvexError("polytope vertices are degenerate (collinear)")
        self.vertices = hull
        edges = np.roll(hull, -1, axis=0) - hull
        normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1)
        lengths = np.linalg.norm(normals, axis=1)
        self.normals = normals / lengths[:, None]
        self.offsets = np.einsum("ed,ed->e", self.normals, hull)
        if np.min(self.offsets) <= 0:
            raise ConvexError("0 must be an interior point of the polytope")
        self.dim = 2

    def support(self, v):
        v = np.asarray(v, dtype=float).ravel()
        return float(np.max(self.vertices @ v))

    def contains(self, p, slack=0.0):
        p = np.asarray(p, dtype=float).ravel()
        return bool(np.all(self.normals @ p <= self.offsets + slack))


def _convex_hull_ccw(points):
    """Andrew monotone chain; returns hull vertices in ccw order."""
    pts = np.unique(points, axis=0)
    if len(pts) < 3:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for q in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], q) <= 0:
            lower.pop()
        lower.append(q)
    upper = []
    for q in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], q) <= 0:
            upper.pop()
        upper.append(q)
    return np.array(lower[:-1] + upper[:-1])


def support_value(body, v):
    """Support function of the body at a unit direction v."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size != body.dim:
        raise ConvexError(f"direction has length {v.size}, body dim {body.dim}")
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise ConvexError("support_value expects a unit direction")
    return float(body.support(v))


# ---------------------------------------------------------------------------
# constraint functions


def _as_points(p, dim):
    """Coerce scalar / vector / batch input into an (m, dim) float array."""
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size == dim else arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ConvexError(f"gradient points must have dimension {dim}")
    return arr


class ConstraintFunction:
    """Convex H with value, subgradient and curvature-bound queries.

    Batched entry points take an (m, dim) array; the scalar ones accept a
    single point. Instances are immutable after construction and safe to
    evaluate concurrently.
    """

    dim: int

    def value(self, p):
        return float(self.value_many(_as_points(p, self.dim))[0])

    def subgradient(self, p):
        return self.subgradient_many(_as_points(p, self.dim))[0].copy()

    def value_many(self, pts):
        raise NotImplementedError

    def subgradient_many(self, pts):
        raise NotImplementedError

    def curvature_lower(self):
        """Largest theta with D2H >= theta (0 for merely convex H)."""
        return 0.0

    def curvature_upper(self):
        """Upper bound on D2H where it exists; may be inf."""
        return math.inf


class NormMinusConstant(ConstraintFunction):
    """H(p) = w|p| - r with w, r > 0."""

    def __init__(self, weight=1.0, radius=1.0, dim=1):
        if weight <= 0 or radius <= 0:
            raise ConvexError("norm constraint needs weight > 0 and radius > 0")
        if dim not in (1, 2):
            raise ConvexError("dimension must be 1 or 2")
        self.weight = float(weight)
        self.radius = float(radius)
        self.dim = dim

    def value_many(self, pts):
        return self.weight * np.linalg.norm(pts, axis=1) - self.radius

    def subgradient_many(self, pts):
        norms = np.linalg.norm(pts, axis=1)
        out = np.zeros_like(pts)
        mask = norms > 0
        out[mask] = self.weight * pts[mask] / norms[mask, None]
        # at p = 0 the zero vector lies in the subdifferential
        return out

    def prox_many(self, pts, t):
        norms = np.linalg.norm(pts, axis=1)
        scale = np.zeros_like(norms)
        mask = norms > 0
        scale[mask] = np.maximum(0.0, 1.0 - t * self.weight / norms[mask])
        return pts * scale[:, None]


class QuadraticForm(ConstraintFunction):
    """H(p) = p.Mp - r2 with M symmetric positive definite."""

    def __init__(self, matrix, level):
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        if m.shape[0] != m.shape[1] or m.shape[0] not in (1, 2):
            raise ConvexError("matrix must be 1x1 or 2x2")
        if not np.allclose(m, m.T, atol=1e-12):
            raise ConvexError("matrix must be symmetric")
        eigs = np.linalg.eigvalsh(m)
        if np.min(eigs) <= 0:
            raise ConvexError("matrix must be positive definite")
        if level <= 0:
            raise ConvexError("level r2 must be positive")
        self.matrix = m
        self.level = float(level)
        self.dim = m.shape[0]
        self._eig_min = float(np.min(eigs))
        self._eig_max = float(np.max(eigs))

    def value_many(self, pts):
        return np.einsum("md,de,me->m", pts, self.matrix, pts) - self.level

    def subgradient_many(self, pts):
        return 2.0 * pts @ self.matrix

    def prox_many(self, pts, t):
        a = np.eye(self.dim) + 2.0 * t * self.matrix
        return np.linalg.solve(a, pts.T).T

    def curvature_lower(self):
        return 2.0 * self._eig_min

    def curvature_upper(self):
        return 2.0 * self._eig_max


class SupportDerived(ConstraintFunction):
    """H(p) = max over unit v of (p.v - l(v)) for the support function l of K.

    The zero sublevel set of H is exactly K. For an interval or polytope the
    maximum over the unit sphere is attained among finitely many candidate
    directions (edge normals and directions from vertices to p), so the
    evaluation is exact; a centered ball has the closed form |p| - delta.
    """

    def __init__(self, body):
        if not isinstance(body, ConvexBody):
            raise ConvexError("SupportDerived needs a ConvexBody")
        self.body = body
        self.dim = body.dim

    def value_many(self, pts):
        body = self.body
        if isinstance(body, Ball):
            return np.linalg.norm(pts, axis=1) - body.radius
        if isinstance(body, Interval):
            x = pts[:, 0]
            return np.maximum(x - body.hi, body.lo - x)
        return self._polytope_values(pts)

    def _polytope_values(self, pts):
        body = self.body
        vals = pts @ body.normals.T - body.offsets  # (m, E)
        best = np.max(vals, axis=1)
        diff = pts[:, None, :] - body.vertices[None, :, :]  # (m, V, 2)
        norms = np.linalg.norm(diff, axis=2)
        mask = norms > 0
        unit = np.zeros_like(diff)
        unit[mask] = diff[mask] / norms[mask][:, None]
        ell = np.max(np.einsum("mvd,kd->mvk", unit, body.vertices), axis=2)
        vvals = np.einsum("mvd,md->mv", unit, pts) - ell
        vvals[~mask] = -np.inf
        return np.maximum(best, np.max(vvals, axis=1))

    def subgradient_many(self, pts):
        body = self.body
        if isinstance(body, Ball):
            norms = np.linalg.norm(pts, axis=1)
            out = np.zeros_like(pts)
            mask = norms > 0
            out[mask] = pts[mask] / norms[mask, None]
            return out
        out = np.empty_like(pts)
        for i, p in enumerate(pts):
            out[i] = self._subgradient_one(p)
        return out

    def _subgradient_one(self, p):
        body = self.body
        if isinstance(body, Interval):
            lo, hi = body.lo, body.hi
            x = p[0]
            up, down = x - hi, lo - x
            if abs(up - down) <= 1e-12 * max(1.0, abs(up)):
                return np.zeros(1)  # tie: 0 lies in conv{+1, -1}
            return np.array([1.0]) if up > down else np.array([-1.0])
        cands, vals = self._polytope_candidates(p)
        top = np.max(vals)
        tied = cands[vals >= top - 1e-12 * max(1.0, abs(top))]
        return _min_norm_in_hull(tied)

    def _polytope_candidates(self, p):
        body = self.body
        cands = [body.normals]
        diff = p[None, :] - body.vertices
        norms = np.linalg.norm(diff, axis=1)
        mask = norms > 0
        if np.any(mask):
            cands.append(diff[mask] / norms[mask, None])
        cands = np.vstack(cands)
        ell = np.max(cands @ body.vertices.T, axis=1)
        return cands, cands @ p - ell


def _min_norm_in_hull(points):
    """Minimal-norm element of the convex hull of a small point set."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) == 1:
        return pts[0].copy()
    if pts.shape[1] == 1:
        lo, hi = np.min(pts), np.max(pts)
        if lo <= 0.0 <= hi:
            return np.zeros(1)
        return np.array([lo if abs(lo) < abs(hi) else hi])
    # 2D, Caratheodory: 0 inside some triangle, else best point on a segment
    m = len(pts)
    for i in range(m):
        for j in range(i + 1, m):
            for k in range(j + 1, m):
                if _triangle_contains_origin(pts[i], pts[j], pts[k]):
                    return np.zeros(2)
    best = pts[0]
    best_norm = np.linalg.norm(best)
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            q = _segment_point_nearest_origin(pts[i], pts[j])
            nq = np.linalg.norm(q)
            if nq < best_norm:
                best, best_norm = q, nq
    return best.copy()


def _triangle_contains_origin(a, b, c):
    def cross(u, v):
        return u[0] * v[1] - u[1] * v[0]

    d1 = cross(b - a, -a)
    d2 = cross(c - b, -b)
    d3 = cross(a - c, -c)
    has_neg = (d1 < 0) or (d2 < 0) or (d3 < 0)
    has_pos = (d1 > 0) or (d2 > 0) or (d3 > 0)
    return not (has_neg and has_pos)


def _segment_point_nearest_origin(a, b):
    d = b - a
    denom = float(d @ d)
    if denom == 0.0:
        return a
    s = min(1.0, max(0.0, float(-(a @ d)) / denom))
    return a + s * d


# ---------------------------------------------------------------------------
# Moreau envelope


class MoreauEnvelope(ConstraintFunction):
    """Inf-convolution H^t(p) = inf_q { H(q) + |p-q|^2 / (2t) }.

    The inner minimization is strongly convex with curvature at least 1/t.
    Catalog bases admit an exact proximal map; other bases fall back to a
    safeguarded Newton iteration on the optimality condition (capped at 200
    iterations, absolute value tolerance well below 1e-10).
    """

    _MAX_INNER_ITER = 200

    def __init__(self, base, t):
        if not isinstance(base, ConstraintFunction):
            raise ConvexError("envelope base must be a ConstraintFunction")
        if t <= 0:
            raise ConvexError("envelope parameter t must be positive")
        self.base = base
        self.t = float(t)
        self.dim = base.dim

    def prox_many(self, pts):
        base, t = self.base, self.t
        if isinstance(base, (NormMinusConstant, QuadraticForm)):
            return base.prox_many(pts, t)
        if isinstance(base, AffineStub):
            return pts - t * base.direction[None, :]
        if isinstance(base, SupportDerived):
            body = base.body
            if isinstance(body, Ball):
                return NormMinusConstant(1.0, body.radius, self.dim).prox_many(pts, t)
            if isinstance(body, Interval):
                mid = 0.5 * (body.lo + body.hi)
                shifted = pts - mid
                norms = np.abs(shifted[:, 0])
                scale = np.zeros_like(norms)
                mask = norms > 0
                scale[mask] = np.maximum(0.0, 1.0 - t / norms[mask])
                return mid + shifted * scale[:, None]
        out = np.empty_like(pts)
        for i, p in enumerate(pts):
            out[i] = self._prox_generic(p)
        return out

    def prox(self, p):
        return self.prox_many(_as_points(p, self.dim))[0]

    def value_many(self, pts):
        q = self.prox_many(pts)
        return self.base.value_many(q) + np.sum((pts - q) ** 2, axis=1) / (2 * self.t)

    def subgradient_many(self, pts):
        return (pts - self.prox_many(pts)) / self.t

    def curvature_lower(self):
        th = self.base.curvature_lower()
        return th / (1.0 + self.t * th)

    def curvature_upper(self):
        bu = self.base.curvature_upper()
        if math.isinf(bu):
            return 1.0 / self.t
        return bu / (1.0 + self.t * bu)

    # generic inner solve ---------------------------------------------------

    def _grad_inner(self, q, p):
        return self.base.subgradient_many(q[None, :])[0] + (q - p) / self.t

    def _prox_generic(self, p):
        if self.dim == 1:
            return np.array([self._prox_generic_1d(float(p[0]))])
        return self._prox_generic_2d(p)

    def _prox_generic_1d(self, p):
        base = self.base
        tt = self.t

        def gp(q):
            return float(base.subgradient_many(np.array([[q]]))[0, 0]) + (q - p) / tt

        g0 = gp(p)
        if g0 == 0.0:
            return p
        # strong monotonicity with slope >= 1/t brackets the root
        w = tt * (1.0 + abs(g0))
        lo, hi = p - w, p + w
        q = p
        for _ in range(30):
            g = gp(q)
            if abs(g) <= 1e-11:
                return q
            if g > 0:
                hi = q
            else:
                lo = q
            d = 1e-7 * max(1.0, abs(q))
            slope = (gp(q + d) - gp(q - d)) / (2 * d)
            slope = max(slope, 0.5 / tt)
            qn = q - g / slope
            if not lo < qn < hi:
                qn = 0.5 * (lo + hi)
            if qn == q:
                break
            q = qn
        return brentq(gp, lo, hi, xtol=1e-14, maxiter=self._MAX_INNER_ITER)

    def _prox_generic_2d(self, p):
        tt = self.t
        q = p.copy()
        for _ in range(40):
            g = self._grad_inner(q, p)
            if np.linalg.norm(g) <= 1e-11:
                return q
            step = self._newton_step(q, p, g)
            if step is None:
                break
            q = step
        return self._prox_nested_1d(p)

    def _newton_step(self, q, p, g):
        d = 1e-6 * max(1.0, float(np.linalg.norm(q)))
        jac = np.empty((2, 2))
        for k in range(2):
            e = np.zeros(2)
            e[k] = d
            jac[:, k] = (self._grad_inner(q + e, p) - self._grad_inner(q - e, p)) / (2 * d)
        sym = 0.5 * (jac + jac.T)
        vals, vecs = np.linalg.eigh(sym)
        vals = np.maximum(vals, 0.5 / self.t)
        step = -vecs @ ((vecs.T @ g) / vals)
        gval = self._objective(q, p)
        slope = float(g @ step)  # negative for a descent direction
        s = 1.0
        for _ in range(30):
            qn = q + s * step
            if self._objective(qn, p) <= gval + 1e-4 * s * slope:
                return qn
            s *= 0.5
        return None

    def _objective(self, q, p):
        return float(self.base.value_many(q[None, :])[0]) + float(
            np.sum((q - p) ** 2)
        ) / (2 * self.t)

    def _prox_nested_1d(self, p):
        # exact fallback: both partial optimality conditions are strictly
        # monotone, so nested bracketing root finds recover the minimizer
        tt = self.t

        def gy(x, y):
            g = self.base.subgradient_many(np.array([[x, y]]))[0]
            return float(g[1]) + (y - p[1]) / tt

        def ystar(x):
            g0 = gy(x, p[1])
            w = tt * (1.0 + abs(g0))
            lo, hi = p[1] - w, p[1] + w
            if gy(x, lo) > 0 or gy(x, hi) < 0:  # defensive widening
                lo, hi = p[1] - 8 * w, p[1] + 8 * w
            return brentq(lambda y: gy(x, y), lo, hi, xtol=1e-14,
                          maxiter=self._MAX_INNER_ITER)

    # Danskin: the partial x-derivative at (x, y*(x)) is monotone in x
        def gx(x):
            y = ystar(x)
            g = self.base.subgradient_many(np.array([[x, y]]))[0]
            return float(g[0]) + (x - p[0]) / tt

        g0 = gx(p[0])
        if g0 == 0.0:
            x = p[0]
        else:
            w = tt * (1.0 + abs(g0))
            lo, hi = p[0] - w, p[0] + w
            for _ in range(60):
                if gx(lo) <= 0:
                    break
                lo -= w
                w *= 2
            else:
                raise ConvexError("prox inner solve failed to bracket")
            w = tt * (1.0 + abs(g0))
            for _ in range(60):
                if gx(hi) >= 0:
                    break
                hi += w
                w *= 2
            else:
                raise ConvexError("prox inner solve failed to bracket")
            x = brentq(gx, lo, hi, xtol=1e-13, maxiter=self._MAX_INNER_ITER)
        return np.array([x, ystar(x)])


# ---------------------------------------------------------------------------
# mollification


@lru_cache(maxsize=None)
def _bump_rule(dim):
    """Tensor Gauss-Legendre nodes on the unit ball bump, weights sum to 1.

    Normalizing against the same rule keeps mollification of affine
    functions exact and makes the convolution itself accurate to ~1e-9.
    """
    nodes1, w1 = np.polynomial.legendre.leggauss(16)
    if dim == 1:
        nodes = nodes1.reshape(-1, 1)
        w = w1 * np.exp(-1.0 / (1.0 - nodes1**2))
    else:
        xx, yy = np.meshgrid(nodes1, nodes1, indexing="ij")
        nodes = np.stack([xx.ravel(), yy.ravel()], axis=1)
        r2 = np.sum(nodes**2, axis=1)
        w = np.where(r2 < 1.0, np.exp(-1.0 / np.maximum(1.0 - r2, 1e-300)), 0.0)
        w = w * np.outer(w1, w1).ravel()
    return nodes, w / np.sum(w)


class Mollified(ConstraintFunction):
    """Convolution of a Moreau envelope with the standard bump at scale rho."""

    _CACHE_LIMIT = 1 << 16

    def __init__(self, base, rho):
        if not isinstance(base, (MoreauEnvelope, AffineStub)):
            raise ConvexError(
                "mollification applies to a Moreau envelope (smooth first, "
                "then mollify)"
            )
        if rho <= 0:
            raise ConvexError("mollification radius rho must be positive")
        self.base = base
        self.rho = float(rho)
        self.dim = base.dim
        self._nodes, self._weights = _bump_rule(self.dim)
        self._cache = {}

    def value(self, p):
        pts = _as_points(p, self.dim)
        key = tuple(pts[0])
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        out = float(self.value_many(pts)[0])
        if len(self._cache) >= self._CACHE_LIMIT:
            self._cache.clear()
        self._cache[key] = out
        return out

    def value_many(self, pts):
        shifted = pts[:, None, :] - self.rho * self._nodes[None, :, :]
        flat = shifted.reshape(-1, self.dim)
        vals = self.base.value_many(flat).reshape(len(pts), -1)
        return vals @ self._weights

    def subgradient_many(self, pts):
        shifted = pts[:, None, :] - self.rho * self._nodes[None, :, :]
        flat = shifted.reshape(-1, self.dim)
        grads = self.base.subgradient_many(flat).reshape(len(pts), -1, self.dim)
        return np.einsum("mkd,k->md", grads, self._weights)

    def curvature_lower(self):
        return self.base.curvature_lower()

    def curvature_upper(self):
        return self.base.curvature_upper()


class Convexified(ConstraintFunction):
    """theta*|p|^2 added on top of a mollified envelope."""

    def __init__(self, base, theta):
        if not isinstance(base, (Mollified, AffineStub)):
            raise ConvexError("convexification applies after mollification")
        if not 0 < theta < 1:
            raise ConvexError("theta must lie in (0, 1)")
        self.base = base
        self.theta = float(theta)
        self.dim = base.dim
        if self.value(np.zeros(self.dim)) >= 0:
            raise ConvexError(
                "regularization destroyed negativity at the origin; "
                "decrease rho or t"
            )

    def value_many(self, pts):
        return self.theta * np.sum(pts**2, axis=1) + self.base.value_many(pts)

    def subgradient_many(self, pts):
        return 2.0 * self.theta * pts + self.base.subgradient_many(pts)

    def curvature_lower(self):
        return 2.0 * self.theta + self.base.curvature_lower()

    def curvature_upper(self):
        return 2.0 * self.theta + self.base.curvature_upper()


class AffineStub(ConstraintFunction):
    """Affine test stub q -> q.d + e; stands in for smoothed constraints."""

    def __init__(self, direction, offset, dim=None):
        d = np.asarray(direction, dtype=float).ravel()
        self.direction = d
        self.offset = float(offset)
        self.dim = dim if dim is not None else max(1, d.size)
        if d.size != self.dim:
            self.direction = np.resize(d, self.dim)

    def value_many(self, pts):
        return pts @ self.direction + self.offset

    def subgradient_many(self, pts):
        return np.broadcast_to(self.direction, pts.shape).copy()

    def curvature_upper(self):
        return 0.0


def build_regularized(h0, t, rho, theta):
    """Full smoothing ladder: envelope, then mollify, then convexify.

    Validates H(0) < 0 for the input and again after smoothing (rho must be
    small enough that the origin value stays negative).
    """
    for name, val in (("t", t), ("rho", rho), ("theta", theta)):
        if not 0 < val < 1:
            raise ConvexError(f"regularization parameter {name} must be in (0, 1)")
    if h0.value(np.zeros(h0.dim)) >= 0:
        raise ConvexError("constraint must be negative at the origin")
    return Convexified(Mollified(MoreauEnvelope(h0, t), rho), theta)


# ---------------------------------------------------------------------------
# envelope property report


def _grid_ball(radius, dim, n=25):
    if dim == 1:
        return np.linspace(-radius, radius, max(3, n)).reshape(-1, 1)
    ax = np.linspace(-radius, radius, n)
    xx, yy = np.meshgrid(ax, ax, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    return pts[np.linalg.norm(pts, axis=1) <= radius + 1e-12]


def check_envelope_properties(h0, t, samples):
    """Second-difference checks for the envelope of h0 at parameter t.

    samples is a list of (p, z) pairs. For each pair the report records the
    violation of the 1/t upper bound, of the curvature lower bound when h0
    is uniformly convex, and of the localized bound built from the gradient
    range on the ball of radius |p|. Positive violations mean failure; the
    function only reports, it never raises.
    """
    env = MoreauEnvelope(h0, t)
    dim = h0.dim
    theta = h0.curvature_lower()
    cu = h0.curvature_upper()
    upper_viol = []
    lower_viol = []
    local_viol = []
    for p, z in samples:
        p = np.asarray(p, dtype=float).reshape(dim)
        z = np.asarray(z, dtype=float).reshape(dim)
        trip = np.stack([p + z, p, p - z])
        vals = env.value_many(trip)
        d2 = vals[0] - 2 * vals[1] + vals[2]
        z2 = float(z @ z)
        upper_viol.append(d2 - z2 / t)
        if theta > 0:
            lower_viol.append(theta * z2 / (1 + t * theta) - d2)
        if math.isfinite(cu):
            r = float(np.linalg.norm(p))
            grid = _grid_ball(max(r, 1e-9), dim)
            max_dh = float(
                np.max(np.linalg.norm(h0.subgradient_many(grid), axis=1))
            )
            q_loc = 2.0 * (r + t * max_dh)
            zn = float(np.linalg.norm(z))
            bound = _max_directional_curvature(h0, q_loc + zn, z, dim)
            local_viol.append(d2 - bound * z2)
    report = {
        "t": t,
        "count": len(samples),
        "theta": theta,
        "origin_value": env.value(np.zeros(dim)),
        "origin_negative": env.value(np.zeros(dim)) < 0,
        "upper_max_violation": max(upper_viol) if upper_viol else 0.0,
        "lower_max_violation": max(lower_viol) if lower_viol else None,
        "locality_max_violation": max(local_viol) if local_viol else None,
    }
    return report


def _max_directional_curvature(h, radius, z, dim, delta=1e-4):
    zn = float(np.linalg.norm(z))
    if zn == 0:
        u = np.zeros(dim)
        u[0] = 1.0
    else:
        u = np.asarray(z, dtype=float).reshape(dim) / zn
    grid = _grid_ball(radius, dim, n=21)
    vp = h.value_many(grid + delta * u)
    vm = h.value_many(grid - delta * u)
    v0 = h.value_many(grid)
    return float(np.max((vp - 2 * v0 + vm) / delta**2))


# ---------------------------------------------------------------------------
# config wiring


def body_from_config(cfg):
    kind = cfg.get("kind")
    if kind == "ball":
        return Ball(cfg["delta"], dim=int(cfg.get("dim", 1)))
    if kind == "interval":
        return Interval(cfg["lo"], cfg["hi"])
    if kind == "polytope":
        return Polytope(cfg["vertices"])
    raise ConvexError(f"unknown convex body kind {kind!r}")


def constraint_from_config(cfg, dim=None):
    kind = cfg.get("kind")
    if kind == "norm":
        d = int(cfg.get("dim", dim or 1))
        return NormMinusConstant(cfg.get("w", 1.0), cfg["r"], dim=d)
    if kind == "quadratic":
        return QuadraticForm(cfg["M"], cfg["r2"])
    if kind == "support":
        return SupportDerived(body_from_config(cfg["body"]))
    if kind == "regularized":
        base = constraint_from_config(cfg["base"], dim=dim)
        return build_regularized(base, cfg["t"], cfg["rho"], cfg["theta"])
    raise ConvexError(f"unknown constraint kind {kind!r}")
