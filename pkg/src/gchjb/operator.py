"""Elliptic problem data and its monotone finite-difference discretization.

The operator is L u = -a . D^2 u + b . Du + c u on a box domain with
Dirichlet data g, discretized on a uniform tensor grid: central second
differences for the diffusion, first-order upwind differences for the
drift (forward where the drift coefficient is negative, so off-diagonal
entries stay non-positive) and c on the diagonal. The result is an
M-matrix for every grid spacing, which the assembly audits explicitly.

Grid functions store the boundary layer alongside interior values so the
central gradient stencil needs no one-sided variants near the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import expr

__all__ = [
    "ValidationError",
    "AssemblyError",
    "EllipticProblem",
    "GridFunction",
    "DiscreteOperator",
    "validate",
    "assemble",
    "apply_operator",
    "gradient",
    "write_grid_csv",
    "read_grid_csv",
]


class ValidationError(ValueError):
    """Problem data violates ellipticity/positivity requirements."""


class AssemblyError(ValueError):
    """Discretization would not be monotone."""


def _coerce_exprs(value, count):
    if isinstance(value, (str, expr.Expression)):
        value = [value]
    items = [expr.parse(v) if isinstance(v, str) else v for v in value]
    if len(items) == 1 and count > 1:
        items = items * count
    if len(items) != count:
        raise ValidationError(f"expected {count} expression(s), got {len(items)}")
    return items


@dataclass
class EllipticProblem:
    """Box-domain data for max{Lu - f, H(Du)} = 0 with u = g on the boundary.

    a is scalar in 1D and the diagonal pair (a11, a22) in 2D; cross
    diffusion is unsupported because it breaks the M-matrix structure.
    """

    dim: int
    box: list
    a: list
    b: list
    c: expr.Expression
    f: expr.Expression
    g: expr.Expression = None
    gamma: float = field(default=None, compare=False)
    delta: float = field(default=None, compare=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError("dimension must be 1 or 2")
        box = [tuple(map(float, ab)) for ab in self.box]
        if len(box) != self.dim or any(lo >= hi for lo, hi in box):
            raise ValidationError("box must give lo < hi per axis")
        self.box = box
        self.a = _coerce_exprs(self.a, self.dim)
        self.b = _coerce_exprs(self.b, self.dim)
        if isinstance(self.c, str):
            self.c = expr.parse(self.c)
        if isinstance(self.f, str):
            self.f = expr.parse(self.f)
        if self.g is None:
            self.g = expr.parse("0")
        elif isinstance(self.g, str):
            self.g = expr.parse(self.g)


@dataclass
class GridFunction:
    """Values on a uniform tensor grid including the boundary layer."""

    box: list
    shape: tuple  # interior points per axis
    values: np.ndarray  # full array, shape tuple(n_i + 2)

    def __post_init__(self):
        self.box = [tuple(map(float, ab)) for ab in self.box]
        self.shape = tuple(int(n) for n in self.shape)
        self.values = np.asarray(self.values, dtype=float)
        expected = tuple(n + 2 for n in self.shape)
        if self.values.shape != expected:
            raise ValidationError(
                f"values shape {self.values.shape} does not match grid {expected}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("grid function values must be finite")

    @property
    def dim(self):
        return len(self.shape)

    @property
    def h(self):
        return tuple(
            (hi - lo) / (n + 1) for (lo, hi), n in zip(self.box, self.shape)
        )

    def axes(self):
        """Coordinate arrays per axis, boundary points included.

        linspace pins both endpoints exactly, which the CSV round-trip
        relies on to reconstruct the box bit-for-bit.
        """
        return [
            np.linspace(lo, hi, n + 2) for (lo, hi), n in zip(self.box, self.shape)
        ]

    def interior_axes(self):
        return [ax[1:-1] for ax in self.axes()]

    @property
    def interior(self):
        if self.dim == 1:
            return self.values[1:-1]
        return self.values[1:-1, 1:-1]

    def interior_flat(self):
        return self.interior.reshape(-1)

    def with_interior(self, flat):
        out = self.values.copy()
        if self.dim == 1:
            out[1:-1] = flat
        else:
            out[1:-1, 1:-1] = np.asarray(flat).reshape(self.shape)
        return GridFunction(self.box, self.shape, out)

    @classmethod
    def zeros(cls, box, shape):
        full = tuple(int(n) + 2 for n in shape)
        return cls(box, shape, np.zeros(full))


def grid_mesh(box, shape):
    """Full-grid coordinate mesh as a list of broadcastable arrays."""
    gf = GridFunction.zeros(box, shape)
    axes = gf.axes()
    if len(shape) == 1:
        return [axes[0]]
    return list(np.meshgrid(*axes, indexing="ij"))


def _eval_on_mesh(expression, mesh):
    vals = expression.eval(mesh)
    return np.broadcast_to(np.asarray(vals, dtype=float), mesh[0].shape).copy()


def validate(problem, shape):
    """Evaluate coefficients on the grid and return the floors (gamma, delta).

    Rejects the problem when the diffusion floor or the zero-order floor is
    non-positive anywhere, or when the source f is negative.
    """
    shape = tuple(int(n) for n in shape)
    if len(shape) != problem.dim or any(n < 3 for n in shape):
        raise ValidationError("grid needs at least 3 interior points per axis")
    mesh = grid_mesh(problem.box, shape)
    gamma = min(float(np.min(_eval_on_mesh(ai, mesh))) for ai in problem.a)
    delta = float(np.min(_eval_on_mesh(problem.c, mesh)))
    fmin = float(np.min(_eval_on_mesh(problem.f, mesh)))
    if gamma <= 0:
        raise ValidationError(f"ellipticity violated: min a = {gamma:.6g} <= 0")
    if delta <= 0:
        raise ValidationError(f"zero-order floor violated: min c = {delta:.6g} <= 0")
    if fmin < 0:
        raise ValidationError(f"source must be non-negative: min f = {fmin:.6g}")
    problem.gamma = gamma
    problem.delta = delta
    return gamma, delta


@dataclass
class DiscreteOperator:
    """Sparse interior matrix of L plus the Dirichlet boundary contribution."""

    box: list
    shape: tuple
    matrix: sp.csr_matrix
    boundary: np.ndarray  # contribution of g-values, interior-flat

    @property
    def h(self):
        return tuple(
            (hi - lo) / (n + 1) for (lo, hi), n in zip(self.box, self.shape)
        )


def _monotonicity_audit(matrix, problem, mesh):
    coo = matrix.tocoo()
    off = coo.data[coo.row != coo.col]
    diag = matrix.diagonal()
    offender = None
    if off.size and np.max(off) > 1e-12:
        offender = "positive off-diagonal entry"
    elif np.min(diag) <= 0:
        offender = "non-positive diagonal entry"
    else:
        rowsum = np.asarray(np.abs(matrix).sum(axis=1)).ravel()
        if np.min(2 * diag - rowsum) < -1e-10:
            offender = "row not diagonally dominant"
    if offender is not None:
        hmax = []
        for ai, bi in zip(problem.a, problem.b):
            amin = float(np.min(_eval_on_mesh(ai, mesh)))
            bmax = float(np.max(np.abs(_eval_on_mesh(bi, mesh))))
            hmax.append(np.inf if bmax == 0 else 2 * amin / bmax)
        raise AssemblyError(
            f"monotonicity violated ({offender}); "
            f"max admissible h per axis: {hmax}"
        )


def assemble(problem, shape):
    """Build the discrete operator; requires validate() to have passed."""
    shape = tuple(int(n) for n in shape)
    if problem.gamma is None:
        validate(problem, shape)
    mesh = grid_mesh(problem.box, shape)
    gvals = _eval_on_mesh(problem.g, mesh)
    cvals = _eval_on_mesh(problem.c, mesh)
    h = GridFunction.zeros(problem.box, shape).h

    if problem.dim == 1:
        n = shape[0]
        a = _eval_on_mesh(problem.a[0], mesh)[1:-1]
        b = _eval_on_mesh(problem.b[0], mesh)[1:-1]
        c = cvals[1:-1]
        hx = h[0]
        lower = -a / hx**2 - np.maximum(b, 0.0) / hx
        upper = -a / hx**2 - np.maximum(-b, 0.0) / hx
        diag = 2 * a / hx**2 + np.abs(b) / hx + c
        matrix = sp.diags(
            [lower[1:], diag, upper[:-1]], offsets=[-1, 0, 1], format="csr"
        )
        boundary = np.zeros(n)
        boundary[0] = lower[0] * gvals[0]
        boundary[-1] = upper[-1] * gvals[-1]
    else:
        n1, n2 = shape
        a1 = _eval_on_mesh(problem.a[0], mesh)[1:-1, 1:-1]
        a2 = _eval_on_mesh(problem.a[1], mesh)[1:-1, 1:-1]
        b1 = _eval_on_mesh(problem.b[0], mesh)[1:-1, 1:-1]
        b2 = _eval_on_mesh(problem.b[1], mesh)[1:-1, 1:-1]
        c = cvals[1:-1, 1:-1]
        h1, h2 = h
        low1 = -a1 / h1**2 - np.maximum(b1, 0.0) / h1
        up1 = -a1 / h1**2 - np.maximum(-b1, 0.0) / h1
        low2 = -a2 / h2**2 - np.maximum(b2, 0.0) / h2
        up2 = -a2 / h2**2 - np.maximum(-b2, 0.0) / h2
        diag = (
            2 * a1 / h1**2
            + 2 * a2 / h2**2
            + np.abs(b1) / h1
            + np.abs(b2) / h2
            + c
        )
        # row-major flattening: axis-2 neighbors sit at offset 1, axis-1 at n2
        m = n1 * n2
        d0 = diag.ravel()
        dl2 = low2.ravel().copy()
        du2 = up2.ravel().copy()
        dl2[::n2] = 0.0  # first column has a boundary left-neighbor
        du2[n2 - 1 :: n2] = 0.0
        matrix = sp.diags(
            [low1.ravel()[n2:], dl2[1:], d0, du2[:-1], up1.ravel()[:-n2]],
            offsets=[-n2, -1, 0, 1, n2],
            format="csr",
        )
        boundary = np.zeros((n1, n2))
        boundary[0, :] += low1[0, :] * gvals[0, 1:-1]
        boundary[-1, :] += up1[-1, :] * gvals[-1, 1:-1]
        boundary[:, 0] += low2[:, 0] * gvals[1:-1, 0]
        boundary[:, -1] += up2[:, -1] * gvals[1:-1, -1]
        boundary = boundary.ravel()

    opr = DiscreteOperator(problem.box, shape, matrix, boundary)
    _monotonicity_audit(matrix, problem, mesh)
    return opr


def apply_operator(opr, u):
    """Discrete L u on the interior; boundary layer of the result is zero."""
    if u.shape != opr.shape or u.box != opr.box:
        raise ValidationError("grid function does not match the operator grid")
    flat = opr.matrix @ u.interior_flat() + opr.boundary
    return GridFunction.zeros(opr.box, opr.shape).with_interior(flat)


def gradient(u):
    """Central-difference gradient at interior points, shape (*shape, dim)."""
    h = u.h
    vals = u.values
    if u.dim == 1:
        g = (vals[2:] - vals[:-2]) / (2 * h[0])
        return g.reshape(-1, 1)
    g1 = (vals[2:, 1:-1] - vals[:-2, 1:-1]) / (2 * h[0])
    g2 = (vals[1:-1, 2:] - vals[1:-1, :-2]) / (2 * h[1])
    return np.stack([g1, g2], axis=-1)


def second_differences(u):
    """Axis-aligned second difference quotients at interior points."""
    h = u.h
    vals = u.values
    if u.dim == 1:
        d = (vals[2:] - 2 * vals[1:-1] + vals[:-2]) / h[0] ** 2
        return d.reshape(-1, 1)
    d1 = (vals[2:, 1:-1] - 2 * vals[1:-1, 1:-1] + vals[:-2, 1:-1]) / h[0] ** 2
    d2 = (vals[1:-1, 2:] - 2 * vals[1:-1, 1:-1] + vals[1:-1, :-2]) / h[1] ** 2
    return np.stack([d1, d2], axis=-1)


def boundary_grid(problem, shape, expression=None):
    """Grid function holding expression values on the boundary layer, zero inside."""
    expression = expression if expression is not None else problem.g
    mesh = grid_mesh(problem.box, shape)
    out = _eval_on_mesh(expression, mesh)
    if problem.dim == 1:
        out[1:-1] = 0.0
    else:
        out[1:-1, 1:-1] = 0.0
    return GridFunction(problem.box, tuple(shape), out)


def interior_values(problem, shape, expression):
    """Expression evaluated at interior grid points, flattened row-major."""
    mesh = grid_mesh(problem.box, shape)
    vals = _eval_on_mesh(expression, mesh)
    if problem.dim == 1:
        return vals[1:-1].copy()
    return vals[1:-1, 1:-1].reshape(-1)


# ---------------------------------------------------------------------------
# CSV serialization: "x1[,x2],value", all grid points, 17 significant digits


def write_grid_csv(gf, path):
    axes = gf.axes()
    with open(path, "w") as fh:
        if gf.dim == 1:
            fh.write("x1,value\n")
            for x, v in zip(axes[0], gf.values):
                fh.write(f"{x:.17g},{v:.17g}\n")
        else:
            fh.write("x1,x2,value\n")
            for i, x in enumerate(axes[0]):
                for j, y in enumerate(axes[1]):
                    fh.write(f"{x:.17g},{y:.17g},{gf.values[i, j]:.17g}\n")


def read_grid_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    dim = len(header) - 1
    data = np.array([[float(x) for x in row] for row in rows])
    if dim == 1:
        xs = data[:, 0]
        box = [(xs[0], xs[-1])]
        shape = (len(xs) - 2,)
        return GridFunction(box, shape, data[:, 1])
    x1 = np.unique(data[:, 0])
    x2 = np.unique(data[:, 1])
    box = [(x1[0], x1[-1]), (x2[0], x2[-1])]
    shape = (len(x1) - 2, len(x2) - 2)
    values = data[:, 2].reshape(len(x1), len(x2))
    return GridFunction(box, shape, values)
