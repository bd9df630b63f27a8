import numpy as np
import pytest
import scipy.sparse.linalg as spla

from gchjb.operator import (
    EllipticProblem,
    GridFunction,
    ValidationError,
    apply_operator,
    assemble,
    gradient,
    read_grid_csv,
    second_differences,
    validate,
    write_grid_csv,
)


def make_problem(dim=1, **kw):
    base = dict(dim=1, box=[(-1, 1)], a="1", b="0", c="1", f="1")
    if dim == 2:
        base = dict(
            dim=2, box=[(-1, 1), (-1, 1)], a=["1", "1"], b=["0", "0"], c="1", f="1"
        )
    base.update(kw)
    return EllipticProblem(**base)


# ---------------------------------------------------------------------------
# validation


def test_validate_constant_floors():
    assert validate(make_problem(), (9,)) == (1.0, 1.0)


def test_validate_rejects_sign_violations():
    with pytest.raises(ValidationError, match="ellipticity"):
        validate(make_problem(a="x1"), (9,))
    with pytest.raises(ValidationError, match="floor"):
        validate(make_problem(c="0"), (9,))
    with pytest.raises(ValidationError, match="non-negative"):
        validate(make_problem(f="-1"), (9,))
    with pytest.raises(ValidationError, match="3 interior"):
        validate(make_problem(), (2,))


def test_validate_empirical_gamma():
    problem = make_problem(a="2 + sin(x1)")
    gamma, delta = validate(problem, (99,))
    xs = np.linspace(-1, 1, 101)
    assert gamma == pytest.approx(float(np.min(2 + np.sin(xs))))
    assert gamma == pytest.approx(2 + np.sin(-1), abs=1e-3)
    assert delta == 1.0


# ---------------------------------------------------------------------------
# assembly


def test_1d_laplacian_stencil():
    # box (-1,1) with 3 interior points: h = 0.5, stencil (-4, 8, -4)
    problem = make_problem(c="0 + 1")
    validate(problem, (3,))
    opr = assemble(problem, (3,))
    dense = opr.matrix.toarray()
    assert dense[1, 0] == pytest.approx(-4.0)
    assert dense[1, 1] == pytest.approx(8.0 + 1.0)  # 2/h^2 + c
    assert dense[1, 2] == pytest.approx(-4.0)


def test_2d_five_point_stencil():
    problem = make_problem(dim=2, c="0 + 1")
    validate(problem, (3, 3))
    opr = assemble(problem, (3, 3))
    dense = opr.matrix.toarray()
    center = 4  # middle of the 3x3 interior, row-major
    assert dense[center, center] == pytest.approx(16.0 + 1.0)
    for nb in (1, 3, 5, 7):
        assert dense[center, nb] == pytest.approx(-4.0)


def test_upwind_keeps_m_matrix_for_strong_drift():
    for b in ("10", "-10", "10*x1"):
        problem = make_problem(b=b)
        validate(problem, (19,))
        opr = assemble(problem, (19,))
        coo = opr.matrix.tocoo()
        off = coo.data[coo.row != coo.col]
        assert np.max(off) <= 0
        assert np.min(opr.matrix.diagonal()) > 0


def test_monotone_inverse_nonnegative():
    # discrete maximum principle: A^-1 r >= 0 for r >= 0
    problem = make_problem()
    validate(problem, (49,))
    opr = assemble(problem, (49,))
    lu = spla.splu(opr.matrix.tocsc())
    rng = np.random.default_rng(5)
    for _ in range(100):
        r = rng.uniform(0, 1, size=49)
        assert np.min(lu.solve(r)) >= -1e-13


# ---------------------------------------------------------------------------
# apply / gradient


def _sample(problem, shape, func):
    gf = GridFunction.zeros(problem.box, shape)
    axes = gf.axes()
    if problem.dim == 1:
        vals = func(axes[0])
    else:
        xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
        vals = func(xx, yy)
    return GridFunction(problem.box, shape, vals)


def test_apply_zero_and_constant():
    problem = make_problem()
    validate(problem, (9,))
    opr = assemble(problem, (9,))
    zero = GridFunction.zeros(problem.box, (9,))
    np.testing.assert_allclose(apply_operator(opr, zero).interior, 0.0)
    one = _sample(problem, (9,), lambda x: np.ones_like(x))
    out = apply_operator(opr, one).interior
    h = one.h[0]
    np.testing.assert_allclose(out[1:-1][1:-1], 1.0)  # c*u away from boundary
    assert out[0] == pytest.approx(1.0 + 1.0 / h**2)  # Dirichlet-0 neighbor


def test_apply_consistency_second_order():
    # -u'' + u = 1 for u = 1 - cosh(x)/cosh(1): apply() should return 1 + O(h^2)
    problem = make_problem()
    errs = []
    hs = []
    for n in (49, 99, 199):
        validate(problem, (n,))
        opr = assemble(problem, (n,))
        u = _sample(problem, (n,), lambda x: 1 - np.cosh(x) / np.cosh(1.0))
        out = apply_operator(opr, u).interior
        errs.append(float(np.max(np.abs(out - 1.0))))
        hs.append(u.h[0])
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 1.9 <= slope <= 2.1


def test_apply_consistency_first_order_with_drift():
    # upwind drift drops consistency to O(h)
    problem = make_problem(b="1")
    errs, hs = [], []
    for n in (49, 99, 199):
        validate(problem, (n,))
        opr = assemble(problem, (n,))
        u = _sample(problem, (n,), lambda x: np.sin(x))
        out = apply_operator(opr, u).interior
        xs = u.interior_axes()[0]
        exact = np.sin(xs) + np.cos(xs) + np.sin(xs)
        err_interior = np.abs(out - exact)[1:-1]  # skip boundary-coupled rows
        errs.append(float(np.max(err_interior)))
        hs.append(u.h[0])
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 0.8 <= slope <= 1.3


def test_gradient_exact_for_affine_and_quadratic():
    problem = make_problem()
    lin = _sample(problem, (19,), lambda x: x)
    np.testing.assert_allclose(gradient(lin)[:, 0], 1.0, atol=1e-14)
    const = _sample(problem, (19,), lambda x: 3 * np.ones_like(x))
    np.testing.assert_allclose(gradient(const)[:, 0], 0.0, atol=1e-14)
    quad = _sample(problem, (19,), lambda x: x**2)
    xs = quad.interior_axes()[0]
    np.testing.assert_allclose(gradient(quad)[:, 0], 2 * xs, atol=1e-13)


def test_second_differences_exact_on_quadratic():
    problem = make_problem()
    quad = _sample(problem, (19,), lambda x: x**2)
    np.testing.assert_allclose(second_differences(quad)[:, 0], 2.0, atol=1e-10)


def test_gradient_2d():
    problem = make_problem(dim=2)
    gf = _sample(problem, (9, 9), lambda x, y: 2 * x - 3 * y)
    g = gradient(gf)
    np.testing.assert_allclose(g[..., 0], 2.0, atol=1e-13)
    np.testing.assert_allclose(g[..., 1], -3.0, atol=1e-13)


def test_apply_shape_mismatch():
    problem = make_problem()
    validate(problem, (9,))
    opr = assemble(problem, (9,))
    other = GridFunction.zeros(problem.box, (11,))
    with pytest.raises(ValidationError):
        apply_operator(opr, other)


# ---------------------------------------------------------------------------
# GridFunction and CSV


def test_grid_function_invariants():
    with pytest.raises(ValidationError):
        GridFunction([(-1, 1)], (5,), np.zeros(6))  # wrong length
    with pytest.raises(ValidationError):
        GridFunction([(-1, 1)], (5,), np.full(7, np.nan))
    gf = GridFunction.zeros([(-1, 1)], (4,))
    assert gf.h[0] == pytest.approx(2.0 / 5.0)


def test_csv_round_trip_1d_bit_exact(tmp_path):
    rng = np.random.default_rng(9)
    vals = rng.standard_normal(12) * np.pi
    vals[3] = 0.1  # classic non-representable decimal
    vals[4] = 1e-17
    gf = GridFunction([(-1, 1)], (10,), vals)
    path = tmp_path / "grid.csv"
    write_grid_csv(gf, path)
    back = read_grid_csv(path)
    assert back.box == gf.box
    assert back.shape == gf.shape
    assert np.array_equal(back.values, gf.values)
    assert back.h == gf.h


def test_csv_round_trip_2d_bit_exact(tmp_path):
    rng = np.random.default_rng(10)
    vals = rng.standard_normal((6, 7))
    gf = GridFunction([(-1, 1), (0, 2)], (4, 5), vals)
    path = tmp_path / "grid2.csv"
    write_grid_csv(gf, path)
    back = read_grid_csv(path)
    assert back.box == gf.box and back.shape == gf.shape
    assert np.array_equal(back.values, gf.values)
