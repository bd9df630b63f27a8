import numpy as np
import pytest

from gchjb.expr import EvalError, ParseError, parse


def test_precedence_examples():
    assert parse("1 + 2*3").eval(()) == 7.0
    assert parse("2*3^2").eval(()) == 18.0
    assert parse("-2^2").eval(()) == -4.0  # unary minus binds below ^
    assert parse("2^-2").eval(()) == 0.25
    assert parse("8 - 4 - 2").eval(()) == 2.0  # left associative
    assert parse("16/4/2").eval(()) == 2.0


def test_function_examples():
    assert parse("max(0, x1)").eval((-2.0,)) == 0.0
    assert parse("exp(-x1^2 - x2^2)").eval((0.0, 0.0)) == 1.0
    assert parse("sin(x1)").eval((0.0,)) == 0.0
    assert parse("x1*x2").eval((3.0, 4.0)) == 12.0
    assert parse("min(2, x1)").eval((5.0,)) == 2.0
    assert parse("abs(-(x1))").eval((-3.0,)) == 3.0
    assert parse("sqrt(x1)").eval((4.0,)) == 2.0


def test_parentheses_and_whitespace():
    assert parse(" ( 1 + 2 ) * 3 ").eval(()) == 9.0
    assert parse("((x1))").eval((5.0,)) == 5.0


def test_scientific_notation():
    assert parse("1e-3 + 2E2").eval(()) == pytest.approx(200.001)


def test_division_by_zero_is_error():
    with pytest.raises(EvalError):
        parse("1/x1").eval((0.0,))


def test_sqrt_of_negative_is_error():
    with pytest.raises(EvalError):
        parse("sqrt(x1)").eval((-1.0,))


def test_negative_base_fractional_exponent_is_error():
    with pytest.raises(EvalError):
        parse("x1^0.5").eval((-2.0,))
    # integer exponent of a negative base is fine
    assert parse("x1^2").eval((-2.0,)) == 4.0


def test_overflow_is_error_not_inf():
    with pytest.raises(EvalError):
        parse("exp(x1)").eval((1e4,))
    with pytest.raises(EvalError):
        parse("x1^x1").eval((1e9,))


def test_zero_to_negative_power_is_error():
    with pytest.raises(EvalError):
        parse("x1^(-1)").eval((0.0,))


def test_missing_variable():
    with pytest.raises(EvalError):
        parse("x2").eval((1.0,))


def test_parse_errors_carry_offsets():
    with pytest.raises(ParseError) as err:
        parse("1 + * 2")
    assert err.value.offset == 4
    with pytest.raises(ParseError) as err:
        parse("1 + foo")
    assert err.value.offset == 4
    with pytest.raises(ParseError):
        parse("max(1)")  # wrong arity
    with pytest.raises(ParseError):
        parse("abs(1, 2)")
    with pytest.raises(ParseError):
        parse("")
    with pytest.raises(ParseError):
        parse("1 + 2)")


def test_deterministic_evaluation():
    e = parse("exp(-x1^2) * sin(x2) + max(x1, x2) / 3")
    pt = (0.731, -1.219)
    assert e.eval(pt) == e.eval(pt)


def test_vectorized_matches_scalar():
    e = parse("2 + sin(x1) * cos(x2)")
    xs = np.linspace(-2, 2, 17)
    ys = np.linspace(-1, 1, 17)
    vec = e.eval((xs, ys))
    scal = np.array([e.eval((x, y)) for x, y in zip(xs, ys)])
    np.testing.assert_array_equal(vec, scal)


# random round-trip trees; constants kept non-negative so the printer's
# canonical form maps back to the identical structure

_UNARY = ["neg", "abs", "exp", "sin", "cos"]
_BIN = ["+", "-", "*"]


def _random_tree(rng, depth):
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.5:
            return ("const", float(round(rng.uniform(0, 3), 3)))
        return ("var", int(rng.integers(0, 2)))
    r = rng.random()
    if r < 0.35:
        return ("unary", _UNARY[rng.integers(0, len(_UNARY))],
                _random_tree(rng, depth - 1))
    if r < 0.5:
        op = "min" if rng.random() < 0.5 else "max"
        return ("call2", op, _random_tree(rng, depth - 1),
                _random_tree(rng, depth - 1))
    op = _BIN[rng.integers(0, len(_BIN))]
    return ("binary", op, _random_tree(rng, depth - 1), _random_tree(rng, depth - 1))


def test_print_parse_round_trip_is_structural_identity():
    from gchjb.expr import Expression

    rng = np.random.default_rng(20240817)
    point = (0.37, -0.81)
    checked = 0
    for _ in range(300):
        tree = _random_tree(rng, depth=int(rng.integers(1, 7)))
        e = Expression(tree)
        try:
            val = e.eval(point)
        except EvalError:
            continue  # only finite evaluations are in scope
        back = parse(str(e))
        assert back.ast == e.ast
        assert back.eval(point) == val
        checked += 1
    assert checked > 150
