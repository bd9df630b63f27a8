"""Tiny arithmetic expressions in the variables x1, x2.

Coefficients and data arrive as strings in config files, get parsed once
into an immutable AST and are then evaluated on scalars or numpy arrays.

Grammar (precedence low to high, binary ops left-associative except ^):

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right-assoc, binds above unary -
    atom    := NUMBER | 'x1' | 'x2'
             | NAME '(' expr ')'          # abs exp sin cos sqrt
             | NAME '(' expr ',' expr ')' # min max
             | '(' expr ')'

There are deliberately no user-defined functions and no conditionals.
Evaluation never returns NaN or infinities; such results raise EvalError.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Expression",
    "ExprError",
    "ParseError",
    "EvalError",
    "parse",
]

_UNARY_FUNCS = ("neg", "abs", "exp", "sin", "cos", "sqrt")
_BINARY_FUNCS = ("min", "max")
_VARIABLES = ("x1", "x2")


class ExprError(ValueError):
    """Base class for expression failures."""


class ParseError(ExprError):
    """Syntax or name error; carries the byte offset into the source."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class EvalError(ExprError):
    """Raised when evaluation would produce a non-finite value."""


# AST nodes are plain nested tuples so structural equality is free:
#   ("const", float) | ("var", 0 or 1) | ("unary", name, child)
#   ("binary", op, left, right) with op in "+-*/^"
#   ("call2", "min"|"max", left, right)


class Expression:
    """Immutable parsed expression over x1, x2."""

    __slots__ = ("ast", "_nvars")

    def __init__(self, ast):
        self.ast = ast
        self._nvars = _max_var(ast)

    @property
    def num_variables(self):
        """1 + highest variable index used, 0 for constant expressions."""
        return self._nvars

    def __call__(self, point):
        return self.eval(point)

    def eval(self, point):
        """Evaluate at a point (sequence of scalars or numpy arrays)."""
        point = tuple(point)
        if len(point) < self._nvars:
            raise EvalError(
                f"expression uses x{self._nvars} but point has "
                f"{len(point)} coordinate(s)"
            )
        out = _eval_node(self.ast, point)
        _check_finite(out, "result")
        return out

    def __str__(self):
        return _print_node(self.ast)

    def __repr__(self):
        return f"Expression({_print_node(self.ast)!r})"

    def __eq__(self, other):
        return isinstance(other, Expression) and self.ast == other.ast

    def __hash__(self):
        return hash(self.ast)


def _max_var(node):
    kind = node[0]
    if kind == "const":
        return 0
    if kind == "var":
        return node[1] + 1
    if kind == "unary":
        return _max_var(node[2])
    return max(_max_var(node[2]), _max_var(node[3]))


def _check_finite(value, what):
    if not np.all(np.isfinite(value)):
        raise EvalError(f"non-finite {what} in expression evaluation")


def _eval_node(node, point):
    kind = node[0]
    if kind == "const":
        return node[1]
    if kind == "var":
        return point[node[1]]
    if kind == "unary":
        name, child = node[1], node[2]
        v = _eval_node(child, point)
        if name == "neg":
            return -v if np.isscalar(v) else np.negative(v)
        if name == "abs":
            return np.abs(v)
        if name == "exp":
            with np.errstate(over="ignore"):
                out = np.exp(v)
            _check_finite(out, "exp")
            return out
        if name == "sin":
            return np.sin(v)
        if name == "cos":
            return np.cos(v)
        if name == "sqrt":
            if np.any(np.asarray(v) < 0):
                raise EvalError("square root of a negative value")
            return np.sqrt(v)
        raise AssertionError(name)
    op = node[1]
    a = _eval_node(node[2], point)
    b = _eval_node(node[3], point)
    if kind == "call2":
        return np.minimum(a, b) if op == "min" else np.maximum(a, b)
    if op == "+":
        return np.add(a, b)
    if op == "-":
        return np.subtract(a, b)
    if op == "*":
        with np.errstate(over="ignore"):
            out = np.multiply(a, b)
        _check_finite(out, "product")
        return out
    if op == "/":
        if np.any(np.asarray(b) == 0):
            raise EvalError("division by zero")
        return np.divide(a, b)
    if op == "^":
        base = np.asarray(a, dtype=float)
        expo = np.asarray(b, dtype=float)
        # reject complex branches: negative base needs an integer exponent
        if np.any((base < 0) & (expo != np.floor(expo))):
            raise EvalError("negative base with non-integer exponent")
        if np.any((base == 0) & (expo < 0)):
            raise EvalError("zero raised to a negative power")
        with np.errstate(over="ignore"):
            out = np.power(a, b)
        _check_finite(out, "power")
        return out
    raise AssertionError(op)


def _print_node(node):
    # Fully parenthesized canonical form; parse(str(e)) rebuilds the same
    # tree, which the round-trip tests rely on.
    kind = node[0]
    if kind == "const":
        return repr(node[1])
    if kind == "var":
        return _VARIABLES[node[1]]
    if kind == "unary":
        name, child = node[1], node[2]
        if name == "neg":
            return f"(-{_print_node(child)})"
        return f"{name}({_print_node(child)})"
    if kind == "call2":
        return f"{node[1]}({_print_node(node[2])}, {_print_node(node[3])})"
    return f"({_print_node(node[2])} {node[1]} {_print_node(node[3])})"


# ---------------------------------------------------------------------------
# lexer


class _Token:
    __slots__ = ("kind", "text", "offset")

    def __init__(self, kind, text, offset):
        self.kind = kind  # num | name | op | lparen | rparen | comma | end
        self.text = text
        self.offset = offset


def _tokenize(source):
    tokens = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            try:
                float(text)
            except ValueError:
                raise ParseError(f"malformed number {text!r}", i) from None
            tokens.append(_Token("num", text, i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("name", source[i:j], i))
            i = j
            continue
        if ch in "+-*/^":
            tokens.append(_Token("op", ch, i))
        elif ch == "(":
            tokens.append(_Token("lparen", ch, i))
        elif ch == ")":
            tokens.append(_Token("rparen", ch, i))
        elif ch == ",":
            tokens.append(_Token("comma", ch, i))
        else:
            raise ParseError(f"unexpected character {ch!r}", i)
        i += 1
    tokens.append(_Token("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# recursive-descent parser


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind, what):
        tok = self.next()
        if tok.kind != kind:
            raise ParseError(f"expected {what}, found {tok.text or 'end of input'!r}",
                             tok.offset)
        return tok

    def parse_expr(self):
        node = self.parse_term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.next().text
            node = ("binary", op, node, self.parse_term())
        return node

    def parse_term(self):
        node = self.parse_unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.next().text
            node = ("binary", op, node, self.parse_unary())
        return node

    def parse_unary(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.next()
            return ("unary", "neg", self.parse_unary())
        return self.parse_power()

    def parse_power(self):
        node = self.parse_atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.next()
            # right operand at unary level: 2^-3 works, -x^2 is -(x^2)
            node = ("binary", "^", node, self.parse_unary())
        return node

    def parse_atom(self):
        tok = self.next()
        if tok.kind == "num":
            return ("const", float(tok.text))
        if tok.kind == "lparen":
            node = self.parse_expr()
            self.expect("rparen", "')'")
            return node
        if tok.kind == "name":
            name = tok.text
            if self.peek().kind == "lparen":
                self.next()
                args = [self.parse_expr()]
                while self.peek().kind == "comma":
                    self.next()
                    args.append(self.parse_expr())
                self.expect("rparen", "')'")
                return self._make_call(name, args, tok.offset)
            if name in _VARIABLES:
                return ("var", _VARIABLES.index(name))
            raise ParseError(f"unknown identifier {name!r}", tok.offset)
        raise ParseError(
            f"expected a value, found {tok.text or 'end of input'!r}", tok.offset
        )

    def _make_call(self, name, args, offset):
        if name in _UNARY_FUNCS and name != "neg":
            if len(args) != 1:
                raise ParseError(f"{name} takes 1 argument, got {len(args)}", offset)
            return ("unary", name, args[0])
        if name in _BINARY_FUNCS:
            if len(args) != 2:
                raise ParseError(f"{name} takes 2 arguments, got {len(args)}", offset)
            return ("call2", name, args[0], args[1])
        raise ParseError(f"unknown function {name!r}", offset)


def parse(source):
    """Parse source text into an Expression."""
    if not isinstance(source, str) or not source.strip():
        raise ParseError("empty expression", 0)
    parser = _Parser(_tokenize(source))
    node = parser.parse_expr()
    tail = parser.peek()
    if tail.kind != "end":
        raise ParseError(f"trailing input {tail.text!r}", tail.offset)
    return Expression(node)
