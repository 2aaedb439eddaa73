"""Tiny expression grammar for integrands and initial data.

Grammar (whitespace ignored)::

    expr   := term (('+' | '-') term)*
    term   := unary ('*' unary)*
    unary  := '-' unary | power
    power  := atom ('^' INTEGER)?
    atom   := NUMBER | 'pi' | 't' | 'x' | 'y' | 'cos' '(' expr ')' | '(' expr ')'

``x`` and ``y`` are the spatial coordinates (``y`` only on 2D meshes), ``t``
is time.  Arguments of ``cos`` must be spatial, and time dependence is
limited to polynomials so that the two-point Gauss quadrature used for the
per-step averages is exact.  Division is deliberately absent.
"""

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ExpressionError

_TOKEN = re.compile(
    r"\s*(?:(?P<number>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]+)"
    r"|(?P<op>[()+\-*^]))"
)


@dataclass(frozen=True)
class Expression:
    """Parsed expression; call with (t, coords) to evaluate nodewise."""

    text: str
    _root: tuple = field(repr=False)
    depends_on_time: bool = False
    time_degree: int = 0

    def __call__(self, t, coords):
        """Evaluate at time ``t`` on node coordinates ``coords`` of shape (P, d)."""
        coords = np.asarray(coords, dtype=float)
        values = _evaluate(self._root, float(t), coords)
        if np.ndim(values) == 0:
            values = np.full(coords.shape[0], float(values))
        return values


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None or match.end() == match.start():
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ExpressionError(f"unexpected character {stripped[0]!r}", position=pos)
        if match.lastgroup == "number":
            tokens.append(("number", float(match.group("number")), match.start("number")))
        elif match.lastgroup == "name":
            tokens.append(("name", match.group("name"), match.start("name")))
        else:
            tokens.append(("op", match.group("op"), match.start("op")))
        pos = match.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.index = 0

    def peek(self):
        return self.tokens[self.index]

    def advance(self):
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect_op(self, symbol):
        kind, value, pos = self.peek()
        if kind != "op" or value != symbol:
            raise ExpressionError(f"expected {symbol!r}", position=pos)
        return self.advance()

    def parse(self):
        node = self.expr()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected trailing {value!r}", position=pos)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                right = self.term()
                node = (value, node, right)
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value == "*":
                self.advance()
                node = ("*", node, self.unary())
            else:
                return node

    def unary(self):
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            return ("neg", self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        kind, value, pos = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            kind, value, pos = self.advance()
            if kind != "number" or value != int(value) or value < 0:
                raise ExpressionError("exponent must be a nonnegative integer", position=pos)
            node = ("pow", node, int(value))
        return node

    def atom(self):
        kind, value, pos = self.advance()
        if kind == "number":
            return ("const", value)
        if kind == "name":
            if value == "pi":
                return ("const", np.pi)
            if value in ("t", "x", "y"):
                return (value,)
            if value == "cos":
                self.expect_op("(")
                inner = self.expr()
                self.expect_op(")")
                if _depends_on_time(inner):
                    raise ExpressionError("cos arguments must be spatial only", position=pos)
                return ("cos", inner)
            raise ExpressionError(f"unknown symbol {value!r}", position=pos)
        if kind == "op" and value == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise ExpressionError("expected a number, symbol, or parenthesis", position=pos)


def _depends_on_time(node):
    tag = node[0]
    if tag == "t":
        return True
    if tag in ("const", "x", "y"):
        return False
    if tag in ("neg", "cos"):
        return _depends_on_time(node[1])
    if tag == "pow":
        return _depends_on_time(node[1])
    return _depends_on_time(node[1]) or _depends_on_time(node[2])


def _time_degree(node):
    tag = node[0]
    if tag == "t":
        return 1
    if tag in ("const", "x", "y", "cos"):
        return 0
    if tag == "neg":
        return _time_degree(node[1])
    if tag == "pow":
        return _time_degree(node[1]) * node[2]
    if tag == "*":
        return _time_degree(node[1]) + _time_degree(node[2])
    return max(_time_degree(node[1]), _time_degree(node[2]))


def _evaluate(node, t, coords):
    tag = node[0]
    if tag == "const":
        return node[1]
    if tag == "t":
        return t
    if tag == "x":
        return coords[:, 0]
    if tag == "y":
        if coords.shape[1] < 2:
            raise ExpressionError("'y' is only available on 2D meshes")
        return coords[:, 1]
    if tag == "neg":
        return -_evaluate(node[1], t, coords)
    if tag == "cos":
        return np.cos(_evaluate(node[1], t, coords))
    if tag == "pow":
        return _evaluate(node[1], t, coords) ** node[2]
    left = _evaluate(node[1], t, coords)
    right = _evaluate(node[2], t, coords)
    if tag == "+":
        return left + right
    if tag == "-":
        return left - right
    return left * right


def parse_expression(text):
    """Parse ``text`` into an Expression; raises ExpressionError with a column."""
    if isinstance(text, Expression):
        return text
    root = _Parser(text).parse()
    return Expression(
        text=text,
        _root=root,
        depends_on_time=_depends_on_time(root),
        time_degree=_time_degree(root),
    )


def evaluate_on_mesh(expression, ops, t=0.0):
    """Evaluate an expression (or string) on the mesh nodes at time ``t``."""
    return parse_expression(expression)(t, ops.coordinates)
