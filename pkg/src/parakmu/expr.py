"""A small expression language for scalar functions of the chart coordinates.

Grammar (standard precedence, ``^`` binds tighter than unary minus; a
chained power such as ``2^3^2`` must be parenthesized)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' ['-'] INTEGER)?
    atom    := NUMBER | VARIABLE | FUNC '(' expr ')' | '(' expr ')'
    FUNC    := sqrt | exp | ln | sin | cos

Numbers accept an optional fraction and exponent (``2``, ``0.5``, ``1e-3``).
Exponents must be integer literals.  Evaluation runs on jets, so every
parsed function carries exact derivatives through order 3.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

from . import jets
from .jets import Jet

FUNCTIONS = ("sqrt", "exp", "ln", "sin", "cos")

GRAMMAR_HELP = """\
expression grammar (functions of z; custom components may also use x, y):
  numbers      2, 0.5, 1e-3
  variables    z (and x, y in custom component expressions)
  operators    + - * /, unary -, ^ with an integer literal exponent (z^2, z^-1)
  functions    sqrt(.) exp(.) ln(.) sin(.) cos(.)
  grouping     ( ... )
  precedence   ^ over unary - over * / over + -; chained powers need parentheses"""


class ParseError(ValueError):
    def __init__(self, source: str, position: int, expected: Sequence[str]):
        self.source = source
        self.position = position
        self.expected = tuple(expected)
        pointer = " " * position + "^"
        super().__init__(
            f"parse error at position {position}: expected {' or '.join(self.expected)}\n"
            f"  {source}\n  {pointer}"
        )


_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


@dataclass(frozen=True)
class Token:
    kind: str  # number | name | op | end
    text: str
    pos: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if not m:
            while source[pos].isspace():
                pos += 1
            raise ParseError(source, pos, ("number", "name", "operator"))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append(Token(kind, m.group(kind), start))
        pos = m.end()
    tokens.append(Token("end", "", len(source)))
    return tokens


# AST nodes are tuples: ("num", v) ("var", name) ("neg", a) ("bin", op, a, b)
# ("pow", a, n) ("call", fname, a)


class _Parser:
    def __init__(self, source: str, variables: Sequence[str]):
        self.source = source
        self.variables = tuple(variables)
        self.tokens = tokenize(source)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def fail(self, *expected: str):
        raise ParseError(self.source, self.tok.pos, expected)

    def take(self, text: str):
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return
        self.fail(repr(text))

    def parse(self):
        if self.tok.kind == "end":
            self.fail("expression")
        node = self.expr()
        if self.tok.kind != "end":
            self.fail("operator", "end of input")
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = ("bin", op, node, self.unary())
        return node

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.i += 1
            return ("neg", self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.i += 1
            sign = 1
            if self.tok.kind == "op" and self.tok.text == "-":
                sign = -1
                self.i += 1
            if self.tok.kind != "number" or not re.fullmatch(r"\d+", self.tok.text):
                self.fail("integer exponent")
            n = sign * int(self.tok.text)
            self.i += 1
            if self.tok.kind == "op" and self.tok.text == "^":
                self.fail("operator other than a second '^' (parenthesize nested powers)")
            return ("pow", base, n)
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "number":
            self.i += 1
            return ("num", float(tok.text))
        if tok.kind == "name":
            if tok.text in FUNCTIONS:
                self.i += 1
                self.take("(")
                arg = self.expr()
                self.take(")")
                return ("call", tok.text, arg)
            if tok.text in self.variables:
                self.i += 1
                return ("var", tok.text)
            self.fail(*(list(self.variables) + [f + "(" for f in FUNCTIONS]))
        if tok.kind == "op" and tok.text == "(":
            self.i += 1
            node = self.expr()
            self.take(")")
            return node
        self.fail("number", "variable", "function", "'('")


def parse(source: str, variables: Sequence[str] = ("z",)):
    """Parse ``source`` into an AST tuple; raises :class:`ParseError`."""
    return _Parser(source, variables).parse()


def evaluate_ast(node, env: dict[str, Jet]) -> Jet:
    kind = node[0]
    if kind == "num":
        return Jet.constant(node[1])
    if kind == "var":
        return env[node[1]]
    if kind == "neg":
        return -evaluate_ast(node[1], env)
    if kind == "pow":
        return jets.powi(evaluate_ast(node[1], env), node[2])
    if kind == "call":
        return jets.UNARY[node[1]](evaluate_ast(node[2], env))
    _, op, a, b = node
    left, right = evaluate_ast(a, env), evaluate_ast(b, env)
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    return left / right


def _num(v):
    return ("num", float(v))


def _is_num(node, v=None):
    return node[0] == "num" and (v is None or node[1] == v)


def _add(a, b):
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    return ("bin", "+", a, b)


def _sub(a, b):
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return ("neg", b)
    return ("bin", "-", a, b)


def _mul(a, b):
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return _num(0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    return ("bin", "*", a, b)


def _div(a, b):
    if _is_num(a, 0.0):
        return _num(0)
    return ("bin", "/", a, b)


def differentiate(node, var: str):
    """Symbolic partial derivative of an AST with respect to ``var``."""
    kind = node[0]
    if kind == "num":
        return _num(0)
    if kind == "var":
        return _num(1 if node[1] == var else 0)
    if kind == "neg":
        d = differentiate(node[1], var)
        return d if _is_num(d, 0.0) else ("neg", d)
    if kind == "pow":
        base, n = node[1], node[2]
        if n == 0:
            return _num(0)
        lowered = _num(1) if n == 1 else ("pow", base, n - 1)
        return _mul(_mul(_num(n), lowered), differentiate(base, var))
    if kind == "call":
        fname, arg = node[1], node[2]
        da = differentiate(arg, var)
        if _is_num(da, 0.0):
            return _num(0)
        outer = {
            "sqrt": lambda: _div(_num(0.5), node),
            "exp": lambda: node,
            "ln": lambda: _div(_num(1), arg),
            "sin": lambda: ("call", "cos", arg),
            "cos": lambda: ("neg", ("call", "sin", arg)),
        }[fname]()
        return _mul(outer, da)
    _, op, a, b = node
    da, db = differentiate(a, var), differentiate(b, var)
    if op == "+":
        return _add(da, db)
    if op == "-":
        return _sub(da, db)
    if op == "*":
        return _add(_mul(da, b), _mul(a, db))
    # quotient rule
    return _div(_sub(_mul(da, b), _mul(a, db)), ("pow", b, 2))


@dataclass(frozen=True)
class FunctionSpec:
    """A parsed scalar function; ``evaluator`` maps a z-jet to a jet."""

    source: str
    ast: tuple = field(repr=False, compare=False)

    def evaluator(self, z: Jet) -> Jet:
        return evaluate_ast(self.ast, {"z": z})

    __call__ = evaluator

    def derivative(self) -> "FunctionSpec":
        """d/dz as a new expression, so it evaluates with the full jet budget."""
        return FunctionSpec(f"d/dz({self.source})", differentiate(self.ast, "z"))


@dataclass(frozen=True)
class CoordinateExpression:
    """A parsed expression in x, y, z (used for custom structure components)."""

    source: str
    ast: tuple = field(repr=False, compare=False)

    def __call__(self, x: Jet, y: Jet, z: Jet) -> Jet:
        return evaluate_ast(self.ast, {"x": x, "y": y, "z": z})


def parse_scalar_function(expr: str) -> FunctionSpec:
    if not expr or not expr.strip():
        raise ParseError(expr or "", 0, ("expression",))
    return FunctionSpec(expr, parse(expr, ("z",)))


def parse_coordinate_expression(expr: str) -> CoordinateExpression:
    if not expr or not expr.strip():
        raise ParseError(expr or "", 0, ("expression",))
    return CoordinateExpression(expr, parse(expr, ("x", "y", "z")))
