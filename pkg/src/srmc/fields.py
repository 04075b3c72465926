"""Small arithmetic expression language with forward-mode derivatives.

Grammar (decimal point only, locale independent)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom ('^' unary)?          # right associative, -x^2 == -(x^2)
    atom   := NUMBER | VARIABLE | FUNC '(' expr ')' | '(' expr ')'

Variables are ``x``, ``y``, ``t`` and ``s``; functions are ``sin``, ``cos``,
``exp``, ``log``, ``sqrt``, ``abs`` and ``tanh``.  Values may be floats or
numpy arrays; arrays broadcast through every node.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

VARIABLES = ("x", "y", "t", "s")
FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "abs", "tanh")


class ParseError(ValueError):
    """Malformed source; ``offset`` is the byte offset of the offending token."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.message = message
        self.offset = offset


class FieldDomainError(ArithmeticError):
    """An expression produced a non-finite intermediate value."""


def _check(value, node):
    if not np.all(np.isfinite(value)):
        raise FieldDomainError(f"non-finite value in {node.to_source()}")
    return value


def _is_zero(d) -> bool:
    return isinstance(d, float) and d == 0.0


def _scale(c, d):
    return 0.0 if _is_zero(d) else c * d


def _add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return a + b


class Expr:
    """Base class of syntax-tree nodes.  Nodes are immutable and hashable."""

    def evaluate(self, env):
        raise NotImplementedError

    def dual(self, env, nvars):
        """Return ``(value, [d/dv_0, ..., d/dv_{nvars-1}])``.

        ``env`` maps a variable name to ``(value, index)``.  Partials that are
        structurally zero are returned as the float ``0.0``.
        """
        raise NotImplementedError

    def variables(self) -> frozenset:
        raise NotImplementedError

    def to_source(self) -> str:
        raise NotImplementedError

    def __str__(self):
        return self.to_source()


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def evaluate(self, env):
        return self.value

    def dual(self, env, nvars):
        return self.value, [0.0] * nvars

    def variables(self):
        return frozenset()

    def to_source(self):
        return repr(float(self.value))


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def evaluate(self, env):
        return env[self.name]

    def dual(self, env, nvars):
        value, index = env[self.name]
        grad = [0.0] * nvars
        grad[index] = 1.0 if np.ndim(value) == 0 else np.ones_like(value, dtype=float)
        return value, grad

    def variables(self):
        return frozenset((self.name,))

    def to_source(self):
        return self.name


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def evaluate(self, env):
        return -self.arg.evaluate(env)

    def dual(self, env, nvars):
        v, g = self.arg.dual(env, nvars)
        return -v, [_scale(-1.0, d) for d in g]

    def variables(self):
        return self.arg.variables()

    def to_source(self):
        return f"(-{self.arg.to_source()})"


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def evaluate(self, env):
        a = self.left.evaluate(env)
        b = self.right.evaluate(env)
        if self.op == "+":
            out = a + b
        elif self.op == "-":
            out = a - b
        elif self.op == "*":
            out = a * b
        elif self.op == "/":
            out = np.divide(a, b)
        else:
            out = np.power(a, b)
        return _check(out, self)

    def dual(self, env, nvars):
        a, da = self.left.dual(env, nvars)
        b, db = self.right.dual(env, nvars)
        op = self.op
        if op == "+":
            return _check(a + b, self), [_add(p, q) for p, q in zip(da, db)]
        if op == "-":
            return _check(a - b, self), [_add(p, _scale(-1.0, q)) for p, q in zip(da, db)]
        if op == "*":
            return _check(a * b, self), [_add(_scale(b, p), _scale(a, q)) for p, q in zip(da, db)]
        if op == "/":
            value = _check(np.divide(a, b), self)
            inv = 1.0 / b
            grad = [_add(_scale(inv, p), _scale(-value * inv, q)) for p, q in zip(da, db)]
            return value, [_check(d, self) for d in grad]
        value = _check(np.power(a, b), self)
        if all(_is_zero(q) for q in db):
            # constant exponent: power rule, valid for negative bases
            slope = _check(b * np.power(a, b - 1.0), self) if any(not _is_zero(p) for p in da) else 0.0
            return value, [_scale(slope, p) for p in da]
        log_a = _check(np.log(a), self)
        grad = [_add(_scale(value * b / a, p), _scale(value * log_a, q)) for p, q in zip(da, db)]
        return value, [_check(d, self) for d in grad]

    def variables(self):
        return self.left.variables() | self.right.variables()

    def to_source(self):
        return f"({self.left.to_source()} {self.op} {self.right.to_source()})"


_FUNC_VALUE = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
}


def _func_slope(name, a, value):
    if name == "sin":
        return np.cos(a)
    if name == "cos":
        return -np.sin(a)
    if name == "exp":
        return value
    if name == "log":
        return 1.0 / a
    if name == "sqrt":
        return 0.5 / value
    if name == "abs":
        # subgradient 0 at the origin
        return np.sign(a)
    return 1.0 - value * value  # tanh


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr

    def evaluate(self, env):
        with np.errstate(all="ignore"):
            out = _FUNC_VALUE[self.func](self.arg.evaluate(env))
        return _check(out, self)

    def dual(self, env, nvars):
        a, da = self.arg.dual(env, nvars)
        with np.errstate(all="ignore"):
            value = _check(_FUNC_VALUE[self.func](a), self)
            if all(_is_zero(p) for p in da):
                return value, [0.0] * nvars
            slope = _check(_func_slope(self.func, a, value), self)
        return value, [_scale(slope, p) for p in da]

    def variables(self):
        return self.arg.variables()

    def to_source(self):
        return f"{self.func}({self.arg.to_source()})"


_TOKEN = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", _byte_offset(source, pos))
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), _byte_offset(source, pos)))
        pos = m.end()
    tokens.append(_Token("end", "", _byte_offset(source, len(source))))
    return tokens


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode("utf-8"))


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.pos = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, tok: _Token):
        what = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ParseError(f"unexpected {what}", tok.offset)

    def expect(self, text: str):
        if self.tok.text != text or self.tok.kind != "op":
            raise ParseError(f"expected {text!r}", self.tok.offset)
        self.advance()

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "end":
            self.fail(self.tok)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            arg = self.unary()
            return Neg(arg) if op == "-" else arg
        return self.power()

    def power(self) -> Expr:
        node = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            node = BinOp("^", node, self.unary())
        return node

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            if tok.text in VARIABLES:
                return Var(tok.text)
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            raise ParseError(f"unknown identifier {tok.text!r}", tok.offset)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.fail(tok)


def parse(source: str) -> Expr:
    """Parse ``source`` into a syntax tree, raising :class:`ParseError`."""
    if not source or not source.strip():
        raise ParseError("empty input", 0)
    return _Parser(source).parse()


class ScalarField:
    """An expression restricted to an ordered set of allowed variables.

    >>> f = ScalarField("sin(x)*t", ("x", "t"))
    >>> f.eval_with_grad({"x": 0.0, "t": 2.0})
    (0.0, array([2., 0.]))
    """

    def __init__(self, expr: Expr | str | float, variables: Sequence[str] = VARIABLES):
        if isinstance(expr, (int, float)):
            expr = Num(float(expr))
        elif isinstance(expr, str):
            expr = parse(expr)
        self.expr = expr
        self.variables = tuple(variables)
        unknown = set(self.variables) - set(VARIABLES)
        if unknown:
            raise ValueError(f"unknown variables {sorted(unknown)}")
        stray = expr.variables() - set(self.variables)
        if stray:
            raise ValueError(
                f"expression {expr.to_source()!r} uses {sorted(stray)}, allowed {list(self.variables)}"
            )

    def __repr__(self):
        return f"ScalarField({self.expr.to_source()!r}, {self.variables})"

    @property
    def is_constant(self) -> bool:
        return not self.expr.variables()

    @property
    def source(self) -> str:
        return self.expr.to_source()

    def _env(self, point: Mapping[str, object]):
        missing = [v for v in self.expr.variables() if v not in point]
        if missing:
            raise KeyError(f"point lacks values for {missing}")
        return point

    def __call__(self, **point):
        return self.evaluate(point)

    def evaluate(self, point: Mapping[str, object]):
        env = self._env(point)
        with np.errstate(all="ignore"):
            value = self.expr.evaluate(env)
        _check(value, self.expr)
        return _broadcast_like(value, point)

    def eval_with_grad(self, point: Mapping[str, object]):
        """Value and gradient; the gradient has one leading entry per allowed variable."""
        env = self._env(point)
        denv = {name: (point[name], i) for i, name in enumerate(self.variables) if name in point}
        with np.errstate(all="ignore"):
            value, grad = self.expr.dual(denv, len(self.variables))
        _check(value, self.expr)
        value = _broadcast_like(value, env)
        shape = np.shape(value)
        out = np.empty((len(self.variables),) + shape)
        for i, d in enumerate(grad):
            out[i] = d
        if not shape:
            value = float(value)
        return value, out


def _broadcast_like(value, point):
    shapes = [np.shape(v) for v in point.values()]
    shape = np.broadcast_shapes(*shapes) if shapes else ()
    if shape == np.shape(value):
        return float(value) if not shape else value
    return np.broadcast_to(value, shape).astype(float)


def eval_with_grad(field: ScalarField, point: Mapping[str, object]):
    """Module-level alias of :meth:`ScalarField.eval_with_grad`."""
    return field.eval_with_grad(point)


def as_field(source, variables: Sequence[str] = VARIABLES) -> ScalarField:
    if isinstance(source, ScalarField):
        return source
    return ScalarField(source, variables)
