"""Coordinate expressions: parser, printer and evaluators.

Expressions are small immutable ASTs over coordinate variables, named
parameters and univariate functions. Three evaluators are provided:

* :func:`evaluate` gives plain values (scalars or arrays of points),
* :func:`eval_jet2` gives value, gradient and Hessian by truncated Taylor
  arithmetic (exact up to rounding),
* :func:`eval_fd` gives the same triple by 4th-order central differences and
  exists only as a cross-check of the jet backend.

All evaluators accept either a single point of shape ``(n,)`` or a batch of
points of shape ``(P, n)``.

User functions (for instance a numerically integrated profile ``phi(r)``)
are declared at parse time and bound at evaluation time. A bound function
is a callable ``fn(x) -> (value, d1, d2)`` acting elementwise on arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "Expr", "Num", "Pi", "Var", "Param", "Neg", "BinOp", "Call",
    "ExprError", "ExprSyntaxError", "UnknownIdentifierError", "ArityError",
    "DomainError", "Jet2", "BUILTIN_FUNCTIONS",
    "parse", "to_source", "evaluate", "eval_jet2", "eval_fd", "rebind",
    "free_names",
]

UserFunction = Callable[[np.ndarray], tuple]

BUILTIN_FUNCTIONS = (
    "sin", "cos", "tan", "sinh", "cosh", "tanh", "exp", "log", "sqrt", "atan",
)
_MAX_INT_POWER = 64


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class ArityError(ExprError):
    pass


class DomainError(ExprError):
    """Raised when a node is evaluated outside its domain."""

    def __init__(self, node: "Expr", point, reason: str):
        pt = np.asarray(point, dtype=float)
        super().__init__(f"{reason} in {to_source(node)} at point {pt.tolist()}")
        self.node = node
        self.point = pt


# ---------------------------------------------------------------- AST nodes

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Pi:
    pass


@dataclass(frozen=True)
class Var:
    name: str
    index: int


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Pi, Var, Param, Neg, BinOp, Call]


# ------------------------------------------------------------------ parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            off = pos + len(source[pos:]) - len(source[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {source[off]!r}", off)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    # expr   := term (('+'|'-') term)*
    # term   := unary (('*'|'/') unary)*
    # unary  := '-' unary | power
    # power  := atom ('^' unary)?          (right associative)
    # atom   := number | ident | ident '(' args ')' | '(' expr ')'

    def __init__(self, source, coords, params, functions):
        self.tokens = _tokenize(source)
        self.i = 0
        self.coords = {name: k for k, name in enumerate(coords)}
        self.params = set(params)
        self.functions = set(functions)

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, off = self.advance()
        if text != value or kind == "end":
            raise ExprSyntaxError(f"expected {value!r}, found {text or 'end of input'!r}", off)

    def parse(self) -> Expr:
        node = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", off)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, off = self.advance()
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            if self.peek()[:2] == ("op", "("):
                self.advance()
                args = self.args()
                if text not in BUILTIN_FUNCTIONS and text not in self.functions:
                    raise UnknownIdentifierError(text, off)
                if len(args) != 1:
                    raise ArityError(f"{text} takes 1 argument, got {len(args)} (offset {off})")
                return Call(text, args[0])
            if text in BUILTIN_FUNCTIONS or text in self.functions:
                raise ArityError(f"function {text} used without an argument (offset {off})")
            if text == "pi":
                return Pi()
            if text in self.coords:
                return Var(text, self.coords[text])
            if text in self.params:
                return Param(text)
            raise UnknownIdentifierError(text, off)
        if (kind, text) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {text or 'end of input'!r}", off)

    def args(self):
        if self.peek()[:2] == ("op", ")"):
            self.advance()
            return []
        out = [self.expr()]
        while self.peek()[:2] == ("op", ","):
            self.advance()
            out.append(self.expr())
        self.expect(")")
        return out


def parse(source: str, coords: Sequence[str], params: Iterable[str] = (),
          functions: Iterable[str] = ()) -> Expr:
    """Parse ``source`` into an AST.

    ``coords`` fixes the variable order used by the evaluators; ``params``
    are late-bound constants and ``functions`` late-bound univariate
    functions. ``pi`` is reserved.
    """
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    reserved = {"pi", *BUILTIN_FUNCTIONS}
    for name in (*coords, *params, *functions):
        if name in reserved:
            raise ExprError(f"{name!r} is reserved")
    return _Parser(source, tuple(coords), params, functions).parse()


def to_source(e: Expr) -> str:
    """Fully parenthesised source text; ``parse(to_source(e)) == e``."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Pi):
        return "pi"
    if isinstance(e, (Var, Param)):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_source(e.arg)})"
    if isinstance(e, BinOp):
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


def free_names(e: Expr) -> set[str]:
    """Names of all coordinates, parameters and user functions used."""
    if isinstance(e, (Var, Param)):
        return {e.name}
    if isinstance(e, Neg):
        return free_names(e.arg)
    if isinstance(e, BinOp):
        return free_names(e.left) | free_names(e.right)
    if isinstance(e, Call):
        names = free_names(e.arg)
        if e.func not in BUILTIN_FUNCTIONS:
            names.add(e.func)
        return names
    return set()


def rebind(e: Expr, coords: Sequence[str]) -> Expr:
    """Re-index coordinate variables against a new coordinate list."""
    index = {name: k for k, name in enumerate(coords)}
    if isinstance(e, Var):
        if e.name not in index:
            raise UnknownIdentifierError(e.name, -1)
        return Var(e.name, index[e.name])
    if isinstance(e, Neg):
        return Neg(rebind(e.arg, coords))
    if isinstance(e, BinOp):
        return BinOp(e.op, rebind(e.left, coords), rebind(e.right, coords))
    if isinstance(e, Call):
        return Call(e.func, rebind(e.arg, coords))
    return e


def _integer_exponent(e: Expr):
    if isinstance(e, Num) and float(e.value).is_integer() and abs(e.value) <= _MAX_INT_POWER:
        return int(e.value)
    if isinstance(e, Neg):
        k = _integer_exponent(e.arg)
        return None if k is None else -k
    return None


# ------------------------------------------------------------------- Jet2

def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


class Jet2:
    """Second-order truncated Taylor element.

    ``value`` has the batch shape ``B``, ``grad`` shape ``B + (n,)`` and
    ``hess`` shape ``B + (n, n)``. Every operation builds the Hessian from
    symmetric pieces so it stays exactly symmetric.
    """

    __slots__ = ("value", "grad", "hess")

    def __init__(self, value, grad, hess):
        self.value = value
        self.grad = grad
        self.hess = hess

    @classmethod
    def constant(cls, c, batch_shape, n):
        return cls(np.full(batch_shape, float(c)), np.zeros(batch_shape + (n,)),
                   np.zeros(batch_shape + (n, n)))

    @classmethod
    def variable(cls, points, k):
        pts = np.asarray(points, dtype=float)
        n = pts.shape[-1]
        grad = np.zeros(pts.shape)
        grad[..., k] = 1.0
        return cls(pts[..., k].copy(), grad, np.zeros(pts.shape + (n,)))

    @property
    def n(self):
        return self.grad.shape[-1]

    def compose(self, f0, f1, f2):
        """Chain rule for a scalar function with derivatives f0, f1, f2 at value."""
        return Jet2(f0, f1[..., None] * self.grad,
                    f1[..., None, None] * self.hess + f2[..., None, None] * _outer(self.grad, self.grad))

    def __neg__(self):
        return Jet2(-self.value, -self.grad, -self.hess)

    def __add__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.value + other, self.grad, self.hess)
        return Jet2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.value * other, self.grad * other, self.hess * other)
        a, b = self, other
        va, vb = a.value[..., None], b.value[..., None]
        return Jet2(a.value * b.value, a.grad * vb + va * b.grad,
                    a.hess * vb[..., None] + va[..., None] * b.hess
                    + (_outer(a.grad, b.grad) + _outer(b.grad, a.grad)))

    __rmul__ = __mul__

    def reciprocal(self):
        v = self.value
        return self.compose(1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def __truediv__(self, other):
        if not isinstance(other, Jet2):
            return self * (1.0 / other)
        return self * other.reciprocal()

    def __repr__(self):
        return f"Jet2(value={self.value!r}, grad={self.grad!r}, hess={self.hess!r})"


# -------------------------------------------------------------- evaluators

def _fail_where(node, bad, points, reason):
    if np.any(bad):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            raise DomainError(node, pts, reason)
        idx = np.argwhere(np.broadcast_to(bad, pts.shape[:-1]))[0]
        raise DomainError(node, pts[tuple(idx)], reason)


class _Evaluator:
    """Shared recursive walk; ``self.lift`` chooses values or jets."""

    def __init__(self, points, params, functions, jets):
        self.points = np.asarray(points, dtype=float)
        self.params = dict(params or {})
        self.functions = dict(functions or {})
        self.jets = jets
        self.batch = self.points.shape[:-1]
        self.n = self.points.shape[-1]

    def value_of(self, x):
        return x.value if self.jets else x

    def const(self, c):
        if self.jets:
            return Jet2.constant(c, self.batch, self.n)
        return np.full(self.batch, float(c))

    def check(self, node, bad, reason):
        _fail_where(node, bad, self.points, reason)

    def run(self, e):
        out = self.walk(e)
        v = self.value_of(out)
        self.check(e, ~np.isfinite(v), "non-finite result")
        if self.jets:
            self.check(e, ~np.all(np.isfinite(out.hess), axis=(-1, -2)), "non-finite derivative")
        return out

    def walk(self, e):
        if isinstance(e, Num):
            return self.const(e.value)
        if isinstance(e, Pi):
            return self.const(math.pi)
        if isinstance(e, Var):
            if e.index >= self.n:
                raise ExprError(f"variable {e.name} index {e.index} outside point dimension {self.n}")
            if self.jets:
                return Jet2.variable(self.points, e.index)
            return self.points[..., e.index].copy()
        if isinstance(e, Param):
            if e.name not in self.params:
                raise ExprError(f"no value bound for parameter {e.name!r}")
            return self.const(self.params[e.name])
        if isinstance(e, Neg):
            return -self.walk(e.arg)
        if isinstance(e, BinOp):
            return self.binop(e)
        if isinstance(e, Call):
            return self.call(e)
        raise TypeError(f"not an expression node: {e!r}")

    def binop(self, e):
        if e.op == "^":
            return self.power(e)
        a = self.walk(e.left)
        b = self.walk(e.right)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            self.check(e, self.value_of(b) == 0.0, "division by zero")
            return a / b
        raise ExprError(f"unknown operator {e.op!r}")

    def power(self, e):
        base = self.walk(e.left)
        k = _integer_exponent(e.right)
        if k is not None:
            if k < 0:
                self.check(e, self.value_of(base) == 0.0, "zero raised to a negative power")
            return self._int_power(base, k)
        expo = self.walk(e.right)
        self.check(e, ~(self.value_of(base) > 0.0), "non-integer power of a non-positive base")
        if self.jets:
            return self._exp(expo * self._log(base))
        return np.power(base, expo)

    def _int_power(self, base, k):
        if k == 0:
            return self.const(1.0)
        if k < 0:
            inv = base.reciprocal() if self.jets else 1.0 / base
            return self._int_power(inv, -k)
        result = None
        sq = base
        while k:
            if k & 1:
                result = sq if result is None else result * sq
            k >>= 1
            if k:
                sq = sq * sq
        return result

    def _exp(self, u):
        ev = np.exp(u.value)
        return u.compose(ev, ev, ev)

    def _log(self, u):
        v = u.value
        return u.compose(np.log(v), 1.0 / v, -1.0 / v**2)

    def call(self, e):
        u = self.walk(e.arg)
        v = self.value_of(u)
        name = e.func
        if name not in BUILTIN_FUNCTIONS:
            if name not in self.functions:
                raise ExprError(f"no implementation bound for function {name!r}")
            f0, f1, f2 = (np.asarray(a, dtype=float) for a in self.functions[name](v))
            self.check(e, ~np.isfinite(f0), "user function outside its domain")
            return u.compose(f0, f1, f2) if self.jets else f0
        if name in ("log", "sqrt"):
            self.check(e, ~(v > 0.0), f"{name} of a non-positive argument")
        if name == "tan":
            # pole up to rounding of the argument
            self.check(e, np.abs(np.cos(v)) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(v)),
                       "tan at a pole")
        if not self.jets:
            return getattr(np, "arctan" if name == "atan" else name)(v)
        if name == "sin":
            s, c = np.sin(v), np.cos(v)
            return u.compose(s, c, -s)
        if name == "cos":
            s, c = np.sin(v), np.cos(v)
            return u.compose(c, -s, -c)
        if name == "tan":
            t = np.tan(v)
            sec2 = 1.0 + t * t
            return u.compose(t, sec2, 2.0 * t * sec2)
        if name == "sinh":
            return u.compose(np.sinh(v), np.cosh(v), np.sinh(v))
        if name == "cosh":
            return u.compose(np.cosh(v), np.sinh(v), np.cosh(v))
        if name == "tanh":
            t = np.tanh(v)
            d = 1.0 - t * t
            return u.compose(t, d, -2.0 * t * d)
        if name == "exp":
            return self._exp(u)
        if name == "log":
            return self._log(u)
        if name == "sqrt":
            s = np.sqrt(v)
            return u.compose(s, 0.5 / s, -0.25 / (s * v))
        if name == "atan":
            d = 1.0 / (1.0 + v * v)
            return u.compose(np.arctan(v), d, -2.0 * v * d * d)
        raise ExprError(f"unknown function {name!r}")


def evaluate(e: Expr, points, params: Mapping[str, float] | None = None,
             functions: Mapping[str, UserFunction] | None = None) -> np.ndarray:
    """Plain value of ``e`` at a point ``(n,)`` or batch of points ``(..., n)``."""
    return _Evaluator(points, params, functions, jets=False).run(e)


def eval_jet2(e: Expr, points, params: Mapping[str, float] | None = None,
              functions: Mapping[str, UserFunction] | None = None) -> Jet2:
    """Value, gradient and Hessian of ``e`` by jet arithmetic."""
    return _Evaluator(points, params, functions, jets=True).run(e)


def fd_step(points) -> np.ndarray:
    """Default per-coordinate step: 1e-4 * (1 + |x_i|)."""
    return 1e-4 * (1.0 + np.abs(np.asarray(points, dtype=float)))


_D1_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])
_D1_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
_D2_OFFSETS = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
_D2_WEIGHTS = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def fd_stencil(points, h=None):
    """Stencil points and a combiner turning their values into (value, grad, hess).

    Returns ``(stencil, combine)`` where ``stencil`` has shape
    ``batch + (S, n)`` and ``combine(values)`` takes ``batch + (S,)`` values.
    """
    x = np.asarray(points, dtype=float)
    n = x.shape[-1]
    hh = fd_step(x) if h is None else np.broadcast_to(np.asarray(h, dtype=float), x.shape)
    if np.any(hh <= 0.0):
        raise ValueError("finite-difference step must be positive")
    offs = [np.zeros(n)]
    index = {}

    def slot(key, vec):
        if key not in index:
            index[key] = len(offs)
            offs.append(vec)
        return index[key]

    for i in range(n):
        for a in (-2, -1, 1, 2):
            v = np.zeros(n)
            v[i] = a
            slot((i, a, None, 0), v)
    for i in range(n):
        for j in range(i + 1, n):
            for a in (-2, -1, 1, 2):
                for b in (-2, -1, 1, 2):
                    v = np.zeros(n)
                    v[i], v[j] = a, b
                    slot((i, a, j, b), v)
    offsets = np.array(offs)  # (S, n)
    stencil = x[..., None, :] + offsets * hh[..., None, :]

    def combine(vals):
        vals = np.asarray(vals, dtype=float)
        batch = vals.shape[:-1]
        f0 = vals[..., 0]
        grad = np.zeros(batch + (n,))
        hess = np.zeros(batch + (n, n))
        for i in range(n):
            hi = hh[..., i]
            for a, w in zip(_D1_OFFSETS, _D1_WEIGHTS):
                grad[..., i] += w * vals[..., index[(i, int(a), None, 0)]]
            grad[..., i] /= hi
            acc = np.zeros(batch)
            for a, w in zip(_D2_OFFSETS, _D2_WEIGHTS):
                k = 0 if a == 0 else index[(i, int(a), None, 0)]
                acc = acc + w * vals[..., k]
            hess[..., i, i] = acc / hi**2
        for i in range(n):
            for j in range(i + 1, n):
                acc = np.zeros(batch)
                for a, wa in zip(_D1_OFFSETS, _D1_WEIGHTS):
                    for b, wb in zip(_D1_OFFSETS, _D1_WEIGHTS):
                        acc = acc + wa * wb * vals[..., index[(i, int(a), j, int(b))]]
                hess[..., i, j] = hess[..., j, i] = acc / (hh[..., i] * hh[..., j])
        return Jet2(f0, grad, hess)

    return stencil, combine


def eval_fd(e: Expr, points, h=None, params: Mapping[str, float] | None = None,
            functions: Mapping[str, UserFunction] | None = None) -> Jet2:
    """Value, gradient and Hessian of ``e`` by 4th-order central differences."""
    stencil, combine = fd_stencil(points, h)
    return combine(evaluate(e, stencil, params, functions))
