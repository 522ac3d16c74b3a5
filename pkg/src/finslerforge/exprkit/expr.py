"""Immutable expression trees over named coordinates.

Nodes compare structurally, so ``parse(to_text(e)) == e`` is a meaningful
round-trip check.  Python operators build trees without simplification.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Union

UNARY_FUNCS = ("neg", "sqrt", "exp", "log", "sin", "cos")
BINARY_OPS = ("add", "sub", "mul", "div")

_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/"}
_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2}


class Expr:
    __slots__ = ()

    def __add__(self, other):
        return Binary("add", self, as_expr(other))

    def __radd__(self, other):
        return Binary("add", as_expr(other), self)

    def __sub__(self, other):
        return Binary("sub", self, as_expr(other))

    def __rsub__(self, other):
        return Binary("sub", as_expr(other), self)

    def __mul__(self, other):
        return Binary("mul", self, as_expr(other))

    def __rmul__(self, other):
        return Binary("mul", as_expr(other), self)

    def __truediv__(self, other):
        return Binary("div", self, as_expr(other))

    def __rtruediv__(self, other):
        return Binary("div", as_expr(other), self)

    def __pow__(self, exponent):
        return Pow(self, float(exponent))

    def __neg__(self):
        return Unary("neg", self)

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, eq=True)
class Unary(Expr):
    op: str
    arg: Expr

    def __post_init__(self):
        if self.op not in UNARY_FUNCS:
            raise ValueError(f"unknown function {self.op!r}")


@dataclass(frozen=True, eq=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ValueError(f"unknown operator {self.op!r}")


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: float

    def __post_init__(self):
        object.__setattr__(self, "exponent", float(self.exponent))


@dataclass(frozen=True, eq=False)
class FieldNode(Expr):
    """Leaf delegating to a numerically defined field (quadratures etc.).

    Not part of the text grammar; compares by identity.
    """

    field: Any
    label: str = "field"


ExprLike = Union[Expr, float, int]


def as_expr(x: ExprLike) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float)):
        return Const(float(x))
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def func(name: str, arg: ExprLike) -> Expr:
    return Unary(name, as_expr(arg))


def sqrt(x):
    return func("sqrt", x)


def exp(x):
    return func("exp", x)


def log(x):
    return func("log", x)


def sin(x):
    return func("sin", x)


def cos(x):
    return func("cos", x)


def variables(e: Expr) -> set:
    """Names of all coordinates ``e`` depends on.

    A FieldNode contributes the names listed in its field's ``variables``.
    """
    out = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, Unary):
            stack.append(node.arg)
        elif isinstance(node, Binary):
            stack.extend((node.left, node.right))
        elif isinstance(node, Pow):
            stack.append(node.base)
        elif isinstance(node, FieldNode):
            out.update(getattr(node.field, "variables", ()))
    return out


def has_fields(e: Expr) -> bool:
    if isinstance(e, FieldNode):
        return True
    if isinstance(e, Unary):
        return has_fields(e.arg)
    if isinstance(e, Binary):
        return has_fields(e.left) or has_fields(e.right)
    if isinstance(e, Pow):
        return has_fields(e.base)
    return False


def _num(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        s = str(int(v))
    else:
        s = repr(float(v))
    return s


def to_text(e: Expr) -> str:
    """Print ``e`` in the input grammar with minimal parentheses."""
    return _print(e, 0)


def _print(e: Expr, ctx: int) -> str:
    if isinstance(e, Const):
        s = _num(e.value)
        return f"({s})" if e.value < 0 or s.startswith("-") else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        return f"{e.op}({_print(e.arg, 0)})"
    if isinstance(e, Pow):
        base = _print(e.base, 3)
        if isinstance(e.base, Pow):
            base = f"({base})"
        return f"{base}^{_num(e.exponent)}"
    if isinstance(e, Binary):
        p = _PREC[e.op]
        left = _print(e.left, p)
        # left-associative: same-precedence right operands need parentheses
        right = _print(e.right, p + 1)
        s = f"{left} {_SYMBOL[e.op]} {right}"
        return f"({s})" if p < ctx else s
    if isinstance(e, FieldNode):
        return f"<{e.label}>"
    raise TypeError(f"not an expression node: {e!r}")


def is_polynomial_degree_le(e: Expr, names, degree: int) -> bool:
    """True if ``e`` is polynomial of total degree <= ``degree`` in ``names``.

    Subexpressions free of ``names`` may be arbitrary.
    """
    d = _poly_degree(e, frozenset(names))
    return d is not None and d <= degree


def _poly_degree(e, names):
    if isinstance(e, Const):
        return 0
    if isinstance(e, Var):
        return 1 if e.name in names else 0
    if isinstance(e, FieldNode):
        return None
    if not (variables(e) & names):
        return 0
    if isinstance(e, Unary):
        return _poly_degree(e.arg, names) if e.op == "neg" else None
    if isinstance(e, Pow):
        d = _poly_degree(e.base, names)
        p = e.exponent
        if d is None or not p.is_integer() or p < 0:
            return None
        return int(d * p)
    if isinstance(e, Binary):
        a = _poly_degree(e.left, names)
        if e.op == "div":
            if variables(e.right) & names:
                return None
            return a
        b = _poly_degree(e.right, names)
        if a is None or b is None:
            return None
        return max(a, b) if e.op in ("add", "sub") else a + b
    return None
