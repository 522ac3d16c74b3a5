from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EvalDomainError, UndeclaredVariableError
from .expr import Binary, Const, Expr, FieldNode, Pow, Unary, Var, variables
from .jet import Jet, jet_space

MAX_ORDER = 6


def batch_point(point) -> dict:
    """Broadcast a name -> value mapping to 1-d arrays of a common length."""
    names = list(point)
    arrays = np.broadcast_arrays(*(np.atleast_1d(np.asarray(point[n], float)) for n in names))
    return {n: a.ravel() if a.ndim > 1 else a for n, a in zip(names, arrays)}


def evaluate(e: Expr, space, point: dict, cache: dict | None = None) -> Jet:
    """Jet of ``e`` in ``space`` at a batch of points.

    ``point`` maps every variable of ``e`` to a 1-d array; all arrays share
    one length.  ``cache`` memoizes shared subtrees and field evaluations.
    """
    if cache is None:
        cache = {}
    n = len(next(iter(point.values()))) if point else 1
    return _eval(e, space, point, cache, n)


def _eval(e, space, point, cache, n):
    key = (id(e), space.names, space.order)
    hit = cache.get(key)
    if hit is not None:
        return hit[1]
    result = _eval_node(e, space, point, cache, n)
    # keep e alive so its id is not reused while cached
    cache[key] = (e, result)
    return result


def _eval_node(e, space, point, cache, n):
    if isinstance(e, Const):
        return Jet.const(space, np.full(n, e.value))
    if isinstance(e, Var):
        if e.name not in point:
            raise UndeclaredVariableError(e.name)
        return Jet.variable(space, e.name, np.broadcast_to(point[e.name], (n,)))
    if isinstance(e, FieldNode):
        return e.field.jet(space, point, cache)
    try:
        if isinstance(e, Unary):
            a = _eval(e.arg, space, point, cache, n)
            if e.op == "neg":
                return -a
            return getattr(a, e.op)()
        if isinstance(e, Pow):
            return _eval(e.base, space, point, cache, n).pow(e.exponent)
        if isinstance(e, Binary):
            a = _eval(e.left, space, point, cache, n)
            b = _eval(e.right, space, point, cache, n)
            if e.op == "add":
                return a + b
            if e.op == "sub":
                return a - b
            if e.op == "mul":
                return a * b
            return a / b
    except EvalDomainError as exc:
        if exc.node is None:
            raise EvalDomainError(str(exc), e) from None
        raise
    raise TypeError(f"not an expression node: {e!r}")


def evaluate_values(e: Expr, point: dict) -> np.ndarray:
    """Plain batched values (order-0 jets)."""
    point = batch_point(point)
    return evaluate(e, jet_space((), 0), point).value


@dataclass(frozen=True)
class PointJet:
    """Value and mixed partials of one expression at one point.

    ``partials`` is keyed by sorted tuples of coordinate names, e.g.
    ``("x1", "y1", "y1")`` for the third partial with respect to x1, y1, y1.
    """

    value: float
    partials: dict

    def partial(self, *names) -> float:
        if not names:
            return self.value
        return self.partials.get(tuple(sorted(names)), 0.0)


def eval_jet(e: Expr, point: dict, order: int = 2, wrt=None) -> PointJet:
    """Value and all mixed partials of ``e`` up to ``order`` at one point."""
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in 0..{MAX_ORDER}")
    missing = sorted(variables(e) - set(point))
    if missing:
        raise UndeclaredVariableError(missing[0])
    wrt = tuple(sorted(variables(e))) if wrt is None else tuple(wrt)
    space = jet_space(wrt, order)
    j = evaluate(e, space, batch_point(point))
    coeffs = j.c[0] * space.factorial
    partials = {}
    for k, m in enumerate(space.monos[1:], start=1):
        key = tuple(sorted(name for name, p in zip(wrt, m) for _ in range(p)))
        partials[key] = float(coeffs[k])
    return PointJet(float(coeffs[0]), partials)
