"""Numerically defined expression leaves: fiber antiderivatives and derivatives.

Both plug into :func:`finslerforge.exprkit.evaluate` through ``FieldNode`` and
return full jets, so generated coefficients can be differentiated like any
other expression.
"""
from __future__ import annotations

import numpy as np
from functools import lru_cache

from numpy.polynomial import chebyshev as C

from ..errors import NumericError, UndeclaredVariableError
from ..exprkit import Binary, Expr, FieldNode, Jet, Pow, Unary, as_expr, evaluate, jet_space, variables

QUAD_TOL = 1e-10
MAX_DEPTH = 50
MAX_ACTIVE = 200_000


def adaptive_simpson(fn, a, b, tol=QUAD_TOL, max_depth=MAX_DEPTH):
    """Vectorized adaptive Simpson rule for many independent 1-d integrals.

    ``fn(t, idx)`` returns an array of shape (len(t), S): the integrand of
    problem ``idx[k]`` at abscissa ``t[k]``.  Each problem gets its own
    interval ``[a[k], b[k]]`` and absolute tolerance ``tol`` (max-norm over
    the S components).  Returns shape (len(a), S).
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    nprob = len(a)
    idx = np.arange(nprob)
    budget = max(MAX_ACTIVE, 64 * nprob)

    def sample(t, i):
        f = fn(t, i)
        bad = ~np.all(np.isfinite(f), axis=1)
        if bad.any():
            raise NumericError(f"integrand is not finite at abscissa {t[bad][0]!r}")
        return f

    m = 0.5 * (a + b)
    f = sample(np.concatenate([a, m, b]), np.concatenate([idx, idx, idx]))
    fa, fm, fb = f[:nprob], f[nprob : 2 * nprob], f[2 * nprob :]
    whole = ((b - a) / 6.0)[:, None] * (fa + 4.0 * fm + fb)
    total = np.zeros_like(whole)
    eps = np.full(nprob, float(tol))

    for depth in range(max_depth + 1):
        if len(idx) == 0:
            return total
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        k = len(idx)
        if k > budget:
            # a non-integrable spot keeps splitting without converging
            raise NumericError(
                f"adaptive quadrature needs more than {budget} subintervals; the integrand is likely singular"
            )
        f = sample(np.concatenate([lm, rm]), np.concatenate([idx, idx]))
        flm, frm = f[:k], f[k:]
        left = ((m - a) / 6.0)[:, None] * (fa + 4.0 * flm + fm)
        right = ((b - m) / 6.0)[:, None] * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        done = np.max(np.abs(delta), axis=1) <= 15.0 * eps
        if depth == max_depth and not done.all():
            raise NumericError(
                f"adaptive quadrature did not reach tolerance {tol:g} after {max_depth} bisections"
            )
        np.add.at(total, idx[done], (left + right + delta / 15.0)[done])
        keep = ~done
        idx = np.concatenate([idx[keep], idx[keep]])
        a, b = np.concatenate([a[keep], m[keep]]), np.concatenate([m[keep], b[keep]])
        fa, fm, fb = (
            np.concatenate([fa[keep], fm[keep]]),
            np.concatenate([flm[keep], frm[keep]]),
            np.concatenate([fm[keep], fb[keep]]),
        )
        whole = np.concatenate([left[keep], right[keep]])
        eps = np.concatenate([eps[keep], eps[keep]]) * 0.5
    return total


def _embed(src: Jet, space) -> Jet:
    """Place the coefficients of ``src`` into ``space`` (a superset of names).

    Monomials involving names absent from ``src`` get zero coefficients.
    """
    out = np.zeros(src.c.shape[:-1] + (space.size,))
    pos = [space.names.index(n) for n in src.space.names]
    for k, mono in enumerate(src.space.monos):
        if sum(mono) > space.order:
            continue
        full = [0] * space.n
        for p, e in zip(pos, mono):
            full[p] = e
        out[..., space.index[tuple(full)]] = src.c[..., k]
    return Jet(space, out)


def _project(src: Jet, space) -> Jet:
    """Keep the monomials of ``src`` that live in ``space`` (a subset of names)."""
    pos = [src.space.names.index(n) for n in space.names]
    take = []
    for mono in space.monos:
        full = [0] * src.space.n
        for p, e in zip(pos, mono):
            full[p] = e
        take.append(src.space.index[tuple(full)])
    return Jet(space, src.c[..., take])


def _nested_antiderivatives(e, var, lower):
    """Antiderivative nodes along the same fiber line inside ``e``, innermost first."""
    found, seen = [], set()

    def walk(node):
        if isinstance(node, Unary):
            walk(node.arg)
        elif isinstance(node, Binary):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, Pow):
            walk(node.base)
        elif isinstance(node, FieldNode) and isinstance(node.field, Antiderivative):
            f = node.field
            if f.var == var and f.lower == lower and id(node) not in seen:
                walk(f.integrand)
                seen.add(id(node))
                found.append(node)

    walk(e)
    return found


class Antiderivative:
    """F(u, v) = integral of ``integrand`` over v' from ``lower`` to v.

    Taylor coefficients with a positive power of v come straight from the
    integrand's jet; the remaining ones are integrated coefficient-wise along
    v.  A lone integral uses adaptive Simpson.  When the integrand itself
    contains antiderivatives along the same line, all of them are advanced
    together as one initial value problem instead of re-integrating the
    inner ones at every abscissa.
    """

    def __init__(self, integrand, var: str, lower: float, tol: float = QUAD_TOL):
        self.integrand = as_expr(integrand)
        self.var = var
        self.lower = float(lower)
        self.tol = float(tol)
        self.variables = frozenset(variables(self.integrand) | {var})
        self.inner = _nested_antiderivatives(self.integrand, var, self.lower)

    def node(self, label="antiderivative") -> FieldNode:
        return FieldNode(self, label)

    def jet(self, space, point, cache) -> Jet:
        v = self.var
        if v not in point:
            raise UndeclaredVariableError(v)
        n = len(next(iter(point.values())))
        # coordinates the integrand ignores only add zero coefficients
        sub = jet_space(
            tuple(x for x in space.names if x != v and x in self.variables), space.order
        )
        base_pt = {k: np.broadcast_to(val, (n,)) for k, val in point.items()}
        vv = np.broadcast_to(base_pt[v], (n,))
        if self.inner:
            flat = self._coupled(sub, base_pt, vv)
        else:

            def fn(t, idx):
                pt = {k: val[idx] for k, val in base_pt.items()}
                pt[v] = t
                return evaluate(self.integrand, sub, pt).c

            flat = adaptive_simpson(fn, np.full(n, self.lower), vv, self.tol)
        out = _embed(Jet(sub, flat), space).c
        if v in space.names and space.order >= 1:
            f = evaluate(self.integrand, jet_space(space.names, space.order - 1), point, cache)
            iv = space.names.index(v)
            for k, mono in enumerate(f.space.monos):
                up = list(mono)
                up[iv] += 1
                out[..., space.index[tuple(up)]] = f.c[..., k] / up[iv]
        return Jet(space, out)

    def _coupled(self, sub, base_pt, vv):
        """Integrate this node and its same-line inner nodes together.

        All integrands are sampled on Chebyshev points of the whole fiber
        segment; inner antiderivatives come from the spectral integration
        matrix at those same points.  The point count doubles until the
        result changes by less than the tolerance.
        """
        nodes = self.inner
        n, S = len(vv), sub.size
        span = vv - self.lower
        previous = None
        for N in CHEB_SIZES:
            x, Q = _cheb_integration(N)
            t = 0.5 * (x + 1.0)
            pt = {k: np.repeat(val, N + 1) for k, val in base_pt.items()}
            pt[self.var] = self.lower + np.repeat(span, N + 1) * np.tile(t, n)
            cache = {}
            for nd in nodes + [None]:
                e = self.integrand if nd is None else nd.field.integrand
                with np.errstate(all="ignore"):
                    f = evaluate(e, sub, pt, cache).c.reshape(n, N + 1, S)
                F = np.einsum("jk,bks->bjs", Q, f) * (0.5 * span)[:, None, None]
                if nd is not None:
                    cache[(id(nd), sub.names, sub.order)] = (nd, Jet(sub, F.reshape(n * (N + 1), S)))
            result = F[:, 0, :]  # x = 1 is the first Chebyshev point
            if not np.all(np.isfinite(result)):
                raise NumericError("fiber integrand is not finite on the integration segment")
            if previous is not None and np.max(np.abs(result - previous)) <= self.tol:
                return result
            previous = result
        raise NumericError(
            f"nested fiber integral did not reach tolerance {self.tol:g} with {CHEB_SIZES[-1]} points"
        )


CHEB_SIZES = (16, 32, 64, 128, 256)


@lru_cache(maxsize=None)
def _cheb_integration(N):
    """Chebyshev points x_j = cos(pi j / N) and the matrix of integrals from -1 to x_j."""
    x = np.cos(np.pi * np.arange(N + 1) / N)
    V = C.chebvander(x, N)
    anti = np.stack([C.chebval(x, C.chebint(np.eye(N + 1)[k], lbnd=-1)) for k in range(N + 1)], axis=1)
    return x, anti @ np.linalg.inv(V)


class DerivField:
    """Partial derivative of an expression with respect to one coordinate."""

    def __init__(self, inner, var: str):
        self.inner = as_expr(inner)
        self.var = var
        self.variables = frozenset(variables(self.inner))

    def node(self, label=None) -> FieldNode:
        return FieldNode(self, label or f"d/d{self.var}")

    def jet(self, space, point, cache) -> Jet:
        names = space.names if self.var in space.names else space.names + (self.var,)
        up = jet_space(names, space.order + 1)
        d = evaluate(self.inner, up, point, cache).d(self.var)
        return d if names == space.names else _project(d, space)


def integral(integrand, var, lower, tol=QUAD_TOL) -> Expr:
    """Expression for the fiber antiderivative of ``integrand`` from ``lower``."""
    return Antiderivative(integrand, var, lower, tol).node(f"int d{var}")


def derivative(e, var) -> Expr:
    """Expression for the partial derivative of ``e`` with respect to ``var``."""
    return DerivField(e, var).node()
