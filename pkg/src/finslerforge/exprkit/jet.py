"""Truncated multivariate Taylor arithmetic.

A :class:`Jet` stores normalized Taylor coefficients ``c_m = d^m f / m!`` for
every multi-index ``m`` of total degree ``<= order`` over a fixed tuple of
variable names, for a batch of points and an optional tensor shape.  The
coefficient array has shape ``(batch, *tensor, C)``.  Monomials are listed
degree by degree, so the space of order ``k`` is a prefix of the space of
order ``k + 1`` and truncation is a slice.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from ..errors import EvalDomainError, NumericError


def _monomials(n, order):
    out = []
    for deg in range(order + 1):
        # lexicographically descending compositions of deg into n parts
        for combo in itertools.combinations_with_replacement(range(n), deg):
            m = [0] * n
            for v in combo:
                m[v] += 1
            out.append(tuple(m))
    return out


class JetSpace:
    """Monomial bookkeeping for one (names, order) pair; use :func:`jet_space`."""

    def __init__(self, names, order):
        self.names = tuple(names)
        self.order = int(order)
        self.n = len(self.names)
        self.monos = _monomials(self.n, self.order)
        self.index = {m: k for k, m in enumerate(self.monos)}
        self.size = len(self.monos)
        self.degree = np.array([sum(m) for m in self.monos])
        self.factorial = np.array(
            [math.prod(math.factorial(k) for k in m) for m in self.monos], dtype=float
        )
        self._mul = None
        self._deriv = {}

    def var_index(self, name):
        v = self.names.index(name)
        e = [0] * self.n
        e[v] = 1
        return self.index[tuple(e)]

    def sub(self, order):
        return jet_space(self.names, order)

    @property
    def mul_table(self):
        if self._mul is None:
            mono = np.array(self.monos, dtype=np.int64).reshape(self.size, self.n)
            base = self.order + 1
            weights = base ** np.arange(self.n, dtype=np.int64)
            keys = mono @ weights
            key_order = np.argsort(keys)
            # number of monomials of degree <= d
            upto = np.searchsorted(self.degree, np.arange(self.order + 1), side="right")
            ii, jj = [], []
            for i in range(self.size):
                lim = upto[self.order - self.degree[i]]
                ii.append(np.full(lim, i))
                jj.append(np.arange(lim))
            ii, jj = np.concatenate(ii), np.concatenate(jj)
            sk = keys[ii] + keys[jj]
            kk = key_order[np.searchsorted(keys[key_order], sk)]
            perm = np.argsort(kk, kind="stable")
            ii, jj, kk = ii[perm], jj[perm], kk[perm]
            starts = np.searchsorted(kk, np.arange(self.size))
            self._mul = (ii, jj, starts)
        return self._mul

    def deriv_map(self, name):
        """(src indices, factors) mapping order-k coefficients to d/d(name)."""
        if name not in self._deriv:
            v = self.names.index(name)
            target = jet_space(self.names, self.order - 1)
            src, fac = [], []
            for t in target.monos:
                m = list(t)
                m[v] += 1
                src.append(self.index[tuple(m)])
                fac.append(t[v] + 1.0)
            self._deriv[name] = (np.asarray(src, dtype=int), np.asarray(fac))
        return self._deriv[name]

    def mul(self, a, b):
        ii, jj, starts = self.mul_table
        return np.add.reduceat(a[..., ii] * b[..., jj], starts, axis=-1)

    def __repr__(self):
        return f"JetSpace({self.names}, order={self.order})"


@lru_cache(maxsize=None)
def jet_space(names, order) -> JetSpace:
    if order < 0:
        raise NumericError("jet order exhausted by differentiation")
    return JetSpace(tuple(names), order)


def _as_values(x):
    return np.asarray(x, dtype=float)


class Jet:
    """Batched truncated Taylor jet, optionally tensor valued."""

    __array_priority__ = 100
    __slots__ = ("space", "c")

    def __init__(self, space: JetSpace, c):
        self.space = space
        self.c = c

    # construction -----------------------------------------------------
    @classmethod
    def const(cls, space, values):
        values = _as_values(values)
        c = np.zeros(values.shape + (space.size,))
        c[..., 0] = values
        return cls(space, c)

    @classmethod
    def variable(cls, space, name, values):
        j = cls.const(space, values)
        if space.order >= 1 and name in space.names:
            j.c[..., space.var_index(name)] = 1.0
        return j

    @classmethod
    def stack(cls, jets, axis=0):
        order = min(j.order for j in jets)
        jets = [j.truncate(order) for j in jets]
        shape = np.broadcast_shapes(*(j.c.shape[:1] for j in jets))
        cs = [np.broadcast_to(j.c, shape + j.c.shape[1:]) for j in jets]
        return cls(jets[0].space, np.stack(cs, axis=1 + axis if axis >= 0 else axis - 1))

    # basic properties -------------------------------------------------
    @property
    def order(self):
        return self.space.order

    @property
    def value(self):
        return self.c[..., 0]

    @property
    def tshape(self):
        return self.c.shape[1:-1]

    def truncate(self, order):
        if order >= self.order:
            return self
        sp = self.space.sub(order)
        return Jet(sp, self.c[..., : sp.size])

    def coeff(self, multi):
        """Normalized coefficient for an exponent tuple."""
        return self.c[..., self.space.index[tuple(multi)]]

    def partial(self, *names):
        """Ordinary mixed partial derivative values for a list of names."""
        m = [0] * self.space.n
        for nm in names:
            m[self.space.names.index(nm)] += 1
        k = self.space.index[tuple(m)]
        return self.c[..., k] * self.space.factorial[k]

    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.space, self.c[(slice(None),) + key + (slice(None),)])

    def reshape(self, *tshape):
        return Jet(self.space, self.c.reshape(self.c.shape[:1] + tshape + (self.space.size,)))

    def transpose(self, *axes):
        axes = (0,) + tuple(a + 1 for a in axes) + (len(self.tshape) + 1,)
        return Jet(self.space, self.c.transpose(axes))

    @property
    def T(self):
        return self.transpose(*reversed(range(len(self.tshape))))

    # differentiation --------------------------------------------------
    def d(self, name):
        if name not in self.space.names:
            sp = self.space.sub(self.order - 1)
            return Jet(sp, np.zeros(self.c.shape[:-1] + (sp.size,)))
        src, fac = self.space.deriv_map(name)
        return Jet(self.space.sub(self.order - 1), self.c[..., src] * fac)

    def grad(self, names):
        """Stack of first derivatives, new trailing tensor axis."""
        return Jet.stack([self.d(n) for n in names], axis=-1)

    # arithmetic -------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            order = min(self.order, other.order)
            return self.truncate(order), other.truncate(order)
        vals = _as_values(other)
        return self, Jet.const(self.space, vals)

    def __add__(self, other):
        a, b = self._coerce(other)
        return Jet(a.space, a.c + b.c)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self._coerce(other)
        return Jet(a.space, a.c - b.c)

    def __rsub__(self, other):
        a, b = self._coerce(other)
        return Jet(a.space, b.c - a.c)

    def __neg__(self):
        return Jet(self.space, -self.c)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            vals = _as_values(other)
            return Jet(self.space, self.c * vals[..., None])
        a, b = self._coerce(other)
        return Jet(a.space, a.space.mul(a.c, b.c))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / _as_values(other))
        return self * other.recip()

    def __rtruediv__(self, other):
        return self.recip() * other

    def __pow__(self, p):
        return self.pow(p)

    # elementary functions ---------------------------------------------
    def _compose(self, derivs):
        """f(self) from derivs[k] = f^(k)(value), k = 0..order."""
        K = self.order
        du = self.c.copy()
        du[..., 0] = 0.0
        out = np.zeros_like(self.c)
        out[..., 0] = derivs[0]
        power = du
        for k in range(1, K + 1):
            out += (derivs[k] / math.factorial(k))[..., None] * power
            if k < K:
                power = self.space.mul(power, du)
        return Jet(self.space, out)

    def exp(self):
        v = np.exp(self.value)
        return self._compose([v] * (self.order + 1))

    def log(self):
        u = self.value
        if np.any(u <= 0):
            raise EvalDomainError("log of non-positive value")
        ds = [np.log(u)]
        for k in range(1, self.order + 1):
            ds.append((-1.0) ** (k - 1) * math.factorial(k - 1) / u**k)
        return self._compose(ds)

    def sin(self):
        s, c = np.sin(self.value), np.cos(self.value)
        cyc = [s, c, -s, -c]
        return self._compose([cyc[k % 4] for k in range(self.order + 1)])

    def cos(self):
        s, c = np.sin(self.value), np.cos(self.value)
        cyc = [c, -s, -c, s]
        return self._compose([cyc[k % 4] for k in range(self.order + 1)])

    def recip(self):
        if np.any(self.value == 0):
            raise EvalDomainError("division by zero")
        return self._real_pow(-1.0)

    def sqrt(self):
        u = self.value
        if np.any(u < 0):
            raise EvalDomainError("sqrt of negative value")
        if self.order == 0:
            return Jet(self.space, np.sqrt(self.c))
        if np.any(u == 0):
            raise EvalDomainError("sqrt not differentiable at 0")
        return self._real_pow(0.5)

    def pow(self, p):
        p = float(p)
        if p.is_integer():
            n = int(abs(p))
            if p < 0:
                return self.recip().pow(n)
            result = Jet.const(self.space, np.ones(self.c.shape[:-1]))
            base = self
            while n:
                if n & 1:
                    result = result * base
                n >>= 1
                if n:
                    base = base * base
            return result
        u = self.value
        if np.any(u < 0) or (np.any(u == 0) and (p < 0 or self.order > 0)):
            raise EvalDomainError(f"non-integer power {p!r} of non-positive value")
        if self.order == 0:
            return Jet(self.space, self.c**p)
        return self._real_pow(p)

    def _real_pow(self, p):
        u = self.value
        ds, coef = [], 1.0
        for k in range(self.order + 1):
            ds.append(coef * u ** (p - k))
            coef *= p - k
        return self._compose(ds)

    def __repr__(self):
        return f"Jet(order={self.order}, names={self.space.names}, shape={self.c.shape})"


# ----------------------------------------------------------------------
# tensor contractions


def contract(subscripts, a, b):
    """einsum over tensor indices; each operand is a Jet or a plain array.

    Plain arrays carry the batch axis first, like ``Jet.value``.
    """
    ins, out = subscripts.replace(" ", "").split("->")
    sa, sb = ins.split(",")
    if isinstance(a, Jet) and isinstance(b, Jet):
        order = min(a.order, b.order)
        a, b = a.truncate(order), b.truncate(order)
        ii, jj, starts = a.space.mul_table
        r = np.einsum(f"...{sa}P,...{sb}P->...{out}P", a.c[..., ii], b.c[..., jj])
        return Jet(a.space, np.add.reduceat(r, starts, axis=-1))
    if isinstance(a, Jet):
        return Jet(a.space, np.einsum(f"...{sa}P,...{sb}->...{out}P", a.c, _as_values(b)))
    if isinstance(b, Jet):
        return Jet(b.space, np.einsum(f"...{sa},...{sb}P->...{out}P", _as_values(a), b.c))
    return np.einsum(f"...{sa},...{sb}->...{out}", a, b)


def matmul(a, b):
    return contract("ij,jk->ik", a, b)


def matinv(m: Jet, what="matrix") -> Jet:
    """Inverse of a square jet matrix (tensor shape (r, r))."""
    m0 = m.value
    det = np.linalg.det(m0)
    if np.any(np.abs(det) <= 1e-12):
        from ..errors import DegenerateMetricError

        raise DegenerateMetricError(float(det.flat[np.argmin(np.abs(det))]), what)
    inv0 = np.linalg.inv(m0)
    dm = m.c.copy()
    dm[..., 0] = 0.0
    x = -contract("ij,jk->ik", inv0, Jet(m.space, dm))
    result = Jet.const(m.space, inv0)
    term = result
    for _ in range(m.order):
        term = matmul(x, term)
        result = result + term
    return result


def blockdiag(*blocks):
    """Block-diagonal jet matrix from square jet blocks."""
    order = min(b.order for b in blocks)
    blocks = [b.truncate(order) for b in blocks]
    sizes = [b.tshape[0] for b in blocks]
    n = sum(sizes)
    batch = np.broadcast_shapes(*(b.c.shape[:1] for b in blocks))
    c = np.zeros(batch + (n, n, blocks[0].space.size))
    k = 0
    for b, s in zip(blocks, sizes):
        c[:, k : k + s, k : k + s, :] = b.c
        k += s
    return Jet(blocks[0].space, c)
