"""Data types for the 2+2+2+2 shell ansatz, its sources and generating data."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConfigError
from ..exprkit import Const, Expr, as_expr, parse_expr, variables

COORDS = ("x1", "x2", "y3", "y4", "y5", "y6", "y7", "y8")
KILLING = ("y4", "y6", "y8")
# coordinates a generated ansatz can depend on, in jet order
ANSATZ_VARS = ("x1", "x2", "y3", "y5", "y7")


@dataclass(frozen=True)
class Shell:
    index: int
    v: str  # fiber coordinate the shell's equations integrate along
    pair: tuple  # (h-index of e^v, h-index of the Killing direction)
    base: tuple  # coordinates u^alpha the N-coefficients attach to
    deps: tuple  # allowed dependence of h and N coefficients

    @property
    def names(self):
        return f"h{self.pair[0]}", f"h{self.pair[1]}"


SHELLS = (
    Shell(0, "y3", (3, 4), ("x1", "x2"), ("x1", "x2", "y3")),
    Shell(1, "y5", (5, 6), ("x1", "x2", "y3", "y4"), ("x1", "x2", "y3", "y5")),
    Shell(2, "y7", (7, 8), ("x1", "x2", "y3", "y4", "y5", "y6"), ("x1", "x2", "y3", "y5", "y7")),
)
W_KEYS = ("w_i", "w1_alpha", "w2_alpha")
N_KEYS = ("n_i", "n1_alpha", "n2_alpha")


def _expr(x, path) -> Expr:
    if isinstance(x, str):
        try:
            return parse_expr(x, COORDS)
        except ConfigError as exc:
            raise ConfigError(str(exc), path) from None
    try:
        return as_expr(x)
    except TypeError:
        raise ConfigError(f"expected an expression, got {type(x).__name__}", path) from None


def _zeros(n):
    return tuple(Const(0.0) for _ in range(n))


@dataclass(frozen=True)
class ShellAnsatz:
    """Killing-reduced shell ansatz.

    ``h`` maps 3..8 to fiber coefficients; ``w[s]``, ``n[s]`` hold the
    N-coefficients of shell ``s`` (lengths 2, 4, 6) on that shell's base.
    """

    g1: Expr
    g2: Expr
    h: dict
    w: tuple
    n: tuple

    def __post_init__(self):
        for s, sh in enumerate(SHELLS):
            for key, coeffs in ((W_KEYS[s], self.w[s]), (N_KEYS[s], self.n[s])):
                if len(coeffs) != len(sh.base):
                    raise ConfigError(f"expected {len(sh.base)} coefficients", key)
        self.validate()

    @classmethod
    def build(cls, g1=1.0, g2=1.0, h=None, w=None, n=None) -> "ShellAnsatz":
        """Fill omitted pieces with the flat profile (unit h, zero N)."""
        hh = {a: Const(1.0) for a in range(3, 9)}
        for a, e in (h or {}).items():
            hh[int(a)] = _expr(e, f"h{a}")
        ws, ns = [], []
        for s, sh in enumerate(SHELLS):
            for given, out, key in ((w, ws, W_KEYS[s]), (n, ns, N_KEYS[s])):
                seq = None if given is None else given[s]
                if seq is None:
                    out.append(_zeros(len(sh.base)))
                else:
                    out.append(tuple(_expr(e, f"{key}[{k}]") for k, e in enumerate(seq)))
        return cls(_expr(g1, "g1"), _expr(g2, "g2"), hh, tuple(ws), tuple(ns))

    @classmethod
    def from_config(cls, cfg: dict) -> "ShellAnsatz":
        h = {a: cfg[f"h{a}"] for a in range(3, 9) if f"h{a}" in cfg}
        w = [cfg.get(k) for k in W_KEYS]
        n = [cfg.get(k) for k in N_KEYS]
        for key in W_KEYS + N_KEYS:
            if key in cfg and not isinstance(cfg[key], (list, tuple)):
                raise ConfigError("expected a list of expressions", key)
        return cls.build(cfg.get("g1", 1.0), cfg.get("g2", 1.0), h, w, n)

    def items(self):
        """(name, expression, allowed dependence) for every coefficient."""
        yield "g1", self.g1, ("x1", "x2")
        yield "g2", self.g2, ("x1", "x2")
        for sh in SHELLS:
            for a in sh.pair:
                yield f"h{a}", self.h[a], sh.deps
            for k in range(len(sh.base)):
                yield f"{W_KEYS[sh.index]}[{k}]", self.w[sh.index][k], sh.deps
                yield f"{N_KEYS[sh.index]}[{k}]", self.n[sh.index][k], sh.deps

    def validate(self):
        for name, e, deps in self.items():
            extra = variables(e) - set(deps)
            killing = sorted(extra & set(KILLING))
            if killing:
                raise ConfigError(f"depends on Killing coordinate {killing[0]}", name)
            if extra:
                raise ConfigError(f"may not depend on {sorted(extra)[0]}", name)

    def with_h(self, **h) -> "ShellAnsatz":
        hh = dict(self.h)
        for k, e in h.items():
            hh[int(k.lstrip("h"))] = as_expr(e)
        return replace(self, h=hh)


@dataclass(frozen=True)
class SourceSpec:
    """Diagonal N-adapted sources Upsilon_2, _4, _6, _8 (one per shell pair)."""

    upsilon: dict = field(default_factory=lambda: {k: Const(0.0) for k in (2, 4, 6, 8)})

    def __post_init__(self):
        ups = {int(k): as_expr(v) for k, v in self.upsilon.items()}
        if sorted(ups) != [2, 4, 6, 8]:
            raise ConfigError("need upsilon2, upsilon4, upsilon6 and upsilon8", "sources")
        object.__setattr__(self, "upsilon", ups)

    def _omit(self, k):
        others = [self.upsilon[j] for j in (2, 4, 6, 8) if j != k]
        return others[0] + others[1] + others[2]

    @property
    def h_lambda(self):
        return self._omit(2)

    @property
    def v_lambda(self):
        return self._omit(4)

    @property
    def lambda1(self):
        return self._omit(6)

    @property
    def lambda2(self):
        return self._omit(8)

    def shell_lambda(self, s: int) -> Expr:
        return (self.v_lambda, self.lambda1, self.lambda2)[s]

    @classmethod
    def from_config(cls, cfg: dict) -> "SourceSpec":
        ups = {}
        for k in (2, 4, 6, 8):
            key = f"upsilon{k}"
            e = _expr(cfg.get(key, 0.0), key)
            ups[k] = e
        return cls(ups)


def source_algebra(u2, u4, u6, u8) -> SourceSpec:
    """Sources from the four Upsilon's; each Lambda omits exactly one of them."""
    return SourceSpec({2: u2, 4: u4, 6: u6, 8: u8})


# rows: h, v, 1, 2 Lambdas; columns: Upsilon_2, _4, _6, _8
_LAMBDA_MATRIX = np.ones((4, 4)) - np.eye(4)


def source_inverse(h_lambda, v_lambda, lambda1, lambda2):
    """Upsilon_2, _4, _6, _8 reproducing the given Lambdas.

    Numbers and arrays are solved directly; expressions are combined
    linearly with the inverse matrix.
    """
    lams = (h_lambda, v_lambda, lambda1, lambda2)
    if any(isinstance(x, Expr) for x in lams):
        inv = np.linalg.inv(_LAMBDA_MATRIX)
        lams = [as_expr(x) for x in lams]
        out = []
        for row in inv:
            terms = [float(c) * lam for c, lam in zip(row, lams)]
            acc = terms[0]
            for t in terms[1:]:
                acc = acc + t
            out.append(acc)
        return tuple(out)
    rhs = np.stack(np.broadcast_arrays(*(np.asarray(x, float) for x in lams)))
    sol = np.linalg.solve(_LAMBDA_MATRIX, rhs.reshape(4, -1)).reshape(rhs.shape)
    return tuple(sol[k] if sol[k].ndim else float(sol[k]) for k in range(4))


@dataclass(frozen=True)
class GeneratingData:
    """Generating functions and integration data for the three shells.

    ``phi[s]`` is the generating function of shell ``s``; ``h0[s]`` the
    integration function added to the Killing-direction coefficient;
    ``n0[s]``, ``n1[s]`` the integration functions of the n-coefficients;
    ``lower[s]`` the fixed lower limit of the fiber quadratures;
    ``signs[s]`` the branch sign.  ``eps`` is the sign of g1 = g2 and
    ``psi`` the conformal exponent (derived when omitted and the
    horizontal source is constant).
    """

    phi: tuple
    h0: tuple = (0.0, 0.0, 0.0)
    n0: tuple = (None, None, None)
    n1: tuple = (None, None, None)
    lower: tuple = (0.0, 0.0, 0.0)
    signs: tuple = (1, 1, 1)
    eps: int = 1
    psi: Expr | None = None

    def __post_init__(self):
        if len(self.phi) != 3:
            raise ConfigError("need three generating functions", "phi_hat")
        conv = lambda x, p: _expr(x, p)
        object.__setattr__(self, "phi", tuple(conv(p, f"phi_hat[{s}]") for s, p in enumerate(self.phi)))
        object.__setattr__(self, "h0", tuple(conv(p, f"h0[{s}]") for s, p in enumerate(self.h0)))
        for attr in ("n0", "n1"):
            vals = []
            for s, sh in enumerate(SHELLS):
                seq = getattr(self, attr)[s]
                if seq is None:
                    seq = [0.0] * len(sh.base)
                if len(seq) != len(sh.base):
                    raise ConfigError(f"expected {len(sh.base)} functions", f"{attr}[{s}]")
                vals.append(tuple(conv(e, f"{attr}[{s}][{k}]") for k, e in enumerate(seq)))
            object.__setattr__(self, attr, tuple(vals))
        for s in self.signs:
            if s not in (1, -1):
                raise ConfigError("branch signs must be +1 or -1", "branch_signs")
        if self.eps not in (1, -1):
            raise ConfigError("eps must be +1 or -1", "eps")
        if self.psi is not None:
            object.__setattr__(self, "psi", conv(self.psi, "psi"))
        object.__setattr__(self, "lower", tuple(float(x) for x in self.lower))

    @classmethod
    def from_config(cls, cfg: dict) -> "GeneratingData":
        try:
            phi = (cfg["phi_hat"], cfg.get("phi_hat_1", "y5"), cfg.get("phi_hat_2", "y7"))
        except KeyError:
            raise ConfigError("missing generating function", "phi_hat") from None
        signs = cfg.get("branch_signs", [1, 1, 1])
        if not isinstance(signs, (list, tuple)) or len(signs) != 3:
            raise ConfigError("expected three signs", "branch_signs")
        return cls(
            phi=phi,
            h0=tuple(cfg.get(k, 0.0) for k in ("h4_0", "h6_0", "h8_0")),
            n0=tuple(cfg.get(k) for k in ("n0_i", "n0_1alpha", "n0_2alpha")),
            n1=tuple(cfg.get(k) for k in ("n1_i", "n1_1alpha", "n1_2alpha")),
            lower=tuple(cfg.get(k, 0.0) for k in ("v0", "y5_0", "y7_0")),
            signs=tuple(int(s) for s in signs),
            eps=int(cfg.get("eps", 1)),
            psi=cfg.get("psi"),
        )
