"""Exact solutions of the separated equations from generating functions.

For shell s with fiber coordinate v, generating function phi, source Lambda
and branch sign sigma (with rho = exp(2 phi)):

    h_b   = h_b0 + (sigma/4) * integral of d_v rho / Lambda dv
    h_a   = sigma * (d_v h_b)^2 / (rho h_b)
    w_al  = d_al phi / d_v phi
    n_al  = n0_al + n1_al * integral of sqrt|h_a| / |h_b|^(3/2) dv

where (a, b) is the shell pair (3, 4), (5, 6) or (7, 8).  The horizontal
part is g1 = g2 = eps exp(psi) with eps * Laplacian(psi) = 2 hLambda exp(psi).
"""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError, NumericError
from ..exprkit import (
    Binary, Const, Expr, FieldNode, Pow, Unary, Var, evaluate_values, exp, has_fields, log, variables,
)
from .ansatz import SHELLS, GeneratingData, ShellAnsatz, SourceSpec
from .fields import derivative, integral
from .grid import screen


def substitute(e: Expr, name: str, value: float) -> Expr:
    """Replace the coordinate ``name`` by a constant (fields are not entered)."""
    if isinstance(e, Var):
        return Const(value) if e.name == name else e
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.arg, name, value))
    if isinstance(e, Binary):
        return Binary(e.op, substitute(e.left, name, value), substitute(e.right, name, value))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, name, value), e.exponent)
    if isinstance(e, FieldNode) and name in variables(e):
        raise ValueError("cannot substitute into a numerically defined field")
    return e


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0.0


def _constant(e: Expr):
    if variables(e) or has_fields(e):
        return None
    return float(evaluate_values(e, {"x1": 0.0})[0])


def default_psi(h_lambda: Expr, eps: int) -> Expr:
    """Radial solution of eps * Laplacian(psi) = 2 hLambda exp(psi), constant hLambda."""
    lam = _constant(h_lambda)
    if lam is None:
        raise ConfigError("psi must be given when the horizontal source is not constant", "psi")
    k = eps * lam
    f = 1 - k * (Var("x1") * Var("x1") + Var("x2") * Var("x2"))
    return Const(float(np.log(4.0))) - log(f * f)


class ShellSolution:
    """Generated coefficients of one shell plus the quantities that must not vanish."""

    def __init__(self, sh, phi, lam, h0, n0, n1, lower, sign):
        v = sh.v
        extra = variables(phi) - set(sh.deps)
        if extra:
            raise ConfigError(f"may not depend on {sorted(extra)[0]}", f"phi_hat[{sh.index}]")
        rho = exp(2 * phi)
        rho_v = derivative(rho, v)
        if v in variables(lam) or has_fields(lam):
            growth = integral(rho_v / lam, v, lower)
        else:
            # the antiderivative of d_v rho / Lambda is rho / Lambda when Lambda ignores v
            growth = (rho - substitute(rho, v, lower)) / lam
        self.hb = h0 + (sign / 4.0) * growth
        hb_v = (sign / 4.0) * rho_v / lam
        self.ha = sign * hb_v * hb_v / (rho * self.hb)
        phi_v = derivative(phi, v)
        self.w = tuple(
            derivative(phi, al) / phi_v if al in variables(phi) else Const(0.0) for al in sh.base
        )
        if all(_is_zero(x) for x in n1):
            self.n = tuple(n0)
        else:
            # sqrt|h_a| / |h_b|^(3/2) with h_a inserted: |d_v h_b| / (exp(phi) h_b^2)
            kernel = integral(Pow(hb_v * hb_v, 0.5) / (exp(phi) * self.hb * self.hb), v, lower)
            self.n = tuple(a if _is_zero(b) else a + b * kernel for a, b in zip(n0, n1))
        self.nonzero = [
            (f"d phi_hat[{sh.index}]/d{v}", phi_v),
            (f"Lambda[{sh.index}]", lam),
            (f"h{sh.pair[1]}", self.hb),
        ]


def generate_solution(gd: GeneratingData, s: SourceSpec, grid: dict | None = None) -> ShellAnsatz:
    """Shell ansatz solving the separated equations for sources ``s``.

    When ``grid`` is given, the quantities the construction divides by are
    checked there and a :class:`NumericError` lists the degenerate points.
    """
    psi = gd.psi if gd.psi is not None else default_psi(s.h_lambda, gd.eps)
    if variables(psi) - {"x1", "x2"}:
        raise ConfigError("psi may only depend on x1, x2", "psi")
    g = gd.eps * exp(psi)
    sols = [
        ShellSolution(sh, gd.phi[k], s.shell_lambda(k), gd.h0[k], gd.n0[k], gd.n1[k], gd.lower[k], gd.signs[k])
        for k, sh in enumerate(SHELLS)
    ]
    if grid is not None:
        checks = [q for sol in sols for q in sol.nonzero]
        ok, excluded = screen(checks, grid)
        if not ok.all():
            first = excluded[0]
            raise NumericError(
                f"{len(excluded)} degenerate grid point(s); first at {first['point']}: {first['reason']}"
            )
    h = {}
    for sh, sol in zip(SHELLS, sols):
        h[sh.pair[0]], h[sh.pair[1]] = sol.ha, sol.hb
    return ShellAnsatz(g, g, h, tuple(sol.w for sol in sols), tuple(sol.n for sol in sols))
