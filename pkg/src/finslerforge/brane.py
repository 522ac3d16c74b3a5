"""Diagonal trapping profile over y5 and the off-diagonal brane metric assembly."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from .errors import ConfigError, NumericError
from .exprkit import Var, as_expr, eval_jet, evaluate, evaluate_values, jet_space, parse_expr, sqrt
from .solver.ansatz import COORDS, ShellAnsatz

S = Var("y5")
A_BRACKET = (1e-9, 100.0)
A_SCAN = 400


def _phi_expr(eps2, a):
    return sqrt((3 * eps2 + a * S * S) / (3 * eps2 + S * S))


def _phi_curvature(eps, a):
    """d^2 phi / ds^2 at s = eps and its a-derivative."""
    av = Var("a")
    e = sqrt((3 * eps * eps + av * S * S) / (3 * eps * eps + S * S))
    j = eval_jet(e, {"y5": eps, "a": a}, order=3, wrt=("y5", "a"))
    return j.partial("y5", "y5"), j.partial("y5", "y5", "a")


def solve_a(eps: float, xtol: float = 1e-12) -> float:
    """Asymptotic constant making d^2 phi/ds^2 vanish at s = eps.

    Bisection needs a sign change on the bracket.  If the curvature keeps
    one sign it can still touch zero; then its a-derivative changes sign
    there and is bisected instead, and the touching point is accepted only
    if the curvature really vanishes.
    """
    lo, hi = A_BRACKET
    grid = np.linspace(lo, hi, A_SCAN + 1)
    f = np.array([_phi_curvature(eps, a)[0] for a in grid])
    scale = 1.0 / eps**2
    for k in range(A_SCAN):
        if f[k] == 0.0:
            return float(grid[k])
        if f[k] * f[k + 1] < 0:
            return float(bisect(lambda a: _phi_curvature(eps, a)[0], grid[k], grid[k + 1], xtol=xtol))
    g = np.array([_phi_curvature(eps, a)[1] for a in grid])
    for k in range(A_SCAN):
        if g[k] * g[k + 1] < 0:
            a = bisect(lambda a: _phi_curvature(eps, a)[1], grid[k], grid[k + 1], xtol=xtol)
            if abs(_phi_curvature(eps, a)[0]) <= 1e-12 * scale:
                return float(a)
    raise NumericError(
        f"no root of d2phi/ds2 at s=eps for a in ({lo:g}, {hi:g}]: no sign change among {A_SCAN + 1} samples"
    )


@dataclass(frozen=True)
class BraneProfile:
    eps: float
    a: float
    M: float
    Lambda: float
    m: int = 2
    phi0: float = 1.0
    lstar: float = 1.0
    exprs: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not (self.eps > 0 and self.lstar > 0):
            raise ConfigError("eps and lstar must be positive", "brane")
        if int(self.m) != self.m or self.m < 2:
            raise ConfigError("m must be an integer >= 2", "brane.m")
        e2 = self.eps * self.eps
        ss = S * S
        den = 3 * e2 + ss
        m, p0 = float(self.m), float(self.phi0)
        k1 = (
            (2 * p0 * m * (p0 * (m + 2) - 3) / (3 * e2)) * ss * ss
            + 2 * (-2 * p0 * (m * m + 2 * m + 6) + 3 * (m + 3) * (1 + p0 * p0)) * ss
            - 6 * e2 * m * (m - 3 * p0 + 2)
        )
        k2 = (
            (2 * p0 * (m - 1) * (p0 * (m + 2) - 4) / (3 * e2)) * ss * ss
            + 4 * (-p0 * (m * m + m + 10) + 2 * (m + 2) * (1 + p0 * p0)) * ss
            - 6 * e2 * (m - 1) * (m - 4 * p0 + 2)
        )
        mscale = self.M ** (self.m + 2)
        ex = {
            "phi2": (3 * e2 + self.a * ss) / den,
            "lhbar": 9 * e2 * e2 / (den * den),
            # K-bar times M^-(m+2) is Lambda + bracket / den^2
            "K1": mscale * (self.Lambda + k1 / (den * den)),
            "K2": mscale * (self.Lambda + k2 / (den * den)),
        }
        ex["phi"] = sqrt(ex["phi2"])
        ex["hbar"] = (ex["lhbar"] / self.lstar) * (ex["lhbar"] / self.lstar)
        object.__setattr__(self, "exprs", ex)

    @property
    def eps2(self):
        return self.eps * self.eps

    def __call__(self, name: str, s) -> np.ndarray:
        """Closed-form profile quantity ``name`` at y5 = s."""
        s = np.asarray(s, float)
        return evaluate_values(self.exprs[name], {"y5": s}).reshape(s.shape)

    def upsilon(self, s):
        """Source components (Upsilon on the 4-d block, Upsilon^5_5 = Upsilon^6_6)."""
        mscale = self.M ** (-(self.m + 2))
        return self.Lambda - mscale * self("K1", s), self.Lambda - mscale * self("K2", s)


def brane_profile(M: float, Lambda: float, m: int = 2, phi0: float = 1.0, a_mode="solve", a=None, lstar=1.0):
    """Profile with width eps^2 = 40 M^4 / (3 Lambda)."""
    if not (M > 0 and Lambda > 0):
        raise ConfigError("M and Lambda must be positive", "brane")
    eps = float(np.sqrt(40.0 * M**4 / (3.0 * Lambda)))
    if a_mode == "solve":
        a = solve_a(eps)
    elif a_mode == "given":
        if a is None:
            raise ConfigError("a is required when a_mode is 'given'", "brane.a")
        a = float(a)
    else:
        raise ConfigError("a_mode must be 'solve' or 'given'", "brane.a_mode")
    return BraneProfile(eps, a, float(M), float(Lambda), int(m), float(phi0), float(lstar))


@dataclass
class BraneReport:
    y5: np.ndarray
    phi2: np.ndarray
    hbar: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    cons_residual: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(self.cons_residual))

    def rows(self):
        cols = (self.y5, self.phi2, self.hbar, self.K1, self.K2, self.cons_residual)
        return list(zip(*(c.tolist() for c in cols)))


CSV_HEADER = ("y5", "phi2", "hbar", "K1", "K2", "cons_residual")


def brane_sources_and_conservation(p: BraneProfile, s) -> BraneReport:
    """Samples of the profile and sources, plus the reduced conservation residual.

    The residual is |dK1/ds - 4 (K2 - K1) d ln|phi|/ds|, with derivatives
    taken by automatic differentiation of the closed forms.
    """
    s = np.atleast_1d(np.asarray(s, float))
    space = jet_space(("y5",), 1)
    pt = {"y5": s}
    k1 = evaluate(p.exprs["K1"], space, pt)
    k2 = evaluate(p.exprs["K2"], space, pt)
    phi = evaluate(p.exprs["phi"], space, pt)
    dlnphi = phi.partial("y5") / phi.value
    res = np.abs(k1.partial("y5") - 4.0 * (k2.value - k1.value) * dlnphi)
    return BraneReport(s, p("phi2", s), p("hbar", s), k1.value, k2.value, res)


def _vals(e, pt, n):
    return np.broadcast_to(evaluate_values(e, pt), (n,))


def assemble_brane_metric(
    a: ShellAnsatz, p: BraneProfile, point: dict, q=None, signs78=(1, 1), with_h=False
):
    """8x8 coordinate matrices of the off-diagonal brane metric at ``point``.

    The fiber coefficients of shells 1 and 2 are l^2 (hbar/phi^2) q_h with
    ``q`` mapping 5..8 to expressions (default: the ansatz's h5..h8), and
    only the x-components of the shell-1/2 N-coefficients enter.  With
    ``with_h`` the coefficients l (hbar/phi^2) q_h are returned as well.
    """
    if q is None:
        q = {k: a.h[k] for k in range(5, 9)}
    else:
        q = {int(k): parse_expr(v, COORDS) if isinstance(v, str) else as_expr(v) for k, v in q.items()}
    pt = {k: np.atleast_1d(np.asarray(v, float)) for k, v in point.items()}
    n = max(len(v) for v in pt.values())
    pt = {k: np.broadcast_to(v, (n,)) for k, v in pt.items()}
    ratio = p("hbar", pt["y5"]) / p("phi2", pt["y5"])
    g1, g2 = _vals(a.g1, pt, n), _vals(a.g2, pt, n)
    h3, h4 = _vals(a.h[3], pt, n), _vals(a.h[4], pt, n)
    qh = {k: _vals(q[k], pt, n) for k in range(5, 9)}
    H = {k: p.lstar**2 * ratio * qh[k] for k in range(5, 9)}
    H[7] = H[7] * signs78[0]
    H[8] = H[8] * signs78[1]
    diag = np.stack([g1, g2, h3, h4, H[5], H[6], H[7], H[8]], axis=1)
    # rows 2..7 of the frame: e^a = dy^a + N^a_i dx^i
    N = np.zeros((n, 6, 2))
    for row, coeffs in enumerate((a.w[0], a.n[0], a.w[1][:2], a.n[1][:2], a.w[2][:2], a.n[2][:2])):
        for i in range(2):
            N[:, row, i] = _vals(coeffs[i], pt, n)
    E = np.tile(np.eye(8), (n, 1, 1))
    E[:, 2:, :2] = N
    G = np.einsum("bai,ba,baj->bij", E, diag, E)
    if with_h:
        hs = {k: p.lstar * ratio * qh[k] for k in range(5, 9)}
        return G, hs
    return G
