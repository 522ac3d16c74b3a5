"""Finsler objects generated by F^2: Hessian metric, spray, N-connection.

Also holds the N-adapted metric record (:class:`DMetric`) shared by the
connection, curvature and solver modules.  Internally every routine works on
batches of points; the public functions accept a mapping ``name -> value``
where values may be scalars (single point) or 1-d arrays (batch).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateMetricError, EvalDomainError, NumericError
from .exprkit import (
    Chart,
    Const,
    Expr,
    Jet,
    Pow,
    Var,
    batch_point,
    contract,
    evaluate,
    is_polynomial_degree_le,
    jet_space,
    matinv,
    parse_expr,
)

DET_TOL = 1e-12


# ----------------------------------------------------------------------
# point handling


def prepare_point(point, coords):
    """Batch a point mapping; returns (batched mapping, was_scalar)."""
    missing = [c for c in coords if c not in point]
    if missing:
        raise ConfigError(f"point lacks coordinate {missing[0]!r}", "point")
    scalar = all(np.ndim(point[c]) == 0 for c in coords)
    return batch_point({c: point[c] for c in coords}), scalar


def finish(x, scalar):
    return x[0] if scalar else x


def check_det(m, what):
    det = np.linalg.det(m)
    bad = np.abs(det) <= DET_TOL
    if np.any(bad):
        raise DegenerateMetricError(float(det[bad].flat[0]), what)
    return det


def _reject_zero_section(F2, fiber, point):
    if is_polynomial_degree_le(F2, fiber, 2):
        return
    norm = sum(np.abs(point[y]) for y in fiber)
    if np.any(norm == 0):
        raise EvalDomainError("fiber point y = 0 on the zero section of a non-quadratic F")


# ----------------------------------------------------------------------
# Finsler jets


@dataclass
class FinslerJets:
    L: Jet
    g: Jet  # (n, n), g[i, j]
    G: Jet  # (n,)
    N: Jet  # (n, n), N[a, j] = dG^a / dy^j


def finsler_jets(F2: Expr, chart: Chart, point: dict, order: int) -> FinslerJets:
    """Jets of L, g, G, N with N valid to ``order`` (L evaluated to order + 3)."""
    base, fiber = chart.base, chart.fiber
    if len(base) != len(fiber):
        raise ConfigError("Finsler charts need equally many base and fiber coordinates", "chart")
    _reject_zero_section(F2, fiber, point)
    K = order + 3
    space = jet_space(chart.coords, K)
    L = evaluate(F2, space, point)
    Ly = [L.d(y) for y in fiber]
    g = Jet.stack([Jet.stack([0.5 * Ly[j].d(y) for y in fiber]) for j in range(len(fiber))])
    check_det(g.value, "Hessian")
    b = []
    for j in range(len(fiber)):
        acc = -L.d(base[j]).truncate(K - 2)
        for i, yi in enumerate(fiber):
            yvar = Jet.variable(space.sub(K - 2), yi, point[yi])
            acc = acc + yvar * Ly[j].d(base[i])
        b.append(acc)
    b = Jet.stack(b)
    G = 0.25 * contract("kj,j->k", matinv(g, "Hessian"), b)
    N = Jet.stack([Jet.stack([G[a].d(y) for y in fiber]) for a in range(len(fiber))])
    return FinslerJets(L, g, G, N)


def hessian_metric(F2: Expr, point: dict, chart: Chart | None = None) -> np.ndarray:
    """Fiber Hessian g_ij = (1/2) d^2 F^2 / dy^i dy^j."""
    chart = chart or Chart.tangent_bundle()
    pt, scalar = prepare_point(point, chart.coords)
    _reject_zero_section(F2, chart.fiber, pt)
    L = evaluate(F2, jet_space(chart.fiber, 2), pt)
    g = np.array([[0.5 * L.partial(a, b) for b in chart.fiber] for a in chart.fiber])
    g = np.moveaxis(g, -1, 0)
    check_det(g, "Hessian")
    return finish(g, scalar)


@dataclass(frozen=True)
class SprayData:
    G: np.ndarray  # G^k
    N: np.ndarray  # N[a, j] = N^a_j


def semi_spray_and_nconnection(F2: Expr, point: dict, chart: Chart | None = None) -> SprayData:
    chart = chart or Chart.tangent_bundle()
    pt, scalar = prepare_point(point, chart.coords)
    fj = finsler_jets(F2, chart, pt, 0)
    return SprayData(finish(fj.G.value, scalar), finish(fj.N.value, scalar))


def spray_values(F2: Expr, chart: Chart, point: dict) -> np.ndarray:
    """G^k only (second derivatives of L suffice)."""
    fiber, base = chart.fiber, chart.base
    _reject_zero_section(F2, fiber, point)
    L = evaluate(F2, jet_space(chart.coords, 2), point)
    g = np.array([[0.5 * L.partial(a, b) for b in fiber] for a in fiber])
    g = np.moveaxis(g, -1, 0)
    check_det(g, "Hessian")
    b = np.stack(
        [
            sum(point[yi] * L.partial(yj, xi) for xi, yi in zip(base, fiber)) - L.partial(xj)
            for xj, yj in zip(base, fiber)
        ],
        axis=-1,
    )
    return 0.25 * np.linalg.solve(g, b[..., None])[..., 0]


# ----------------------------------------------------------------------
# d-metrics


class DMetric:
    """N-adapted metric g_ij e^i e^j + l^2 h_ab e^a e^b with N^a_i.

    Subclasses provide :meth:`raw_blocks`.  ``absorb_lstar`` treats the
    length constant as already contained in ``h``.
    """

    def __init__(self, chart: Chart, lstar: float = 1.0, absorb_lstar: bool = False):
        if not lstar > 0:
            raise ConfigError("length constant must be positive", "lstar")
        self.chart = chart
        self.lstar = float(lstar)
        self.absorb_lstar = bool(absorb_lstar)
        self.signature = None

    @property
    def n(self):
        return len(self.chart.base)

    @property
    def m(self):
        return len(self.chart.fiber)

    @property
    def ell2(self):
        return 1.0 if self.absorb_lstar else self.lstar**2

    def raw_blocks(self, point, order):
        raise NotImplementedError

    def blocks(self, point: dict, order: int):
        """Jets (g, h_eff, N) valid to ``order``; h_eff includes the l^2 factor.

        g has tensor shape (n, n), h_eff (m, m), N (m, n) with N[a, i] = N^a_i.
        """
        g, h, N = self.raw_blocks(point, order)
        g, h, N = (x.truncate(order) for x in (g, h, N))
        check_det(g.value, "h-metric")
        check_det(h.value, "v-metric")
        self._record_signature(g.value)
        return g, h * self.ell2, N

    def _record_signature(self, g0):
        eig = np.linalg.eigvalsh(0.5 * (g0 + np.swapaxes(g0, -1, -2)))
        sig = {int(k) for k in (eig < 0).sum(axis=-1)}
        if len(sig) > 1 or (self.signature is not None and sig != {self.signature}):
            raise NumericError("signature of the h-metric changed between evaluated points")
        self.signature = sig.pop()


def _expr_grid(rows, chart, what):
    out = []
    for row in rows:
        out.append([parse_expr(x, chart) if isinstance(x, str) else _as_expr(x) for x in row])
    return out


def _as_expr(x):
    if isinstance(x, Expr):
        return x
    return Const(float(x))


def _stack_exprs(grid, space, point, cache):
    return Jet.stack([Jet.stack([evaluate(e, space, point, cache) for e in row]) for row in grid])


class ExprDMetric(DMetric):
    """d-metric with g, h and N given by expressions (strings are parsed)."""

    def __init__(self, chart, g, h, N, lstar=1.0, absorb_lstar=False):
        super().__init__(chart, lstar, absorb_lstar)
        self.g = _expr_grid(g, chart, "g")
        self.h = _expr_grid(h, chart, "h")
        self.N = _expr_grid(N, chart, "N")
        n, m = self.n, self.m
        shapes = [(self.g, n, n, "g"), (self.h, m, m, "h"), (self.N, m, n, "N")]
        for grid, r, c, what in shapes:
            if len(grid) != r or any(len(row) != c for row in grid):
                raise ConfigError(f"expected a {r}x{c} matrix", what)

    def raw_blocks(self, point, order):
        space = jet_space(self.chart.coords, order)
        cache = {}
        return tuple(_stack_exprs(x, space, point, cache) for x in (self.g, self.h, self.N))


class FinslerDMetric(DMetric):
    """Sasaki-type d-metric of F: h = g = Hessian, canonical N."""

    def __init__(self, F2, chart=None, lstar=1.0, absorb_lstar=False):
        chart = chart or Chart.tangent_bundle()
        super().__init__(chart, lstar, absorb_lstar)
        self.F2 = parse_expr(F2, chart) if isinstance(F2, str) else F2

    def raw_blocks(self, point, order):
        fj = finsler_jets(self.F2, self.chart, point, order)
        g = fj.g.truncate(order)
        return g, g, fj.N


# ----------------------------------------------------------------------
# adapted frames


def adapted_derivative(f: Jet, alpha: int, N: Jet, chart: Chart) -> Jet:
    """e_alpha f with e_i = d_i - N^a_i d_a and e_a = d_a."""
    n = len(chart.base)
    if alpha >= n:
        return f.d(chart.fiber[alpha - n])
    out = f.d(chart.base[alpha])
    sub = "".join("ijklmnop"[: len(f.tshape)])
    for a, y in enumerate(chart.fiber):
        out = out - contract(f",{sub}->{sub}", N[a, alpha], f.d(y))
    return out


@dataclass(frozen=True)
class FrameData:
    W: np.ndarray  # W[c, a, b]: [e_a, e_b] = W^c_ab e_c
    Omega: np.ndarray  # Omega[a, i, j]


def anholonomy_jets(N: Jet, chart: Chart):
    """W^c_ab and Omega^a_ij as jets (one order below N)."""
    n, m = len(chart.base), len(chart.fiber)
    D = n + m
    batch = N.c.shape[0]
    sp = N.space.sub(N.order - 1)
    W = np.zeros((batch, D, D, D, sp.size))
    dN = [adapted_derivative(N, j, N, chart) for j in range(n)]  # e_j N^a_i
    # Omega[a, i, j] = e_j N^a_i - e_i N^a_j
    Om = Jet.stack(
        [Jet.stack([dN[j][:, i] - dN[i][:, j] for j in range(n)], axis=-1) for i in range(n)],
        axis=-2,
    )
    W[:, n:, :n, :n, :] = Om.c
    for a, y in enumerate(chart.fiber):
        dy = N.d(y)  # dy[b, i] = d_a N^b_i
        W[:, n:, :n, n + a, :] = dy.c
        W[:, n:, n + a, :n, :] = -dy.c
    return Jet(sp, W), Om


def nonholonomic_frames(dm: DMetric, point: dict) -> FrameData:
    pt, scalar = prepare_point(point, dm.chart.coords)
    _, _, N = dm.blocks(pt, 1)
    W, Om = anholonomy_jets(N, dm.chart)
    return FrameData(finish(W.value, scalar), finish(Om.value, scalar))


def vielbein(N0: np.ndarray) -> np.ndarray:
    """Coframe matrix E with rows e^alpha in the coordinate basis."""
    m, n = N0.shape[-2:]
    E = np.zeros(N0.shape[:-2] + (n + m, n + m))
    E[..., :, :] = np.eye(n + m)
    E[..., n:, :n] = N0
    return E


def sasaki_values(g0, h0, N0):
    """Coordinate matrix of the d-metric from value blocks (h0 includes l^2)."""
    n = g0.shape[-1]
    hN = h0 @ N0
    top = g0 + np.swapaxes(N0, -1, -2) @ hN
    top = 0.5 * (top + np.swapaxes(top, -1, -2))  # exact symmetry despite matmul rounding
    M = np.zeros(g0.shape[:-2] + (n + h0.shape[-1],) * 2)
    M[..., :n, :n] = top
    M[..., :n, n:] = np.swapaxes(hN, -1, -2)
    M[..., n:, :n] = hN
    M[..., n:, n:] = h0
    return M


def sasaki_assemble(dm: DMetric, point: dict) -> np.ndarray:
    pt, scalar = prepare_point(point, dm.chart.coords)
    g, h, N = dm.blocks(pt, 0)
    return finish(sasaki_values(g.value, h.value, N.value), scalar)


def coordinate_metric_jets(dm: DMetric, point: dict, order: int) -> Jet:
    """Coordinate metric of the d-metric as a jet matrix (tensor shape (D, D))."""
    g, h, N = dm.blocks(point, order)
    order = min(g.order, h.order, N.order)
    g, h, N = g.truncate(order), h.truncate(order), N.truncate(order)
    n, m = dm.n, dm.m
    hN = contract("ab,bi->ai", h, N)
    top = g + contract("ai,aj->ij", N, hN)
    c = np.zeros((g.c.shape[0], n + m, n + m, g.space.size))
    c[:, :n, :n] = top.c
    c[:, n:, :n] = hN.c
    c[:, :n, n:] = np.swapaxes(hN.c, 1, 2)
    c[:, n:, n:] = h.c
    return Jet(g.space, c)


# ----------------------------------------------------------------------
# MDR-induced Finsler functions


@dataclass
class MdrSpec:
    """Coefficients of the MDR-induced generating function.

    ``g`` is the spatial metric over fiber slots 2..4 (3x3).  ``q`` maps
    tuples of 2r fiber slots (1..4) to coefficients; it must be totally
    symmetric, so permutations of one multiset must agree.  With
    ``zero_time_slot`` any coefficient touching slot 1 is dropped.
    """

    g: list
    q: dict
    r: int = 1
    c: float = 1.0
    zero_time_slot: bool = False
    chart: Chart = field(default_factory=Chart.tangent_bundle)


def _canonical_q(spec: MdrSpec):
    out = {}
    for idx, val in spec.q.items():
        idx = tuple(int(i) for i in idx)
        if len(idx) != 2 * spec.r:
            raise ConfigError(f"q index {idx} has rank {len(idx)}, expected {2 * spec.r}", "q")
        if any(not 1 <= i <= 4 for i in idx):
            raise ConfigError(f"q index {idx} outside fiber slots 1..4", "q")
        key = tuple(sorted(idx))
        e = parse_expr(val, spec.chart) if isinstance(val, str) else _as_expr(val)
        if key in out and out[key] != e:
            raise ConfigError(f"q is not symmetric at {key}", "q")
        out[key] = e
    if spec.zero_time_slot:
        out = {k: v for k, v in out.items() if 1 not in k}
    return out


def _multiplicity(key):
    from math import factorial, prod

    counts = [key.count(i) for i in set(key)]
    return factorial(len(key)) // prod(factorial(c) for c in counts)


def _spatial_quadratic(spec, yv):
    g = _expr_grid(spec.g, spec.chart, "g")
    if len(g) != 3 or any(len(r) != 3 for r in g):
        raise ConfigError("spatial metric must be 3x3", "g")
    terms = [g[i][j] * yv[i + 1] * yv[j + 1] for i in range(3) for j in range(3)]
    gs = terms[0]
    for t in terms[1:]:
        gs = gs + t
    return gs


def _q_contraction(spec, yv):
    Q = None
    for key, coeff in sorted(_canonical_q(spec).items()):
        term = Const(float(_multiplicity(key))) * coeff
        for i in key:
            term = term * yv[i - 1]
        Q = term if Q is None else Q + term
    return Q


def finsler_from_mdr(spec: MdrSpec) -> Expr:
    """F^2 = -(c y1)^2 + gs [1 + (1/r) q.y^(2r) / gs^r], gs = g_ij y^i y^j."""
    if spec.r < 1:
        raise ConfigError("MDR degree r must be >= 1", "r")
    yv = [Var(y) for y in spec.chart.fiber]
    gs = _spatial_quadratic(spec, yv)
    time = Const(-(spec.c**2)) * Pow(yv[0], 2)
    Q = _q_contraction(spec, yv)
    if Q is None:
        return time + gs
    # gs * Q / (r gs^r) = Q gs^(1-r) / r
    corr = Q if spec.r == 1 else Q * Pow(gs, 1 - spec.r)
    return time + gs + Const(1.0 / spec.r) * corr


def mdr_dispersion_omega2(spec: MdrSpec, k: dict) -> np.ndarray:
    """omega^2 = c^2 gs(k) [1 - (1/r) q.k^(2r) / gs(k)^r], the first-order dual form."""
    from .exprkit import evaluate_values

    yv = [Var(y) for y in spec.chart.fiber]
    gs = _spatial_quadratic(spec, yv)
    Q = _q_contraction(spec, yv)
    expr = gs if Q is None else gs - Const(1.0 / spec.r) * Q * Pow(gs, 1 - spec.r)
    return spec.c**2 * evaluate_values(expr, k)


# ----------------------------------------------------------------------
# geodesics


@dataclass(frozen=True)
class Trajectory:
    tau: np.ndarray
    x: np.ndarray
    y: np.ndarray


def geodesic_integrate(F2, x0, y0, tau_span, step, chart=None, sample_every=1) -> Trajectory:
    """Classical RK4 for d^2x/dtau^2 + 2 G(x, dx/dtau) = 0 with a fixed step."""
    chart = chart or Chart.tangent_bundle()
    F2 = parse_expr(F2, chart) if isinstance(F2, str) else F2
    t0, t1 = map(float, tau_span)
    if step <= 0 or t1 <= t0:
        raise ConfigError("need step > 0 and tau_end > tau_start", "tau_span")
    nsteps = int(round((t1 - t0) / step))
    h = (t1 - t0) / nsteps
    x, y = np.asarray(x0, float).copy(), np.asarray(y0, float).copy()
    def rhs(tau, x, y):
        pt = {c: np.atleast_1d(v) for c, v in zip(chart.coords, np.concatenate([x, y]))}
        try:
            G = spray_values(F2, chart, pt)[0]
        except DegenerateMetricError as exc:
            raise DegenerateMetricError(exc.det, f"Hessian at tau={tau:.6g}") from None
        return y, -2.0 * G

    taus, xs, ys = [t0], [x.copy()], [y.copy()]
    for k in range(nsteps):
        tau = t0 + k * h
        k1x, k1y = rhs(tau, x, y)
        k2x, k2y = rhs(tau + h / 2, x + h / 2 * k1x, y + h / 2 * k1y)
        k3x, k3y = rhs(tau + h / 2, x + h / 2 * k2x, y + h / 2 * k2y)
        k4x, k4y = rhs(tau + h, x + h * k3x, y + h * k3y)
        x = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        y = y + h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y)
        if (k + 1) % sample_every == 0 or k + 1 == nsteps:
            taus.append(t0 + (k + 1) * h)
            xs.append(x.copy())
            ys.append(y.copy())
    return Trajectory(np.array(taus), np.array(xs), np.array(ys))
