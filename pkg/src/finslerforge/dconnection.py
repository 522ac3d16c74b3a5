"""Canonical d-connection, torsion, distortion and curvature.

Index conventions (all arrays carry a leading batch axis internally):

* ``gamma[c, a, b]`` is the coefficient with D_{e_b} e_a = gamma[c, a, b] e_c,
  so the derivative direction is the last index, as in L^i_jk.
* ``W[c, a, b]`` are the anholonomy coefficients, [e_a, e_b] = W[c, a, b] e_c.
* ``R[a, b, c, d]`` is the component of R(e_d, e_c) e_b along e_a, and
  ``ricci[b, c] = sum_t R[t, b, c, t]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .exprkit import Chart, Jet, contract, evaluate, jet_space, matinv, parse_expr
from .finsler_core import (
    DMetric,
    adapted_derivative,
    anholonomy_jets,
    check_det,
    coordinate_metric_jets,
    finish,
    prepare_point,
)


# ----------------------------------------------------------------------
# canonical connection


@dataclass(frozen=True)
class DConnection:
    gamma: np.ndarray
    n: int

    @property
    def L_h(self):  # L^i_jk -> [i, j, k]
        n = self.n
        return self.gamma[..., :n, :n, :n]

    @property
    def L_v(self):  # L^a_bk -> [a, b, k]
        n = self.n
        return self.gamma[..., n:, n:, :n]

    @property
    def C_h(self):  # C^i_jc -> [i, j, c]
        n = self.n
        return self.gamma[..., :n, :n, n:]

    @property
    def C_v(self):  # C^a_bc -> [a, b, c]
        n = self.n
        return self.gamma[..., n:, n:, n:]


def _frame_derivs(f: Jet, N: Jet, chart: Chart):
    """List of e_alpha f for alpha over all coordinates."""
    return [adapted_derivative(f, al, N, chart) for al in range(len(chart.coords))]


def connection_jets(g: Jet, h: Jet, N: Jet, chart: Chart) -> Jet:
    """Canonical d-connection coefficients as a (D, D, D) jet.

    The result is valid one order below the lowest input order.
    """
    n, m = len(chart.base), len(chart.fiber)
    D = n + m
    gi, hi = matinv(g, "h-metric"), matinv(h, "v-metric")
    eg = _frame_derivs(g, N, chart)  # eg[al][j, k]
    eh = _frame_derivs(h, N, chart)
    dN = [N.d(y) for y in chart.fiber]  # dN[b][a, k] = d_b N^a_k
    order = min(x.order for x in eg + eh + dN)
    space = g.space.sub(order)
    batch = g.c.shape[0]
    G = np.zeros((batch, D, D, D, space.size))

    def sym_h(al_of, deriv, inv, size):
        # 1/2 inv^{ir} (e_k m_jr + e_j m_kr - e_r m_jk), k from al_of
        out = []
        for k in range(size):
            dk = deriv[al_of(k)]
            t = Jet.stack(
                [
                    Jet.stack(
                        [dk[j, r] + deriv[al_of(j)][k, r] - deriv[al_of(r)][j, k] for r in range(size)]
                    )
                    for j in range(size)
                ]
            )
            out.append(0.5 * contract("ir,jr->ij", inv, t))
        return out

    # L^i_jk
    for k, Lk in enumerate(sym_h(lambda k: k, eg, gi, n)):
        G[:, :n, :n, k] = Lk.truncate(order).c
    # C^a_bc
    for c, Cc in enumerate(sym_h(lambda c: n + c, eh, hi, m)):
        G[:, n:, n:, n + c] = Cc.truncate(order).c
    # C^i_jc = 1/2 g^ik e_c g_jk
    for c in range(m):
        Cc = 0.5 * contract("ik,jk->ij", gi, eg[n + c])
        G[:, :n, :n, n + c] = Cc.truncate(order).c
    # L^a_bk = d_b N^a_k + 1/2 h^ac (e_k h_bc - h_dc d_b N^d_k - h_db d_c N^d_k)
    for k in range(n):
        dNk = Jet.stack([dN[b][:, k] for b in range(m)], axis=-1)  # [d, b] = d_b N^d_k
        t = eh[k] - contract("dc,db->bc", h, dNk) - contract("db,dc->bc", h, dNk)
        Lk = dNk + 0.5 * contract("ac,bc->ab", hi, t)
        G[:, n:, n:, k] = Lk.truncate(order).c
    return Jet(space, G)


def canonical_dconnection(dm: DMetric, point: dict) -> DConnection:
    pt, scalar = prepare_point(point, dm.chart.coords)
    g, h, N = dm.blocks(pt, 1)
    gamma = connection_jets(g, h, N, dm.chart)
    return DConnection(finish(gamma.value, scalar), dm.n)


# ----------------------------------------------------------------------
# torsion and distortion


@dataclass(frozen=True)
class TorsionPack:
    T: np.ndarray  # T[c, a, b] = gamma[c, a, b] - gamma[c, b, a] - W[c, b, a]
    n: int

    def block(self, up, lo1, lo2):
        """Sub-array for index kinds, each 'h' or 'v'."""
        n = self.n
        sl = {"h": slice(0, n), "v": slice(n, None)}
        return self.T[..., sl[up], sl[lo1], sl[lo2]]

    @property
    def T_hhh(self):  # T^i_jk
        return self.block("h", "h", "h")

    @property
    def T_hhv(self):  # T^i_ja
        return self.block("h", "h", "v")

    @property
    def T_vhh(self):  # T^a_ji
        return self.block("v", "h", "h")

    @property
    def T_vvh(self):  # T^a_bi
        return self.block("v", "v", "h")

    @property
    def T_vvv(self):  # T^a_bc
        return self.block("v", "v", "v")


def torsion_values(gamma, W):
    return gamma - np.swapaxes(gamma, -1, -2) - np.swapaxes(W, -1, -2)


def distortion_values(gamma, g, h, N_dy, Omega, n):
    """Z with Levi-Civita = gamma + Z, built from value arrays.

    ``N_dy[b, a, k]`` = d_b N^a_k, ``Omega[a, i, j]``; ``h`` includes l^2.
    """
    gi, hi = np.linalg.inv(g), np.linalg.inv(h)
    m = h.shape[-1]
    D = n + m
    Z = np.zeros(g.shape[:-2] + (D, D, D))
    Ch = gamma[..., :n, :n, n:]  # C^i_jb
    Lv = gamma[..., n:, n:, :n]  # L^a_bk
    # Z^a_jk = -C^i_jb g_ik h^ab - 1/2 Omega^a_jk
    Z[..., n:, :n, :n] = -np.einsum("...ijb,...ik,...ab->...ajk", Ch, g, hi) - 0.5 * Omega
    # Z^i_kb = 1/2 Omega^c_jk h_cb g^ji ; Z^i_bk = Z^i_kb + C^i_kb
    half = 0.5 * np.einsum("...cjk,...cb,...ji->...ikb", Omega, h, gi)
    Z[..., :n, :n, n:] = half
    Z[..., :n, n:, :n] = np.swapaxes(half, -1, -2) + np.swapaxes(Ch, -1, -2)
    # Z^a_kb = L^a_bk - d_b N^a_k
    That = Lv - np.einsum("...bak->...abk", N_dy)  # That[c, a, j] = L^c_aj - d_a N^c_j
    Z[..., n:, :n, n:] = np.swapaxes(That, -1, -2)
    # Z^i_ab = -1/2 g^ij (That^c_aj h_cb + That^c_bj h_ca)
    t = np.einsum("...caj,...cb->...jab", That, h)
    Z[..., :n, n:, n:] = -0.5 * np.einsum("...ij,...jab->...iab", gi, t + np.swapaxes(t, -1, -2))
    return Z


def torsion_and_distortion(dm: DMetric, conn: DConnection, point: dict):
    """(TorsionPack, Z) at the point; Levi-Civita = gamma + Z in the adapted frame."""
    pt, scalar = prepare_point(point, dm.chart.coords)
    g, h, N = dm.blocks(pt, 1)
    W, Om = anholonomy_jets(N, dm.chart)
    gamma = np.asarray(conn.gamma)
    if scalar:
        gamma = gamma[None]
    T = torsion_values(gamma, W.value)
    N_dy = np.stack([N.d(y).value for y in dm.chart.fiber], axis=1)
    Z = distortion_values(gamma, g.value, h.value, N_dy, Om.value, dm.n)
    return TorsionPack(finish(T, scalar), dm.n), finish(Z, scalar)


# ----------------------------------------------------------------------
# Levi-Civita oracle


def christoffel_jets(M: Jet, coords) -> Jet:
    """Coordinate Christoffels G[l, m, n] = Gamma^l_mn of a jet matrix."""
    Mi = matinv(M, "metric")
    dM = Jet.stack([M.d(c) for c in coords])  # [s, m, n] = d_s M_mn
    t = dM.transpose(1, 0, 2) + dM.transpose(1, 2, 0) - dM.transpose(0, 1, 2)
    # t[s, m, n] = d_m M_sn + d_n M_sm - d_s M_mn
    return 0.5 * contract("ls,smn->lmn", Mi, t)


def _metric_jets(metric, pt, chart, order):
    if isinstance(metric, DMetric):
        return coordinate_metric_jets(metric, pt, order)
    space = jet_space(chart.coords, order)
    cache = {}
    rows = []
    for row in metric:
        rows.append(
            Jet.stack(
                [
                    evaluate(parse_expr(e, chart) if isinstance(e, str) else e, space, pt, cache)
                    for e in row
                ]
            )
        )
    return Jet.stack(rows)


def levicivita_oracle(metric, point: dict, chart: Chart | None = None) -> np.ndarray:
    """Coordinate Christoffel symbols Gamma[l, m, n] = Gamma^l_mn.

    ``metric`` is a :class:`DMetric` (its coordinate form is used) or a
    square matrix of expressions over ``chart``.
    """
    chart = metric.chart if isinstance(metric, DMetric) else (chart or Chart.tangent_bundle())
    if not isinstance(metric, DMetric) and len(metric) != len(chart.coords):
        raise ConfigError("metric size does not match the chart", "metric")
    pt, scalar = prepare_point(point, chart.coords)
    M = _metric_jets(metric, pt, chart, 1)
    return finish(christoffel_jets(M, chart.coords).value, scalar)


def frame_matrices(N0: np.ndarray):
    """A (rows e_alpha in the coordinate basis) and its inverse B."""
    m, n = N0.shape[-2:]
    D = n + m
    A = np.broadcast_to(np.eye(D), N0.shape[:-2] + (D, D)).copy()
    A[..., :n, n:] = -np.swapaxes(N0, -1, -2)
    B = np.broadcast_to(np.eye(D), N0.shape[:-2] + (D, D)).copy()
    B[..., :n, n:] = np.swapaxes(N0, -1, -2)
    return A, B


def frame_riemann_from_coordinates(Rc: np.ndarray, N0: np.ndarray) -> np.ndarray:
    """Coordinate R[r, s, mu, nu] re-expressed with the R[a, b, c, d] frame convention."""
    A, B = frame_matrices(N0)
    return np.einsum("...rsmn,...bs,...dm,...cn,...ra->...abcd", Rc, A, A, A, B)


def levicivita_frame_jets(dm: DMetric, point: dict, order: int) -> Jet:
    """Levi-Civita connection in the adapted frame as a jet of ``order``."""
    chart = dm.chart
    n, D = dm.n, len(chart.coords)
    Gc = christoffel_jets(coordinate_metric_jets(dm, point, order + 1), chart.coords)
    _, _, N = dm.blocks(point, order + 1)
    batch = N.c.shape[0]
    sp = N.space
    A = np.zeros((batch, D, D, sp.size))
    A[:, range(D), range(D), 0] = 1.0
    A[:, :n, n:] = -np.swapaxes(N.c, 1, 2)
    Binv = A.copy()
    Binv[:, :n, n:] *= -1.0
    A, Binv = Jet(sp, A), Jet(sp, Binv)
    # e_b(A[a, l]): only A[i, n + c] = -N^c_i varies
    eA = Jet.stack([adapted_derivative(A, b, N, chart) for b in range(D)], axis=-1)
    X = eA + contract("am,blm->alb", A, contract("bn,lmn->blm", A, Gc))
    return contract("lc,alb->cab", Binv, X)


def levicivita_frame(dm: DMetric, point: dict) -> np.ndarray:
    """Levi-Civita connection of the coordinate metric in the adapted frame.

    Returned with the same index convention as :class:`DConnection`.
    """
    pt, scalar = prepare_point(point, dm.chart.coords)
    return finish(levicivita_frame_jets(dm, pt, 0).value, scalar)


def coordinate_riemann_values(M: Jet, coords) -> np.ndarray:
    """R[r, s, mu, nu] = (R(d_mu, d_nu) d_s)^r from a jet metric of order >= 2."""
    G = christoffel_jets(M, coords)  # order >= 1
    dG = np.stack([G.d(c).value for c in coords], axis=1)  # [k, l, m, n] = d_k G^l_mn
    G0 = G.value
    R = (
        np.einsum("...mrns->...rsmn", dG)
        - np.einsum("...nrms->...rsmn", dG)
        + np.einsum("...rml,...lns->...rsmn", G0, G0)
        - np.einsum("...rnl,...lms->...rsmn", G0, G0)
    )
    return R


# ----------------------------------------------------------------------
# curvature


@dataclass(frozen=True)
class CurvaturePack:
    R: np.ndarray
    ricci: np.ndarray
    R_check: np.ndarray  # g^ij R_ij
    S_check: np.ndarray  # h^ab R_ab
    sR: np.ndarray
    einstein: np.ndarray
    n: int

    @property
    def R_ij(self):
        return self.ricci[..., : self.n, : self.n]

    @property
    def R_ia(self):
        return self.ricci[..., : self.n, self.n :]

    @property
    def R_ai(self):
        return self.ricci[..., self.n :, : self.n]

    @property
    def R_ab(self):
        return self.ricci[..., self.n :, self.n :]


def frame_curvature(gamma: Jet, W0: np.ndarray, N: Jet, chart: Chart) -> np.ndarray:
    """R[a, b, c, d] of a frame connection given as a jet of order >= 1."""
    D = len(chart.coords)
    eG = np.stack([adapted_derivative(gamma, d, N, chart).value for d in range(D)], axis=1)
    # eG[d, a, b, c] = e_d gamma[a, b, c]
    G0 = gamma.value
    return (
        np.einsum("...dabc->...abcd", eG)
        - np.einsum("...cabd->...abcd", eG)
        + np.einsum("...mbc,...amd->...abcd", G0, G0)
        - np.einsum("...mbd,...amc->...abcd", G0, G0)
        - np.einsum("...mdc,...abm->...abcd", W0, G0)
    )


def curvature_from_blocks(g: Jet, h: Jet, N: Jet, chart: Chart, gamma: Jet | None = None):
    n = len(chart.base)
    if gamma is None:
        gamma = connection_jets(g, h, N, chart)
    W, _ = anholonomy_jets(N, chart)
    R = frame_curvature(gamma, W.value, N, chart)
    ricci = np.einsum("...tbct->...bc", R)
    g0, h0 = g.value, h.value
    Rc = np.einsum("...ij,...ij->...", np.linalg.inv(g0), ricci[..., :n, :n])
    Sc = np.einsum("...ab,...ab->...", np.linalg.inv(h0), ricci[..., n:, n:])
    sR = Rc + Sc
    D = len(chart.coords)
    Gm = np.zeros(g0.shape[:-2] + (D, D))
    Gm[..., :n, :n] = g0
    Gm[..., n:, n:] = h0
    E = ricci - 0.5 * Gm * sR[..., None, None]
    return R, ricci, Rc, Sc, sR, E


def curvature_and_ricci(dm: DMetric, point: dict) -> CurvaturePack:
    pt, scalar = prepare_point(point, dm.chart.coords)
    g, h, N = dm.blocks(pt, 2)
    parts = curvature_from_blocks(g, h, N, dm.chart)
    return CurvaturePack(*(finish(x, scalar) for x in parts), dm.n)


# ----------------------------------------------------------------------
# metric compatibility


def compat_values(gamma0, g: Jet, h: Jet, N: Jet, chart: Chart) -> np.ndarray:
    """max |(D_c G)_ab| per batch point, G = blockdiag(g, h)."""
    n = len(chart.base)
    D = len(chart.coords)
    eg = np.stack([adapted_derivative(g, c, N, chart).value for c in range(D)], axis=-1)
    eh = np.stack([adapted_derivative(h, c, N, chart).value for c in range(D)], axis=-1)
    batch = g.c.shape[0]
    Gm = np.zeros((batch, D, D))
    Gm[:, :n, :n] = g.value
    Gm[:, n:, n:] = h.value
    dG = np.zeros((batch, D, D, D))
    dG[:, :n, :n] = eg
    dG[:, n:, n:] = eh
    # (D_c G)_ab = e_c G_ab - gamma[m, a, c] G_mb - gamma[m, b, c] G_am
    res = (
        dG
        - np.einsum("...mac,...mb->...abc", gamma0, Gm)
        - np.einsum("...mbc,...am->...abc", gamma0, Gm)
    )
    return np.abs(res).reshape(batch, -1).max(axis=-1)


def compat_residual(dm: DMetric, conn: DConnection, point: dict) -> float:
    pt, scalar = prepare_point(point, dm.chart.coords)
    g, h, N = dm.blocks(pt, 1)
    gamma = np.asarray(conn.gamma)
    if scalar:
        gamma = gamma[None]
    check_det(g.value, "h-metric")
    return float(compat_values(gamma, g, h, N, dm.chart).max())
