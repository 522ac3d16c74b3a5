"""Horava-Lifshitz ingredients: ADM assembly, scaling, 3-d curvature, action, MDR."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dconnection import christoffel_jets
from .errors import ConfigError, NumericError
from .exprkit import Chart, Expr, Jet, contract, evaluate, jet_space, matinv, parse_expr, variables
from .finsler_core import check_det, finish, prepare_point

HL_CHART = Chart(("x1", "x2", "x3", "x4"), ())
TIME = "x1"
SPACE = ("x2", "x3", "x4")
POLE_TOL = 1e-12

LEVI = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    LEVI[_i, _j, _k] = 1.0
    LEVI[_i, _k, _j] = -1.0


def _parse(x):
    if isinstance(x, Expr):
        return x
    if isinstance(x, str):
        return parse_expr(x, HL_CHART)
    return parse_expr(repr(float(x)), HL_CHART)


@dataclass
class HLFields:
    """Lapse, shift and spatial metric over t = x1 and x2..x4, plus couplings."""

    lapse: object = "1"
    shift: list = field(default_factory=lambda: ["0", "0", "0"])
    metric: list = field(default_factory=lambda: [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]])
    kappa: float = 1.0
    mu: float = 1.0
    varpi: float = 1.0
    Lambda: float = 1.0
    lam: float = 1.0
    eta: float = 0.0
    z: float = 3.0
    projectable: bool = True

    def __post_init__(self):
        self.lapse = _parse(self.lapse)
        self.shift = [_parse(s) for s in self.shift]
        self.metric = [[_parse(s) for s in row] for row in self.metric]
        if len(self.shift) != 3 or len(self.metric) != 3 or any(len(r) != 3 for r in self.metric):
            raise ConfigError("shift needs 3 entries and the spatial metric 3x3", "hl")
        for i in range(3):
            for j in range(i):
                if self.metric[i][j] != self.metric[j][i]:
                    raise ConfigError("spatial metric must be symmetric", f"metric[{i}][{j}]")
        if self.projectable and variables(self.lapse) - {TIME}:
            raise ConfigError("projectable lapse may depend on x1 (time) only", "lapse")


def _field_jets(f: HLFields, pt, order):
    space = jet_space(HL_CHART.coords, order)
    cache = {}
    N = evaluate(f.lapse, space, pt, cache)
    shift = Jet.stack([evaluate(s, space, pt, cache) for s in f.shift])
    g = Jet.stack([Jet.stack([evaluate(e, space, pt, cache) for e in row]) for row in f.metric])
    return N, shift, g


def assemble_adm(N, shift, g):
    """4x4 ADM matrix from value arrays (batch first)."""
    Nl = np.einsum("...ij,...j->...i", g, shift)
    G = np.zeros(N.shape + (4, 4))
    G[..., 0, 0] = -N**2 + np.einsum("...i,...i->...", shift, Nl)
    G[..., 0, 1:] = Nl
    G[..., 1:, 0] = Nl
    G[..., 1:, 1:] = g
    return G


@dataclass(frozen=True)
class ScaledADM:
    before: np.ndarray
    after: np.ndarray
    lapse: tuple  # (before, after)
    shift: tuple
    metric: tuple


def adm_assemble_and_scale(f: HLFields, point: dict, l: float) -> ScaledADM:
    """ADM matrix before and after t -> l^z t, x -> l x.

    Lapse and shift pick up l^(1 - z) (l^-2 for z = 3); g is unchanged.
    """
    if not l > 0:
        raise ConfigError("scale factor must be positive", "l")
    pt, scalar = prepare_point(point, HL_CHART.coords)
    N, shift, g = (x.value for x in _field_jets(f, pt, 0))
    s = float(l) ** (1.0 - f.z)
    N2, shift2 = s * N, s * shift
    out = [assemble_adm(N, shift, g), assemble_adm(N2, shift2, g)]
    return ScaledADM(
        *(finish(x, scalar) for x in out),
        lapse=(finish(N, scalar), finish(N2, scalar)),
        shift=(finish(shift, scalar), finish(shift2, scalar)),
        metric=(finish(g, scalar), finish(g.copy(), scalar)),
    )


# ----------------------------------------------------------------------
# 3-d curvature


def ricci_jets(G: Jet, coords) -> Jet:
    """R_ij = d_k G^k_ij - d_j G^k_ik + G^k_kl G^l_ij - G^k_jl G^l_ik."""
    dG = Jet.stack([G.d(c) for c in coords])  # [s, k, i, j] = d_s G^k_ij
    n = len(coords)
    t1 = sum((dG[k, k] for k in range(n)), start=0 * dG[0, 0])
    t2 = Jet.stack([sum((dG[j, k, :, k] for k in range(n)), start=0 * dG[0, 0, :, 0]) for j in range(n)], axis=-1)
    trace = sum((G[k, k] for k in range(n)), start=0 * G[0, 0])  # G^k_kl
    t3 = contract("l,lij->ij", trace, G)
    t4 = contract("kjl,lik->ij", G, G)
    return t1 - t2 + t3 - t4


@dataclass(frozen=True)
class Invariants3D:
    K: np.ndarray
    K_trace: np.ndarray
    ricci: np.ndarray
    R: np.ndarray
    cotton: np.ndarray
    extra: dict = field(default_factory=dict, repr=False)


def _invariants(f: HLFields, pt):
    N, shift, g4 = _field_jets(f, pt, 3)
    # Christoffels and Ricci use spatial derivatives only
    gi = matinv(g4, "spatial metric")
    G = christoffel_jets(g4, SPACE)  # order 2
    Ric = ricci_jets(G, SPACE)  # order 1
    gi1 = gi.truncate(1)
    Rs = contract("ij,ij->", gi1, Ric)
    mixed = contract("jm,ml->jl", gi1, Ric)  # R^j_l
    S = mixed - Jet.stack([Jet.stack([Rs * (0.25 if a == b else 0.0) for b in range(3)]) for a in range(3)])
    dS = np.stack([S.d(c).value for c in SPACE], axis=1)  # [k, j, l]
    G0, S0 = G.value, S.value
    nabS = dS + np.einsum("...jkm,...ml->...kjl", G0, S0) - np.einsum("...mkl,...jm->...kjl", G0, S0)
    g0 = g4.value
    det = check_det(g0, "spatial metric")
    sq = np.sqrt(np.abs(det))
    cotton = np.einsum("ikl,...kjl->...ij", LEVI, nabS) / sq[..., None, None]
    # extrinsic curvature
    N0 = N.value
    Nl = contract("ij,j->i", g4.truncate(1), shift.truncate(1))  # N_j
    dt_g = g4.d(TIME).value
    dNl = np.stack([Nl.d(c).value for c in SPACE], axis=1)  # [i, j] = d_i N_j
    nabN = dNl - np.einsum("...kij,...k->...ij", G0, Nl.value)
    K = (dt_g - nabN - np.swapaxes(nabN, -1, -2)) / (2.0 * N0[..., None, None])
    gi0 = gi.value
    Ktr = np.einsum("...ij,...ij->...", gi0, K)
    # nabla_j R^l_k for the potential's parity term
    Ric0, mixed0 = Ric.value, mixed.value
    dmixed = np.stack([mixed.d(c).value for c in SPACE], axis=1)  # [j, l, k]
    nab_mixed = (
        dmixed
        + np.einsum("...ljm,...mk->...jlk", G0, mixed0)
        - np.einsum("...mjk,...lm->...jlk", G0, mixed0)
    )
    extra = dict(g=g0, gi=gi0, sqrtg=sq, N=N0, nab_mixed=nab_mixed)
    return Invariants3D(K, Ktr, Ric0, Rs.value, cotton, extra)


def curvature_invariants_3d(f: HLFields, point: dict) -> Invariants3D:
    pt, scalar = prepare_point(point, HL_CHART.coords)
    inv = _invariants(f, pt)
    if not scalar:
        return inv
    return Invariants3D(
        *(x[0] for x in (inv.K, inv.K_trace, inv.ricci, inv.R, inv.cotton)),
        extra={k: v[0] for k, v in inv.extra.items()},
    )


# ----------------------------------------------------------------------
# action and constants


def _one_minus_3lam(lam):
    d = 1.0 - 3.0 * lam
    if abs(d) < POLE_TOL:
        raise NumericError("pole at lambda = 1/3")
    return d


def kinetic_density(K, gi, sqrtg, N, kappa, lam):
    Kup = np.einsum("...ia,...jb,...ab->...ij", gi, gi, K)
    KK = np.einsum("...ij,...ij->...", K, Kup)
    Ktr = np.einsum("...ij,...ij->...", gi, K)
    return (2.0 / kappa**2) * sqrtg * N * (KK - lam * Ktr**2)


def hl_action_density(f: HLFields, point: dict):
    """(kinetic, potential) Lagrangian densities at the point."""
    pt, scalar = prepare_point(point, HL_CHART.coords)
    inv = _invariants(f, pt)
    ex = inv.extra
    gi, g, sq, N = ex["gi"], ex["g"], ex["sqrtg"], ex["N"]
    kin = kinetic_density(inv.K, gi, sq, N, f.kappa, f.lam)
    k2, mu, w2, Lam, lam = f.kappa**2, f.mu, f.varpi**2, f.Lambda, f.lam
    d = _one_minus_3lam(lam)
    eps = LEVI / sq[..., None, None, None]
    parity = np.einsum("...ijk,...il,...jlk->...", eps, inv.ricci, ex["nab_mixed"])
    Rup = np.einsum("...ia,...jb,...ab->...ij", gi, gi, inv.ricci)
    RR = np.einsum("...ij,...ij->...", inv.ricci, Rup)
    R = inv.R
    C_low = np.einsum("...ia,...jb,...ab->...ij", g, g, inv.cotton)
    CC = np.einsum("...ij,...ij->...", C_low, inv.cotton)
    pot = sq * N * (
        k2 * mu / (2 * w2) * parity
        - k2 * mu / 8 * RR
        + k2 * mu / (8 * d) * ((1 - 4 * lam) * R**2 / 4 + Lam * R - 3 * Lam**2)
        - k2 / (2 * w2) * CC
    )
    return finish(kin, scalar), finish(pot, scalar)


@dataclass(frozen=True)
class GRConstants:
    c: float
    G: float
    Lambda_GR: float


def gr_limit_constants(kappa, mu, Lambda, lam) -> GRConstants:
    d = _one_minus_3lam(lam)
    ratio = Lambda / d
    if ratio < 0:
        raise NumericError(f"imaginary speed of light: Lambda/(1-3 lambda) = {ratio!r} < 0")
    root = np.sqrt(ratio)
    c = kappa**2 * mu / 4 * root
    G = kappa**4 * mu / 8 * root / (16 * np.pi)
    return GRConstants(float(c), float(G), float(3 * kappa**4 * mu**2 * Lambda**2 / (32 * d)))


# ----------------------------------------------------------------------
# dispersion branches

BRANCHES = ("scalar-low-p", "scalar-high-p", "tensor-db", "scalar-uv-beyond", "tensor-beyond")


@dataclass(frozen=True)
class MdrBranch:
    """One dispersion branch.  ``sign`` (+1/-1) is required for tensor branches.

    ``c`` defaults to the GR-limit value, c^2 = kappa^4 mu^2 Lambda / (16 (1 - 3 lambda)).
    """

    tag: str
    kappa: float = 1.0
    mu: float = 1.0
    varpi: float = 1.0
    Lambda: float = 1.0
    lam: float = 0.0
    eta: float = 0.0
    sign: int | None = None
    c: float | None = None

    def __post_init__(self):
        if self.tag not in BRANCHES:
            raise ConfigError(f"unknown branch {self.tag!r}", "branch")
        if self.tag.startswith("tensor"):
            if self.sign not in (1, -1):
                raise ConfigError("tensor branches need sign = +1 or -1", "sign")

    def c2(self):
        if self.c is not None:
            return float(self.c) ** 2
        return self.kappa**4 * self.mu**2 * self.Lambda / (16 * _one_minus_3lam(self.lam))

    def with_(self, **kw):
        return replace(self, **kw)


def mdr_omega(branch: MdrBranch, p):
    """omega^2 for the branch at momentum magnitude p (scalar or array)."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ConfigError("momentum magnitude must be non-negative", "p")
    k, mu, w, Lam, lam, eta = (
        branch.kappa, branch.mu, branch.varpi, branch.Lambda, branch.lam, branch.eta,
    )
    tag = branch.tag
    if tag == "scalar-low-p":
        d = _one_minus_3lam(lam)
        return np.full_like(p, -9 * k**4 * mu**2 * Lam**2 / (32 * d**2))
    if tag == "scalar-high-p":
        d = _one_minus_3lam(lam)
        return k**4 * mu**2 / 16 * ((1 - lam) / d) ** 2 * p**4
    if tag == "scalar-uv-beyond":
        d = _one_minus_3lam(lam)
        return k**2 * (1 - lam) ** 2 / (16 * d**2) * p**4 - 3 * k**2 * (1 - lam) / (2 * d) * eta * p**6
    c2 = branch.c2()
    base = c2 * p**2 + k**4 * mu**2 / 16 * p**4 + branch.sign * k**4 * mu / (4 * w**2) * p**5
    if tag == "tensor-db":
        return base + k**4 / (4 * w**4) * p**6
    return base + (k**4 / (4 * w**4) - k**2 * eta / 2) * p**6
