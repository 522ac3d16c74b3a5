"""View each shell of an ansatz as a d-metric for the general curvature engine."""
from __future__ import annotations

import numpy as np

from ..dconnection import curvature_and_ricci
from ..exprkit import Chart, Const
from ..finsler_core import ExprDMetric
from .ansatz import COORDS, SHELLS, ShellAnsatz, SourceSpec
from .grid import values


def _coordinate_block(a: ShellAnsatz, upto: int):
    """Coordinate metric of the base plus shells 0..upto-1, as an expression matrix."""
    M = [[a.g1, Const(0.0)], [Const(0.0), a.g2]]
    for sh in SHELLS[:upto]:
        ha, hb = (a.h[k] for k in sh.pair)
        w, n = a.w[sh.index], a.n[sh.index]
        size = len(M)
        new = [[M[r][c] + ha * w[r] * w[c] + hb * n[r] * n[c] for c in range(size)] for r in range(size)]
        for r in range(size):
            new[r] += [ha * w[r], hb * n[r]]
        new.append([ha * w[c] for c in range(size)] + [ha, Const(0.0)])
        new.append([hb * n[c] for c in range(size)] + [Const(0.0), hb])
        M = new
    return M


def embed_shell(a: ShellAnsatz, s: int) -> ExprDMetric:
    """d-metric whose base is everything below shell ``s`` and whose fiber is shell ``s``."""
    sh = SHELLS[s]
    chart = Chart(sh.base, tuple(f"y{k}" for k in sh.pair))
    ha, hb = (a.h[k] for k in sh.pair)
    h = [[ha, Const(0.0)], [Const(0.0), hb]]
    N = [list(a.w[s]), list(a.n[s])]
    return ExprDMetric(chart, _coordinate_block(a, s), h, N)


def curvature_cross_check(a: ShellAnsatz, src: SourceSpec, points: dict) -> dict:
    """Compare the engine's canonical Ricci components with the separated equations.

    For each shell the diagonal fiber components R^a_a must equal
    -Lambda, the mixed components R_{v alpha}, R_{k alpha} must vanish, and
    shell 0 also checks R^1_1 = R^2_2 = -hLambda.  Returns max deviations.
    """
    pts = {c: np.asarray(points.get(c, 0.0), float) for c in COORDS}
    pts = dict(zip(pts, np.broadcast_arrays(*pts.values())))
    out = {}
    for sh in SHELLS:
        dm = embed_shell(a, sh.index)
        pt = {c: pts[c] for c in dm.chart.coords}
        cp = curvature_and_ricci(dm, pt)
        ric = np.asarray(cp.ricci)
        n = dm.n
        lam = values(src.shell_lambda(sh.index), pts)
        ha, hb = (values(a.h[k], pts) for k in sh.pair)
        dev = max(np.max(np.abs(ric[:, n, n] / ha + lam)), np.max(np.abs(ric[:, n + 1, n + 1] / hb + lam)))
        out[f"R{sh.pair[0]}{sh.pair[0]}"] = float(dev)
        out[f"R{sh.pair[0]}a"] = float(np.max(np.abs(ric[:, n, :n])))
        out[f"R{sh.pair[1]}a"] = float(np.max(np.abs(ric[:, n + 1, :n])))
        if sh.index == 0:
            hl = values(src.h_lambda, pts)
            g1, g2 = values(a.g1, pts), values(a.g2, pts)
            out["R11"] = float(max(np.max(np.abs(ric[:, 0, 0] / g1 + hl)), np.max(np.abs(ric[:, 1, 1] / g2 + hl))))
    return out
