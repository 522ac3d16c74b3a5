"""Zero-torsion (Levi-Civita) conditions for a shell ansatz."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exprkit import evaluate, jet_space
from .ansatz import ANSATZ_VARS, SHELLS, ShellAnsatz
from .grid import screen, subset

LC_TOL = 1e-8
CONSTRAINTS = ("w_v", "ew_sym", "n_v", "dn_sym")


@dataclass
class ConstraintReport:
    violations: dict
    tol: float = LC_TOL
    excluded: list = field(default_factory=list)

    @property
    def passed(self) -> dict:
        return {k: bool(v < self.tol) for k, v in self.violations.items()}

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    @property
    def max(self) -> float:
        return max(self.violations.values()) if self.violations else 0.0

    def as_dict(self):
        return {
            "violations": {k: float(v) for k, v in self.violations.items()},
            "passed": self.passed,
            "tol": self.tol,
            "excluded": self.excluded,
        }


def lc_constraints_check(a: ShellAnsatz, grid: dict, tol: float = LC_TOL) -> ConstraintReport:
    """Largest violation of each Levi-Civita condition, per shell.

    With e_al = d_al - sum over shells of w_al d_v (the n-terms drop out by
    the Killing symmetry), shell s must satisfy d_v w_al = e_al ln|h_b|,
    e_al w_be = e_be w_al, d_v n_al = 0 and d_al n_be = d_be n_al.
    """
    checks = [(f"h{sh.pair[1]}", a.h[sh.pair[1]]) for sh in SHELLS]
    ok, excluded = screen(checks, grid)
    pts = subset(grid, ok)
    if not ok.any():
        return ConstraintReport({}, tol, excluded)
    space = jet_space(ANSATZ_VARS, 1)
    cache = {}
    with np.errstate(all="ignore"):
        ev = lambda e: evaluate(e, space, pts, cache)
        W = [[ev(e) for e in a.w[sh.index]] for sh in SHELLS]
        Nn = [[ev(e) for e in a.n[sh.index]] for sh in SHELLS]
        H = {sh.index: ev(a.h[sh.pair[1]]) for sh in SHELLS}

    def d(j, name):
        return j.partial(name) if name in j.space.names else np.zeros_like(j.value)

    def frame(j, alpha):
        out = d(j, alpha)
        for sh in SHELLS:
            if alpha in sh.base:
                out = out - W[sh.index][sh.base.index(alpha)].value * d(j, sh.v)
        return out

    viol = {}
    for sh in SHELLS:
        s, v, base = sh.index, sh.v, sh.base
        hb = H[s]
        w_v, ew, n_v, dn = [0.0], [0.0], [0.0], [0.0]
        for i, al in enumerate(base):
            w_v.append(np.max(np.abs(d(W[s][i], v) - frame(hb, al) / hb.value)))
            n_v.append(np.max(np.abs(d(Nn[s][i], v))))
            for k in range(i + 1, len(base)):
                be = base[k]
                ew.append(np.max(np.abs(frame(W[s][k], al) - frame(W[s][i], be))))
                dn.append(np.max(np.abs(d(Nn[s][k], al) - d(Nn[s][i], be))))
        for name, vals in zip(CONSTRAINTS, (w_v, ew, n_v, dn)):
            viol[f"shell{s}.{name}"] = float(max(vals))
    return ConstraintReport(viol, tol, excluded)
