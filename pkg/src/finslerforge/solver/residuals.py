"""Residuals of the separated field equations on a shell ansatz.

Each family is LHS - RHS of one separated equation, written out directly in
terms of the metric coefficients.  Nothing here is shared with the solution
generator.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exprkit import evaluate, jet_space
from .ansatz import ANSATZ_VARS, SHELLS, ShellAnsatz, SourceSpec
from .grid import screen, subset

FAMILIES = ("R11", "R33", "R3k", "R4k", "R55", "R5a", "R6a", "R77", "R7a", "R8a")
VARIANTS = ("corrected", "printed")


@dataclass
class ResidualReport:
    """Per-family maxima plus per-point residuals on the non-degenerate points."""

    families: dict
    per_point: dict
    points: dict
    excluded: list = field(default_factory=list)

    @property
    def max(self) -> float:
        return max(self.families.values()) if self.families else 0.0

    def as_dict(self):
        return {
            "families": {k: float(v) for k, v in self.families.items()},
            "max": float(self.max),
            "n_points": int(len(next(iter(self.points.values()))) if self.points else 0),
            "excluded": self.excluded,
        }


class _Jets:
    """Partial-derivative lookups on a batch of jets; Killing directions give 0."""

    def __init__(self, jets):
        self.jets = jets

    def __call__(self, name, *wrt):
        j = self.jets[name]
        if any(w not in j.space.names for w in wrt):
            return np.zeros_like(j.value)
        return j.partial(*wrt)


def _jets(a: ShellAnsatz, s: SourceSpec, point):
    space = jet_space(ANSATZ_VARS, 2)
    cache = {}
    named = {"g1": a.g1, "g2": a.g2, "hL": s.h_lambda}
    for k in range(3):
        named[f"L{k}"] = s.shell_lambda(k)
    for i, e in a.h.items():
        named[f"h{i}"] = e
    for sh in SHELLS:
        for k in range(len(sh.base)):
            named[f"w{sh.index}_{k}"] = a.w[sh.index][k]
            named[f"n{sh.index}_{k}"] = a.n[sh.index][k]
    with np.errstate(all="ignore"):
        return _Jets({k: evaluate(e, space, point, cache) for k, e in named.items()})


def _h_family(J):
    g1, g2 = J("g1"), J("g2")
    bracket = (
        J("g2", "x1", "x1")
        - J("g1", "x1") * J("g2", "x1") / (2 * g1)
        - J("g2", "x1") ** 2 / (2 * g2)
        + J("g1", "x2", "x2")
        - J("g1", "x2") * J("g2", "x2") / (2 * g2)
        - J("g1", "x2") ** 2 / (2 * g1)
    )
    return -bracket / (2 * g1 * g2) + J("hL")


def _shell_families(J, sh, variant):
    v = sh.v
    a, b = (f"h{k}" for k in sh.pair)
    ha, hb = J(a), J(b)
    ha_v, hb_v, hb_vv = J(a, v), J(b, v), J(b, v, v)
    # the printed shell-2 equations carry h6 and h4 where the pattern has h8
    typo = variant == "printed" and sh.index == 2
    hb_v_third = J("h6", v) if typo else hb_v
    bracket = hb_vv - hb_v**2 / (2 * hb) - ha_v * hb_v_third / (2 * ha)
    r_vert = -bracket / (2 * ha * hb) + J(f"L{sh.index}")

    w_denominator = J("h4") if typo else hb
    bracket_w = hb_vv - hb_v**2 / (2 * hb) - ha_v * hb_v / (2 * ha)
    r_w, r_n = [], []
    for k, alpha in enumerate(sh.base):
        w = J(f"w{sh.index}_{k}")
        r_w.append(
            w / (2 * w_denominator) * bracket_w
            + hb_v / (4 * hb) * (J(a, alpha) / ha + J(b, alpha) / hb)
            - J(b, alpha, v) / (2 * hb)
        )
        n_v, n_vv = J(f"n{sh.index}_{k}", v), J(f"n{sh.index}_{k}", v, v)
        if variant == "printed":
            r_n.append(hb / (2 * ha) * n_vv + (hb / ha * ha_v - 1.5 * hb_v) * n_v / (2 * ha))
        else:
            r_n.append(-hb / (2 * ha) * (n_vv + (1.5 * hb_v / hb - 0.5 * ha_v / ha) * n_v))
    return r_vert, np.stack(r_w), np.stack(r_n)


def shell_residuals(
    a: ShellAnsatz, s: SourceSpec, grid: dict, variant: str = "corrected"
) -> ResidualReport:
    """Evaluate every separated equation on ``grid`` (name -> 1-d arrays).

    Points where some g_i or h_a vanishes (or cannot be evaluated) are
    excluded and listed in the report.  ``variant="printed"`` uses the
    equations exactly as originally typeset (see the project notes).
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    checks = [("g1", a.g1), ("g2", a.g2)] + [(f"h{k}", a.h[k]) for k in range(3, 9)]
    ok, excluded = screen(checks, grid)
    pts = subset(grid, ok)
    if not ok.any():
        return ResidualReport({}, {}, pts, excluded)
    J = _jets(a, s, pts)
    per_point = {"R11": np.abs(_h_family(J))}
    names = (("R33", "R3k", "R4k"), ("R55", "R5a", "R6a"), ("R77", "R7a", "R8a"))
    for sh in SHELLS:
        r_vert, r_w, r_n = _shell_families(J, sh, variant)
        fam = names[sh.index]
        per_point[fam[0]] = np.abs(r_vert)
        per_point[fam[1]] = np.abs(r_w).max(axis=0)
        per_point[fam[2]] = np.abs(r_n).max(axis=0)
    families = {k: float(np.max(v)) for k, v in per_point.items()}
    return ResidualReport(families, per_point, pts, excluded)
