"""Gravitational polarizations: multiplicative deformation of a primary ansatz."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..errors import ConfigError, NumericError
from ..exprkit import Const, as_expr
from .ansatz import ShellAnsatz
from .grid import values


def polarization_deform(
    primary: ShellAnsatz,
    eta_g=(1.0, 1.0),
    eta_h=None,
    eta3=(1.0, 1.0),
    eta4=None,
    *,
    use_eta4: bool = False,
    grid: dict | None = None,
) -> ShellAnsatz:
    """Target ansatz g_i = eta_i g_i, h_a = eta_a h_a, N^3_i = eta3_i w_i.

    By default N^4_i = eta3_i n_i as well; ``use_eta4`` switches the
    n-coefficients to their own factors ``eta4``.  ``eta_h`` maps fiber
    indices 3..8 to factors (missing entries mean 1).  If ``grid`` is given
    every polarization must be nonzero there.
    """
    if use_eta4 and eta4 is None:
        raise ConfigError("eta4 is required when use_eta4 is set", "eta4")
    eta_g = [as_expr(e) for e in eta_g]
    eta_h = {int(k): as_expr(e) for k, e in (eta_h or {}).items()}
    eta3 = [as_expr(e) for e in eta3]
    eta_n = [as_expr(e) for e in (eta4 if use_eta4 else eta3)]
    if len(eta_g) != 2 or len(eta3) != 2 or len(eta_n) != 2:
        raise ConfigError("expected two factors per group", "eta")
    if set(eta_h) - set(range(3, 9)):
        raise ConfigError("fiber polarizations are indexed 3..8", "eta_h")
    if grid is not None:
        named = [("eta_g", e) for e in eta_g] + [(f"eta_h{k}", e) for k, e in eta_h.items()]
        named += [("eta3", e) for e in eta3] + [("eta_n", e) for e in eta_n]
        for name, e in named:
            if isinstance(e, Const) and e.value != 0.0:
                continue
            vals = values(e, grid)
            if not np.all(np.isfinite(vals)) or np.any(vals == 0.0):
                raise NumericError(f"polarization {name} vanishes on the grid")

    def scale(factor, e):
        return e if isinstance(factor, Const) and factor.value == 1.0 else factor * e

    h = {k: scale(eta_h[k], e) if k in eta_h else e for k, e in primary.h.items()}
    w0 = tuple(scale(f, e) for f, e in zip(eta3, primary.w[0]))
    n0 = tuple(scale(f, e) for f, e in zip(eta_n, primary.n[0]))
    return replace(
        primary,
        g1=scale(eta_g[0], primary.g1),
        g2=scale(eta_g[1], primary.g2),
        h=h,
        w=(w0,) + primary.w[1:],
        n=(n0,) + primary.n[1:],
    )
