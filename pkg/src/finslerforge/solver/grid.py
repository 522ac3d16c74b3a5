"""Axis-aligned evaluation grids and degenerate-point screening."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError, EvalDomainError
from ..exprkit import evaluate, jet_space
from .ansatz import COORDS

DEGENERATE = 1e-10


def tensor_grid(spec: dict, fixed: dict | None = None, scale: float = 1.0) -> dict:
    """Flattened tensor grid over all shell coordinates.

    ``spec`` maps names to ``[min, max, count]``; ``fixed`` pins other
    coordinates to single values; everything else sits at 0.  ``scale``
    multiplies every count (at least one point per axis).
    """
    fixed = dict(fixed or {})
    axes = []
    for name in COORDS:
        if name in spec:
            try:
                lo, hi, count = spec[name]
                count = int(count)
            except (TypeError, ValueError):
                raise ConfigError("expected [min, max, count]", f"grid.{name}") from None
            if count < 1:
                raise ConfigError("count must be at least 1", f"grid.{name}")
            count = max(1, int(round(count * scale)))
            axes.append(np.linspace(float(lo), float(hi), count) if count > 1 else np.array([float(lo)]))
        else:
            axes.append(np.array([float(fixed.get(name, 0.0))]))
    unknown = sorted(set(spec) - set(COORDS))
    if unknown:
        raise ConfigError(f"undeclared coordinate {unknown[0]!r}", f"grid.{unknown[0]}")
    mesh = np.meshgrid(*axes, indexing="ij")
    return {name: m.ravel() for name, m in zip(COORDS, mesh)}


def subset(point: dict, mask) -> dict:
    return {k: np.asarray(v)[mask] for k, v in point.items()}


def values(e, point: dict) -> np.ndarray:
    """Order-0 values; points outside the domain come back as NaN."""
    space = jet_space((), 0)
    n = len(next(iter(point.values())))
    try:
        with np.errstate(all="ignore"):
            return np.broadcast_to(evaluate(e, space, point).value, (n,)).copy()
    except EvalDomainError:
        out = np.empty(n)
        for k in range(n):
            try:
                with np.errstate(all="ignore"):
                    out[k] = evaluate(e, space, subset(point, [k])).value[0]
            except EvalDomainError:
                out[k] = np.nan
        return out


def screen(named_exprs, point: dict, threshold: float = DEGENERATE):
    """Mask of usable points plus a record of why the others were excluded.

    A point is excluded when any of the named quantities is non-finite or
    smaller than ``threshold`` in magnitude.
    """
    n = len(next(iter(point.values())))
    ok = np.ones(n, bool)
    reasons = {}
    for name, e in named_exprs:
        v = values(e, point)
        bad = ~np.isfinite(v) | (np.abs(v) < threshold)
        for k in np.flatnonzero(bad & ok):
            reasons[int(k)] = name
        ok &= ~bad
    excluded = [
        {"point": {c: float(point[c][k]) for c in point}, "reason": f"{reasons[k]} vanishes or is undefined"}
        for k in sorted(reasons)
    ]
    return ok, excluded
