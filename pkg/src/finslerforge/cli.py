"""Command-line front end: ``finslerforge <command> --config FILE [--out DIR]``.

Every command writes ``<command>-report.json`` (key-ordered, shortest
round-trip floats) and, where it samples a grid, ``<command>.csv``.
Exit status: 0 all checks pass, 1 a check failed, 2 configuration
error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import brane as br
from . import hl_model as hl
from .dconnection import (
    canonical_dconnection,
    compat_residual,
    curvature_and_ricci,
    levicivita_frame,
    torsion_and_distortion,
)
from .errors import ConfigError, FinslerForgeError, NumericError
from .exprkit import Chart, evaluate_values, parse_expr
from .finsler_core import ExprDMetric, FinslerDMetric, hessian_metric
from .solver import (
    COORDS,
    GeneratingData,
    ShellAnsatz,
    SourceSpec,
    curvature_cross_check,
    generate_solution,
    lc_constraints_check,
    shell_residuals,
    tensor_grid,
)
from .solver.residuals import VARIANTS, ResidualReport

COMMANDS = (
    "hessian", "connection", "curvature", "verify-solution",
    "generate-solution", "brane", "mdr", "hl-action",
)
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


# ----------------------------------------------------------------------
# reports


@dataclass
class Check:
    name: str
    max_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.max_residual < self.tol)

    def as_dict(self):
        return {"name": self.name, "max_residual": self.max_residual, "tol": self.tol, "pass": self.passed}


@dataclass
class Report:
    command: str
    config: dict
    checks: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    measurements: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    wall_time: float | None = None

    def check(self, name, value, tol):
        self.checks.append(Check(name, float(value), float(tol)))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self):
        warnings = list(self.warnings)
        if not self.checks:
            warnings.append("no checks were run")
        out = {
            "command": self.command,
            "config": self.config,
            "checks": [c.as_dict() for c in self.checks],
            "n_checks": len(self.checks),
            "pass": self.passed,
            "warnings": warnings,
            "measurements": self.measurements,
            "outputs": sorted(self.outputs),
        }
        if self.wall_time is not None:
            out["wall_time_s"] = self.wall_time
        return out


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def report_text(r: Report) -> str:
    return json.dumps(_jsonable(r.as_dict()), sort_keys=True, indent=2, allow_nan=False) + "\n"


def emit_report(r: Report, path) -> Path:
    """Write the report as deterministic JSON; empty check lists also warn on stderr."""
    path = Path(path)
    if not r.checks:
        print(f"finslerforge: warning: {r.command}: no checks were run", file=sys.stderr)
    path.write_text(report_text(r))
    return path


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


# ----------------------------------------------------------------------
# config helpers


@dataclass
class Options:
    out: Path
    tol: float | None
    grid_scale: float
    seed: int
    threads: int


def _tol(opts: Options, cfg: dict, default: float, key: str = "tol") -> float:
    if opts.tol is not None:
        return opts.tol
    return float(cfg.get(key, default))


def _number(cfg, key, default=None, path=None):
    v = cfg.get(key, default)
    if v is None:
        raise ConfigError("required number missing", path or key)
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {v!r}", path or key) from None


def _chart(cfg: dict) -> Chart:
    spec = cfg.get("chart")
    if spec is None:
        return Chart.tangent_bundle()
    try:
        return Chart(tuple(spec["base"]), tuple(spec["fiber"]))
    except (KeyError, TypeError):
        raise ConfigError("chart needs 'base' and 'fiber' name lists", "chart") from None


def _points(cfg: dict, coords, opts: Options) -> dict:
    """Explicit ``points`` (missing coordinates at 0) or seeded ``random`` points."""
    if "points" in cfg:
        pts = cfg["points"]
        unknown = sorted(set(pts) - set(coords))
        if unknown:
            raise ConfigError(f"undeclared coordinate {unknown[0]!r}", f"points.{unknown[0]}")
        arrays = [np.atleast_1d(np.asarray(pts.get(c, 0.0), float)) for c in coords]
        try:
            arrays = np.broadcast_arrays(*arrays)
        except ValueError:
            raise ConfigError("point coordinate lists differ in length", "points") from None
        return {c: a.copy() for c, a in zip(coords, arrays)}
    spec = cfg.get("random", {"count": 10})
    count = int(spec.get("count", 10))
    if count < 1:
        raise ConfigError("count must be at least 1", "random.count")
    ranges = spec.get("ranges", {})
    unknown = sorted(set(ranges) - set(coords))
    if unknown:
        raise ConfigError(f"undeclared coordinate {unknown[0]!r}", f"random.ranges.{unknown[0]}")
    rng = np.random.default_rng(opts.seed)
    out = {}
    for c in coords:
        lo, hi = ranges.get(c, (-1.0, 1.0))
        out[c] = rng.uniform(float(lo), float(hi), count)
    return out


def _point_rows(pts, coords):
    return np.stack([pts[c] for c in coords], axis=1)


def _dmetric(cfg: dict):
    chart = _chart(cfg)
    lstar = _number(cfg, "lstar", 1.0)
    if "F2" in cfg:
        return FinslerDMetric(parse_expr(str(cfg["F2"]), chart), chart, lstar)
    if "dmetric" in cfg:
        d = cfg["dmetric"]
        try:
            return ExprDMetric(chart, d["g"], d["h"], d["N"], lstar)
        except KeyError as exc:
            raise ConfigError("d-metric needs g, h and N", f"dmetric.{exc.args[0]}") from None
    raise ConfigError("give either F2 or dmetric", "F2")


# ----------------------------------------------------------------------
# commands


def cmd_hessian(cfg, opts, rep):
    chart = _chart(cfg)
    F2 = parse_expr(str(cfg.get("F2", "")), chart)
    pts = _points(cfg, chart.coords, opts)
    tol = _tol(opts, cfg, 1e-9)
    g = hessian_metric(F2, pts, chart)
    rep.check("hessian.symmetry", np.max(np.abs(g - np.swapaxes(g, -1, -2))), tol)
    y = np.stack([pts[c] for c in chart.fiber], axis=1)
    F = evaluate_values(F2, pts)
    euler = np.einsum("ba,bac,bc->b", y, g, y)
    rep.check("hessian.euler", np.max(np.abs(euler - F) / (1.0 + np.abs(F))), tol)
    beta = _number(cfg, "beta", 2.0)
    scaled = dict(pts)
    for c in chart.fiber:
        scaled[c] = beta * pts[c]
    gb = hessian_metric(F2, scaled, chart)
    rep.check("hessian.zero_homogeneity", np.max(np.abs(gb - g) / (1.0 + np.abs(g))), tol)
    m = len(chart.fiber)
    header = list(chart.coords) + [f"g_{a}{b}" for a in range(m) for b in range(m)]
    rows = np.concatenate([_point_rows(pts, chart.coords), g.reshape(len(g), -1)], axis=1)
    return header, rows.tolist()


def _connection_checks(dm, pts, cfg, opts, rep):
    conn = canonical_dconnection(dm, pts)
    rep.check("connection.compatibility", compat_residual(dm, conn, pts), _tol(opts, cfg, 1e-8))
    _, Z = torsion_and_distortion(dm, conn, pts)
    lc = levicivita_frame(dm, pts)
    dev = np.abs(np.asarray(conn.gamma) + Z - lc).reshape(len(lc), -1).max(axis=1)
    rep.check("connection.distortion", dev.max(), _tol(opts, cfg, 1e-5))
    return conn, dev


def cmd_connection(cfg, opts, rep):
    dm = _dmetric(cfg)
    coords = dm.chart.coords
    pts = _points(cfg, coords, opts)
    conn, dev = _connection_checks(dm, pts, cfg, opts, rep)
    n = dm.n
    Lh = np.asarray(conn.L_h).reshape(len(dev), -1)
    header = list(coords) + [f"L_{i}{j}{k}" for i in range(n) for j in range(n) for k in range(n)]
    header.append("distortion_dev")
    rows = np.concatenate([_point_rows(pts, coords), Lh, dev[:, None]], axis=1)
    return header, rows.tolist()


CURVATURE_SCALARS = ("R_check", "S_check", "sR")


def cmd_curvature(cfg, opts, rep):
    dm = _dmetric(cfg)
    coords = dm.chart.coords
    pts = _points(cfg, coords, opts)
    cp = curvature_and_ricci(dm, pts)
    vals = {k: np.atleast_1d(np.asarray(getattr(cp, k))) for k in CURVATURE_SCALARS}
    tol = _tol(opts, cfg, 1e-8)
    expect = cfg.get("expect", {})
    for name in sorted(expect):
        if name not in vals:
            raise ConfigError(f"unknown curvature scalar {name!r}", f"expect.{name}")
        target = parse_expr(str(expect[name]), dm.chart)
        want = np.broadcast_to(evaluate_values(target, pts), vals[name].shape)
        rep.check(f"curvature.{name}", np.max(np.abs(vals[name] - want)), tol)
    for k, v in vals.items():
        rep.measurements[f"max_abs_{k}"] = float(np.max(np.abs(v)))
    header = list(coords) + list(CURVATURE_SCALARS)
    rows = np.concatenate([_point_rows(pts, coords)] + [vals[k][:, None] for k in CURVATURE_SCALARS], axis=1)
    return header, rows.tolist()


def _grid(cfg, opts):
    if "grid" not in cfg:
        raise ConfigError("a grid is required", "grid")
    return tensor_grid(cfg["grid"], cfg.get("fixed"), opts.grid_scale)


def _chunks(grid, threads):
    n = len(grid[COORDS[0]])
    k = max(1, min(threads, n))
    bounds = np.linspace(0, n, k + 1).astype(int)
    return [{c: v[lo:hi] for c, v in grid.items()} for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


def _residuals(a, src, grid, variant, threads) -> ResidualReport:
    """Residuals over the grid, split across threads and merged in grid order."""
    parts = _chunks(grid, threads)
    if len(parts) == 1:
        return shell_residuals(a, src, grid, variant)
    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        reps = list(pool.map(lambda g: shell_residuals(a, src, g, variant), parts))
    reps_ok = [r for r in reps if r.families]
    excluded = [e for r in reps for e in r.excluded]
    if not reps_ok:
        return ResidualReport({}, {}, {}, excluded)
    fams = reps_ok[0].families.keys()
    per_point = {k: np.concatenate([r.per_point[k] for r in reps_ok]) for k in fams}
    points = {c: np.concatenate([r.points[c] for r in reps_ok]) for c in COORDS}
    families = {k: float(np.max(v)) for k, v in per_point.items()}
    return ResidualReport(families, per_point, points, excluded)


def _residual_checks(a, src, grid, cfg, opts, rep):
    variant = cfg.get("variant", "corrected")
    if variant not in VARIANTS:
        raise ConfigError(f"must be one of {list(VARIANTS)}", "variant")
    res = _residuals(a, src, grid, variant, opts.threads)
    tol = _tol(opts, cfg, 1e-6)
    for fam in sorted(res.families):
        rep.check(f"residual.{fam}", res.families[fam], tol)
    if res.excluded:
        rep.warnings.append(f"{len(res.excluded)} degenerate grid point(s) excluded")
        rep.measurements["excluded"] = res.excluded
    rep.measurements["grid_points"] = int(len(grid[COORDS[0]]))
    if cfg.get("lc_check"):
        lc = lc_constraints_check(a, grid, _tol(opts, cfg, 1e-8, "lc_tol"))
        for name in sorted(lc.violations):
            rep.check(f"levi_civita.{name}", lc.violations[name], lc.tol)
    if not res.families:
        return list(COORDS), []
    fams = sorted(res.families)
    header = list(COORDS) + fams
    rows = np.stack([res.points[c] for c in COORDS] + [res.per_point[f] for f in fams], axis=1)
    return header, rows.tolist()


def cmd_verify_solution(cfg, opts, rep):
    a = ShellAnsatz.from_config(cfg)
    src = SourceSpec.from_config(cfg)
    return _residual_checks(a, src, _grid(cfg, opts), cfg, opts, rep)


def cmd_generate_solution(cfg, opts, rep):
    src = SourceSpec.from_config(cfg)
    gd = GeneratingData.from_config(cfg)
    grid = _grid(cfg, opts)
    a = generate_solution(gd, src, grid)
    out = _residual_checks(a, src, grid, cfg, opts, rep)
    k = int(cfg.get("cross_check_points", 0))
    if k > 0:
        n = len(grid[COORDS[0]])
        idx = np.unique(np.linspace(0, n - 1, min(k, n)).round().astype(int))
        sub = {c: v[idx] for c, v in grid.items()}
        tol = _tol(opts, cfg, 1e-5, "cross_tol")
        for name, dev in sorted(curvature_cross_check(a, src, sub).items()):
            rep.check(f"cross_check.{name}", dev, tol)
    return out


def cmd_brane(cfg, opts, rep):
    p = br.brane_profile(
        _number(cfg, "M", 1.0),
        _number(cfg, "Lambda", 1.0),
        int(cfg.get("m", 2)),
        _number(cfg, "phi0", 1.0),
        cfg.get("a_mode", "solve"),
        cfg.get("a"),
        _number(cfg, "lstar", 1.0),
    )
    rep.check("profile.phi2_origin", abs(float(p("phi2", 0.0)) - 1.0), 1e-15)
    rep.check("profile.lhbar_origin", abs(float(p("lhbar", 0.0)) - 1.0), 1e-15)
    target = 40.0 * p.M**4
    rep.check("profile.width", abs(3.0 * p.Lambda * p.eps2 - target) / target, 1e-12)
    span = _number(cfg, "span", 5.0)
    count = max(2, int(round(int(cfg.get("samples", 201)) * opts.grid_scale)))
    s = np.linspace(-span * p.eps, span * p.eps, count)
    r = br.brane_sources_and_conservation(p, s)
    rep.measurements.update(a=p.a, eps=p.eps, cond3a_max_residual=r.max_residual)
    if r.max_residual > 1e-7:
        rep.warnings.append(
            f"conservation residual {r.max_residual!r} exceeds 1e-7 (measured, not asserted)"
        )
    if "metric" in cfg:
        mc = cfg["metric"]
        a = ShellAnsatz.from_config(mc)
        pts = _points(mc, COORDS, opts)
        signs = tuple(int(x) for x in mc.get("signs78", (1, 1)))
        G = br.assemble_brane_metric(a, p, pts, signs78=signs)
        rep.check("metric.symmetry", np.max(np.abs(G - np.swapaxes(G, 1, 2))), 1e-12)
    return list(br.CSV_HEADER), r.rows()


MDR_PARAMS = ("kappa", "mu", "varpi", "Lambda", "lam", "eta", "sign")
MDR_HEADER = ("branch", "kappa", "mu", "varpi", "Lambda", "lambda", "eta", "sign", "p", "omega2")


def _sweep(spec, path):
    tag = spec.get("branch")
    if tag not in hl.BRANCHES:
        raise ConfigError(f"unknown branch {tag!r}", f"{path}.branch")
    lists = []
    for k in MDR_PARAMS:
        v = spec.get(k, getattr(hl.MdrBranch, k, None) if k != "sign" else None)
        lists.append(v if isinstance(v, list) else [v])
    for combo in itertools.product(*lists):
        kw = dict(zip(MDR_PARAMS, combo))
        if kw["sign"] is not None:
            kw["sign"] = int(kw["sign"])
        yield hl.MdrBranch(tag, **kw, c=spec.get("c"))


def cmd_mdr(cfg, opts, rep):
    try:
        lo, hi, count = cfg.get("p", (0.0, 2.0, 21))
    except (TypeError, ValueError):
        raise ConfigError("expected [min, max, count]", "p") from None
    count = max(1, int(round(int(count) * opts.grid_scale)))
    p = np.linspace(float(lo), float(hi), count)
    tol = _tol(opts, cfg, 1e-12)
    rows, worst = [], {}
    for i, spec in enumerate(cfg.get("sweeps", [])):
        for b in _sweep(spec, f"sweeps[{i}]"):
            w2 = np.broadcast_to(hl.mdr_omega(b, p), p.shape)
            sign = "" if b.sign is None else b.sign
            rows += [(b.tag, b.kappa, b.mu, b.varpi, b.Lambda, b.lam, b.eta, sign, pk, wk) for pk, wk in zip(p, w2)]
            if b.tag == "scalar-low-p":
                key = "scalar-low-p.omega2_max"
                worst[key] = max(worst.get(key, -math.inf), float(w2.max()))
            elif b.tag == "scalar-high-p" and b.lam == 1.0:
                key = "scalar-high-p.lambda1_abs"
                worst[key] = max(worst.get(key, 0.0), float(np.abs(w2).max()))
            elif b.tag.startswith("tensor"):
                key = f"{b.tag}.omega2_at_zero"
                worst[key] = max(worst.get(key, 0.0), abs(float(hl.mdr_omega(b, 0.0))))
    for key in sorted(worst):
        # the low-momentum scalar branch must be strictly negative: pass iff max < 0
        rep.check(key, worst[key], 0.0 if key.startswith("scalar-low-p") else tol)
    rep.measurements["rows"] = len(rows)
    return list(MDR_HEADER), rows


HL_CHECKS = ("cotton_vanishes", "gr_kinetic")


def cmd_hl_action(cfg, opts, rep):
    fc = dict(cfg.get("fields", {}))
    try:
        f = hl.HLFields(**fc)
    except TypeError as exc:
        raise ConfigError(str(exc), "fields") from None
    coords = hl.HL_CHART.coords
    pts = _points(cfg, coords, opts)
    kin, pot = hl.hl_action_density(f, pts)
    inv = hl.curvature_invariants_3d(f, pts)
    tol = _tol(opts, cfg, 1e-12)
    for name in cfg.get("expect", []):
        if name not in HL_CHECKS:
            raise ConfigError(f"unknown check {name!r}; choose from {list(HL_CHECKS)}", "expect")
        if name == "cotton_vanishes":
            rep.check("hl.cotton", np.max(np.abs(inv.cotton)), _tol(opts, cfg, 1e-6, "cotton_tol"))
        else:
            if f.lam != 1.0:
                raise ConfigError("the GR kinetic comparison needs lam = 1", "fields.lam")
            g = inv.extra["g"]
            gi = np.linalg.inv(g)
            K = inv.K
            KK = np.einsum("bij,bia,bjc,bac->b", K, gi, gi, K)
            tr = np.einsum("bij,bij->b", gi, K)
            gr = 2.0 / f.kappa**2 * np.sqrt(np.abs(np.linalg.det(g))) * inv.extra["N"] * (KK - tr**2)
            rep.check("hl.gr_kinetic", np.max(np.abs(kin - gr) / (1.0 + np.abs(gr))), tol)
    try:
        c = hl.gr_limit_constants(f.kappa, f.mu, f.Lambda, f.lam)
        rep.measurements.update(c=c.c, G=c.G, Lambda_GR=c.Lambda_GR)
    except NumericError as exc:
        rep.warnings.append(f"no GR limit: {exc}")
    header = list(coords) + ["kinetic", "potential", "R"]
    rows = np.concatenate([_point_rows(pts, coords), np.stack([kin, pot, inv.R], axis=1)], axis=1)
    return header, rows.tolist()


DISPATCH = {
    "hessian": cmd_hessian,
    "connection": cmd_connection,
    "curvature": cmd_curvature,
    "verify-solution": cmd_verify_solution,
    "generate-solution": cmd_generate_solution,
    "brane": cmd_brane,
    "mdr": cmd_mdr,
    "hl-action": cmd_hl_action,
}


# ----------------------------------------------------------------------
# entry point


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", "config") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}: {exc.msg}", "config") from None
    if not isinstance(cfg, dict):
        raise ConfigError("top level must be an object", "config")
    return cfg


def _threads() -> int:
    raw = os.environ.get("FINSLERFORGE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"expected a positive integer, got {raw!r}", "FINSLERFORGE_THREADS") from None
    if n < 1:
        raise ConfigError("must be at least 1", "FINSLERFORGE_THREADS")
    return n


def run(command: str, cfg: dict, opts: Options, timing: bool = False) -> Report:
    tag = cfg.get("command", command)
    if tag != command:
        raise ConfigError(f"config is for {tag!r}, not {command!r}", "command")
    overrides = {"tol": opts.tol, "grid_scale": opts.grid_scale, "seed": opts.seed}
    rep = Report(command, {"file": cfg, "overrides": overrides})
    t0 = time.perf_counter()
    header, rows = DISPATCH[command](cfg, opts, rep)
    if rows:
        name = f"{command}.csv"
        _write_csv(opts.out / name, header, rows)
        rep.outputs.append(name)
    if timing:
        rep.wall_time = time.perf_counter() - t0
    return rep


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="finslerforge", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default=".", help="output directory (default: current)")
    ap.add_argument("--tol", type=float, help="override the residual tolerance")
    ap.add_argument("--grid-scale", type=float, default=1.0, help="multiply grid and sample counts")
    ap.add_argument("--seed", type=int, help="seed for random probe points (default: config or 0)")
    ap.add_argument("--timing", action="store_true", help="record wall time (breaks byte-identity)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if not args.grid_scale > 0:
            raise ConfigError("must be positive", "--grid-scale")
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        opts = Options(out, args.tol, args.grid_scale, seed, _threads())
        rep = run(args.command, cfg, opts, args.timing)
        path = emit_report(rep, out / f"{args.command}-report.json")
    except ConfigError as exc:
        print(f"finslerforge: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"finslerforge: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FinslerForgeError as exc:
        print(f"finslerforge: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    status = "pass" if rep.passed else "FAIL"
    print(f"{args.command}: {status} ({len(rep.checks)} checks) -> {path}")
    for c in rep.checks:
        if not c.passed:
            print(f"  failed {c.name}: {c.max_residual!r} >= {c.tol!r}")
    return EXIT_PASS if rep.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
