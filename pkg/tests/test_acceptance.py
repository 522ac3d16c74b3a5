"""The eleven acceptance criteria, each at its stated tolerance.

Every test records a one-line verdict that the session summary prints
(see conftest.py); running this file directly prints the same lines.
"""
from __future__ import annotations

import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

import conftest
from oracles import (
    TB,
    TB_BASE,
    TB_FIBER,
    ExprMatrix,
    christoffel_fd,
    fd_exact,
    frame_levicivita_oracle,
    quadratic_F2,
    random_points,
    random_spd_poly,
    random_tree,
)

from finslerforge import brane, hl_model as hl
from finslerforge.dconnection import canonical_dconnection, compat_residual, torsion_and_distortion
from finslerforge.exprkit import Chart, eval_jet, evaluate, jet_space, parse_expr, sqrt, to_text
from finslerforge.finsler_core import (
    ExprDMetric,
    FinslerDMetric,
    MdrSpec,
    finsler_from_mdr,
    hessian_metric,
    semi_spray_and_nconnection,
)
from finslerforge.solver import (
    GeneratingData,
    curvature_cross_check,
    generate_solution,
    lc_constraints_check,
    shell_residuals,
    source_algebra,
    tensor_grid,
)

SAMPLES = Path(__file__).resolve().parents[1] / "src" / "finslerforge" / "samples"


def record(k, ok, detail):
    conftest.CRITERIA[k] = (bool(ok), detail)
    print(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


# ----------------------------------------------------------------------
# 1. quadratic reduction


def test_criterion_01_quadratic_reduction():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst_N = worst_L = 0.0
    for _ in range(5):
        rows = random_spd_poly(rng, TB_BASE, 4)
        F2 = parse_expr(quadratic_F2(rows), TB)
        pts = random_points(rng, TB, 100, {y: (-1.0, 1.0) for y in TB_FIBER})
        gx = ExprMatrix(rows, TB)
        gamma = christoffel_fd(gx, pts, TB_BASE)  # base Christoffels of g(x)
        y = np.stack([pts[c] for c in TB_FIBER], axis=1)
        N_ref = np.einsum("bkjm,bm->bkj", gamma, y)
        N = semi_spray_and_nconnection(F2, pts).N
        worst_N = max(worst_N, np.max(np.abs(N - N_ref)) / np.max(np.abs(N_ref)))
        L = canonical_dconnection(FinslerDMetric(F2), pts).L_h
        worst_L = max(worst_L, np.max(np.abs(L - gamma)) / np.max(np.abs(gamma)))
    dt = time.perf_counter() - t0
    ok = worst_N < 1e-6 and worst_L < 1e-6 and dt < 30
    record(1, ok, f"rel err N {worst_N:.2e}, L {worst_L:.2e} (< 1e-6); {dt:.1f} s (< 30 s)")


# ----------------------------------------------------------------------
# 2. metric compatibility


def _quartic_F2(rng):
    """F^2 = sqrt(P) with P a positive quartic in y whose coefficients are polynomials in x."""
    rows = random_spd_poly(rng, TB_BASE, 4, degree=1, scale=0.1)
    quad = quadratic_F2(rows)
    quart = " + ".join(
        f"({rng.uniform(0.1, 0.4):.3f} + {rng.uniform(-0.05, 0.05):.3f}*{rng.choice(TB_BASE)})*{y}^4"
        for y in TB_FIBER
    )
    return parse_expr(f"sqrt(({quad})^2 + {quart})", TB)


def test_criterion_02_metric_compatibility():
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(20):
        dm = FinslerDMetric(_quartic_F2(rng))
        pts = random_points(rng, TB, 50, {y: (0.3, 1.0) for y in TB_FIBER})
        worst = max(worst, compat_residual(dm, canonical_dconnection(dm, pts), pts))
    record(2, worst < 1e-8, f"max compat_residual {worst:.2e} over 20 metrics x 50 points (< 1e-8)")


# ----------------------------------------------------------------------
# 3. distortion identity


def test_criterion_03_distortion_identity():
    rng = np.random.default_rng(303)
    chart = Chart.tangent_bundle()
    g = random_spd_poly(rng, TB, 4, scale=0.1)
    h = random_spd_poly(rng, TB, 4, scale=0.1)
    N = [[f"{rng.uniform(-0.3, 0.3):.3f}*{rng.choice(TB)} + {rng.uniform(-0.2, 0.2):.3f}*{rng.choice(TB)}*{rng.choice(TB)}"
          for _ in range(4)] for _ in range(4)]
    dm = ExprDMetric(chart, g, h, N)
    pts = random_points(rng, TB, 100)
    conn = canonical_dconnection(dm, pts)
    _, Z = torsion_and_distortion(dm, conn, pts)
    ref = frame_levicivita_oracle(ExprMatrix(g, TB), ExprMatrix(h, TB), ExprMatrix(N, TB), pts, TB, 4)
    err = float(np.max(np.abs(conn.gamma + Z - ref)))
    record(3, err < 1e-5, f"max |Gamma + Z - LC| {err:.2e} over 100 points (< 1e-5)")


# ----------------------------------------------------------------------
# 4. homogeneity


def _homogeneity_functions():
    randers = parse_expr(
        "(sqrt((1 + 0.1*x1^2)*y1^2 + y2^2 + (1 + 0.2*x2)*y3^2 + y4^2 + 0.1*x3*y1*y2) + 0.1*x4*y1 + 0.05*y3)^2", TB
    )
    quartic = parse_expr("sqrt(y1^4 + (1 + 0.1*x1^2)*y2^4 + y3^4 + 2*y4^4 + 0.3*y1^2*y2^2)", TB)
    spec = MdrSpec(
        g=[["1 + 0.1*x2^2", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]],
        q={(2, 2, 2, 2): 0.1, (3, 3, 4, 4): "0.05*x1", (2, 3, 3, 3): 0.02},
        r=2,
    )
    return {"Randers": randers, "quartic": quartic, "MDR": finsler_from_mdr(spec)}


def test_criterion_04_homogeneity():
    rng = np.random.default_rng(404)
    ranges = {"y1": (0.05, 0.2), "y2": (0.5, 1.5), "y3": (0.5, 1.5), "y4": (0.5, 1.5)}
    pts = random_points(rng, TB, 30, ranges)
    space = jet_space(TB_FIBER, 1)
    worst = {}
    for name, F2 in _homogeneity_functions().items():
        F = sqrt(F2)
        g0 = hessian_metric(F2, pts)
        F0 = evaluate(F, space, pts).value
        for beta in (0.5, 2.0, 7.0):
            sp = dict(pts)
            for y in TB_FIBER:
                sp[y] = beta * pts[y]
            j = evaluate(F, space, sp)
            euler = sum(sp[y] * j.partial(y) for y in TB_FIBER) - j.value
            scale = np.abs(j.value - beta * F0)
            hom = np.abs(hessian_metric(F2, sp) - g0)
            worst[name] = max(
                worst.get(name, 0.0),
                float(np.max(np.abs(euler) / np.maximum(1.0, np.abs(j.value)))),
                float(np.max(scale / np.maximum(1.0, np.abs(j.value)))),
                float(np.max(hom / np.maximum(1.0, np.abs(g0)))),
            )
    ok = max(worst.values()) < 1e-9
    record(4, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " (< 1e-9)")


# ----------------------------------------------------------------------
# 5. solution generator


GEN_FAMILIES = {
    "exponential": (
        GeneratingData(
            phi=("0.5*y3 + 0.1*x1*y3 + 0.2*x2", "0.3*y5 + 0.1*x1*y5 + 0.05*y3", "0.4*y7 + 0.1*x2*y7 + 0.1*y5"),
            h0=(1.0, 2.0, 1.5),
            n0=(["x2", "0.5"], None, None),
            n1=(["1", "x1"], ["1", "0", "0.5", "0"], ["1", "0", "0", "0", "0", "x2"]),
            lower=(-1.0, -1.0, -1.0),
            signs=(1, -1, 1),
        ),
        ("0.3", "0.2", "-0.1", "0.25"),
    ),
    "polynomial": (
        GeneratingData(
            phi=("0.3*y3*y3 + 0.5*y3 + 0.1*x1*x2", "0.2*y5*y5 + y5 + 0.1*x1", "0.3*y7 + 0.05*y7*y7*y7 + 0.1*y3"),
            h0=(1.0, 2.0, 1.5),
            n0=(["x2", "0.5"], None, None),
            n1=(["1", "x1"], ["1", "0", "0.5", "0"], None),
            lower=(0.0, 0.0, 0.0),
            signs=(1, 1, -1),
        ),
        ("0.3 + 0.1*y3", "0.2", "-0.1", "0.25"),
    ),
    "trigonometric": (
        GeneratingData(
            phi=("0.5*y3 + 0.2*sin(y3) + 0.1*cos(x1)*y3", "0.4*y5 + 0.1*sin(y5 + x2)", "0.3*y7 + 0.1*cos(y7) + 0.05*sin(y3)"),
            h0=(-0.5, 1.0, -1.0),
            n0=(None, ["0.1", "0", "0", "0"], None),
            n1=(["cos(x1)", "0"], None, ["0", "1", "0", "0", "0.2", "0"]),
            lower=(0.0, 0.0, 0.0),
            signs=(-1, 1, 1),
        ),
        ("0.4", "0.1", "0.2", "-0.15"),
    ),
}


def test_criterion_05_solution_generator():
    rng = np.random.default_rng(505)
    t0 = time.perf_counter()
    grid = tensor_grid({"x1": [-0.5, 0.5, 9], "y3": [0.1, 0.9, 9], "y5": [0.1, 0.5, 9]}, {"x2": 0.2, "y7": 0.4})
    res, cross = {}, {}
    for name, (gd, ups) in GEN_FAMILIES.items():
        src = source_algebra(*(parse_expr(u) for u in ups))
        a = generate_solution(gd, src, grid)
        rep = shell_residuals(a, src, grid)
        assert not rep.excluded
        res[name] = rep.max
        pts = random_points(rng, ("x1", "x2", "y3", "y5", "y7"), 20, {
            "y3": (0.1, 0.9), "y5": (0.1, 0.5), "y7": (0.1, 0.5),
        })
        cross[name] = max(curvature_cross_check(a, src, pts).values())
    dt = time.perf_counter() - t0
    ok = max(res.values()) < 1e-6 and max(cross.values()) < 1e-5 and dt < 60
    detail = ", ".join(f"{k} res {res[k]:.1e} cross {cross[k]:.1e}" for k in res)
    record(5, ok, f"{detail}; {dt:.1f} s (< 60 s)")


# ----------------------------------------------------------------------
# 6. Levi-Civita filter


def test_criterion_06_levi_civita_filter():
    gd = GeneratingData(
        phi=("0.5*y3 + 0.1*y3*y3", "0.3*y5 + 0.2*exp(0.5*y5)", "0.4*y7 + 0.1*sin(y7)"),
        h0=(1.0, 2.0, 1.5),
        n0=(["x1", "x2"], ["x1", "x2", "0", "0.3"], ["0.5", "0", "0", "0", "0", "0"]),
        lower=(0.0, 0.0, 0.0),
    )
    src = source_algebra(*(parse_expr(u) for u in ("0.3", "0.2", "-0.1", "0.25")))
    grid = tensor_grid({"x1": [-0.5, 0.5, 5], "x2": [-0.5, 0.5, 5], "y3": [0.1, 0.9, 5], "y5": [0.1, 0.5, 3], "y7": [0.1, 0.5, 3]})
    rep = lc_constraints_check(generate_solution(gd, src, grid), grid)
    record(6, rep.ok and rep.max < 1e-8, f"max violation {rep.max:.1e} over {len(rep.violations)} constraints (< 1e-8)")


# ----------------------------------------------------------------------
# 7. brane profile


def test_criterion_07_brane_profile():
    worst0 = worst_eps = 0.0
    cond = {}
    for M, Lam in ((1.0, 1.0), (0.7, 2.5), (1.3, 0.4)):
        p = brane.brane_profile(M, Lam)
        worst0 = max(worst0, abs(float(p("phi2", 0.0)) - 1.0), abs(float(p("lhbar", 0.0)) - 1.0))
        worst_eps = max(worst_eps, abs(p.eps2 - 40 * M**4 / (3 * Lam)) / p.eps2)
        s = np.linspace(-5 * p.eps, 5 * p.eps, 401)
        cond[(M, Lam)] = brane.brane_sources_and_conservation(p, s).max_residual
    ok = worst0 <= 1e-15 and worst_eps <= 1e-12
    detail = f"origin dev {worst0:.1e} (<= 1e-15), width dev {worst_eps:.1e} (<= 1e-12); measured cond3a max " + ", ".join(
        f"{v:.3g}" for v in cond.values()
    )
    record(7, ok, detail)


# ----------------------------------------------------------------------
# 8. dispersion signs


def test_criterion_08_mdr_signs():
    rng = np.random.default_rng(808)
    low = []
    for _ in range(1000):
        lam = rng.uniform(-3, 3)
        while abs(1 - 3 * lam) < 1e-3:
            lam = rng.uniform(-3, 3)
        b = hl.MdrBranch("scalar-low-p", kappa=rng.uniform(0.1, 3), mu=rng.uniform(0.1, 3),
                         Lambda=rng.choice([-1, 1]) * rng.uniform(0.1, 3), lam=lam)
        low.append(float(hl.mdr_omega(b, rng.uniform(0, 5))))
    p = np.linspace(0, 5, 101)
    high = np.max(np.abs(hl.mdr_omega(hl.MdrBranch("scalar-high-p", kappa=1.7, mu=0.8, lam=1.0), p)))
    jump = zero = 0.0
    for tag in ("tensor-db", "tensor-beyond"):
        for sign in (1, -1):
            b = hl.MdrBranch(tag, kappa=1.2, mu=0.9, varpi=1.1, lam=0.0, eta=0.4, sign=sign)
            zero = max(zero, abs(float(hl.mdr_omega(b, 0.0))))
            q = rng.uniform(0, 5, 200)
            # continuity: the jump over a step shrinks in proportion to the step
            d1 = np.abs(hl.mdr_omega(b, q + 1e-5) - hl.mdr_omega(b, q))
            d2 = np.abs(hl.mdr_omega(b, q + 1e-7) - hl.mdr_omega(b, q))
            jump = max(jump, float(np.max(d2 / np.maximum(d1, 1e-300))))
    ok = max(low) < 0 and high == 0.0 and zero == 0.0 and jump < 0.02
    record(8, ok, f"max scalar-low-p omega2 {max(low):.3g} (< 0); high-p at lambda=1 {high:.1e}; "
                  f"tensor omega2(0) {zero:.1e}, jump ratio for 100x smaller step {jump:.3f} (< 0.02)")


# ----------------------------------------------------------------------
# 9. HL action


K_CONFIGS = (
    np.diag([0.7, 0.0, 0.0]),
    np.diag([1.0, -2.0, 0.5]),
    np.array([[0.3, 0.2, -0.1], [0.2, -0.4, 0.05], [-0.1, 0.05, 0.6]]),
)


def _fields_with_K(K, lapse=1.0, lam=1.0):
    # g = delta + 2 N t K at t = x1 = 0 gives extrinsic curvature K
    metric = [[f"{float(i == j)!r} + {float(2 * lapse * K[i, j])!r}*x1" for j in range(3)] for i in range(3)]
    return hl.HLFields(lapse=repr(lapse), metric=metric, kappa=1.3, lam=lam)


def test_criterion_09_hl_action():
    worst = 0.0
    pt = {"x1": 0.0, "x2": 0.1, "x3": -0.2, "x4": 0.3}
    for K, N in zip(K_CONFIGS, (1.0, 2.0, 0.5)):
        f = _fields_with_K(K, N)
        kin, _ = hl.hl_action_density(f, pt)
        hand = 2 / f.kappa**2 * N * (np.sum(K * K) - np.trace(K) ** 2)
        worst = max(worst, abs(float(kin) - hand))
    conf = hl.HLFields(metric=[["exp(2*(0.3*x2 + 0.1*x3*x4))" if i == j else "0" for j in range(3)] for i in range(3)])
    rng = np.random.default_rng(909)
    pts = {c: rng.uniform(-0.5, 0.5, 20) for c in ("x1", "x2", "x3", "x4")}
    cot = float(np.max(np.abs(hl.curvature_invariants_3d(conf, pts).cotton)))
    record(9, worst < 1e-12 and cot < 1e-6, f"kinetic vs GR form {worst:.1e} (< 1e-12); conformally flat Cotton {cot:.1e} (< 1e-6)")


# ----------------------------------------------------------------------
# 10. parser and AD


def test_criterion_10_parser_and_ad():
    rng = np.random.default_rng(1010)
    names = ("x1", "x2", "y1", "y2")
    bad = 0
    for _ in range(1000):
        e = random_tree(rng, names, 5)
        if parse_expr(to_text(e), names) != e:
            bad += 1
    worst = 0.0
    for _ in range(500):
        e = random_tree(rng, names, 4, polynomial=True)
        pt = {c: float(rng.uniform(-1, 1)) for c in names}
        j = eval_jet(e, pt, 2, wrt=names)
        for a in names:
            fd = fd_exact(e, pt, a)
            worst = max(worst, abs(j.partial(a) - fd) / max(1.0, abs(fd)))
            for b in names:
                fd2 = fd_exact(e, pt, a, b)
                worst = max(worst, abs(j.partial(a, b) - fd2) / max(1.0, abs(fd2)))
    record(10, bad == 0 and worst < 1e-5, f"round-trip failures {bad}/1000; AD vs FD rel {worst:.1e} (< 1e-5)")


# ----------------------------------------------------------------------
# 11. determinism


def test_criterion_11_determinism(tmp_path):
    import json

    mismatched = []
    samples = sorted(SAMPLES.glob("*.json"))
    assert samples
    for cfg in samples:
        command = json.loads(cfg.read_text())["command"]
        outs = []
        for run in (1, 2):
            out = tmp_path / f"{cfg.stem}-{run}"
            proc = subprocess.run(
                [sys.executable, "-m", "finslerforge.cli", command, "--config", str(cfg), "--out", str(out)],
                capture_output=True, text=True,
            )
            assert proc.returncode == 0, proc.stderr
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        if outs[0] != outs[1]:
            mismatched.append(cfg.name)
    record(11, not mismatched, f"{len(samples)} sample configs run twice; differing outputs: {mismatched or 'none'}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
