import numpy as np
import pytest

from oracles import fd_second

from finslerforge import brane
from finslerforge.errors import ConfigError
from finslerforge.solver import ShellAnsatz

S = np.linspace(-4.0, 4.0, 81)


@pytest.fixture(scope="module")
def prof():
    return brane.brane_profile(1.0, 1.0)


def test_origin_and_width(prof):
    assert prof("phi2", 0.0) == 1.0 and prof("lhbar", 0.0) == 1.0
    assert prof.eps2 == pytest.approx(40 / 3, rel=1e-14)


def test_phi2_tends_to_a():
    p = brane.brane_profile(1.0, 1.0, a_mode="given", a=2.5)
    assert p("phi2", 1e6) == pytest.approx(2.5, rel=1e-9)
    assert p("lhbar", 1e6) == pytest.approx(0.0, abs=1e-12)


def test_solved_a_flattens_phi_at_eps(prof):
    f = lambda pt: np.sqrt((3 * prof.eps2 + prof.a * pt["s"] ** 2) / (3 * prof.eps2 + pt["s"] ** 2))
    curv = fd_second(f, {"s": np.array([prof.eps])}, "s", "s", 1e-3)[0]
    assert abs(curv) < 1e-8
    assert prof.a == pytest.approx(1.0, abs=1e-5)


def test_sources_are_even(prof):
    for name in ("K1", "K2", "phi2", "hbar"):
        np.testing.assert_allclose(prof(name, S), prof(name, -S), rtol=1e-14, atol=1e-14)


def test_upsilon_assembly():
    p = brane.brane_profile(0.8, 2.0, m=3, phi0=1.5, a_mode="given", a=1.2)
    u1, u2 = p.upsilon(S)
    scale = 0.8 ** -(3 + 2)
    np.testing.assert_allclose(u1 + scale * p("K1", S), 2.0, rtol=1e-13)
    np.testing.assert_allclose(u2 + scale * p("K2", S), 2.0, rtol=1e-13)
    # far from the brane only the cosmological term survives in K
    assert scale * p("K1", 1e5) == pytest.approx(2.0 + 2 * 1.5 * 3 * (1.5 * 5 - 3) / (3 * p.eps2), rel=1e-6)


def test_conservation_report(prof):
    rep = brane.brane_sources_and_conservation(prof, S)
    rows = rep.rows()
    assert len(rows) == len(S) and len(rows[0]) == len(brane.CSV_HEADER)
    assert rep.max_residual == pytest.approx(np.max(rep.cons_residual))
    assert rep.cons_residual[len(S) // 2] == pytest.approx(0.0, abs=1e-15)
    assert rep.max_residual > 0


def test_profile_arguments_validated():
    with pytest.raises(ConfigError):
        brane.brane_profile(1.0, 1.0, a_mode="given")
    with pytest.raises(ConfigError):
        brane.brane_profile(1.0, 1.0, a_mode="guess")
    with pytest.raises(ConfigError):
        brane.brane_profile(-1.0, 1.0)
    with pytest.raises(ConfigError):
        brane.brane_profile(1.0, 1.0, m=1)


@pytest.fixture(scope="module")
def ansatz():
    return ShellAnsatz.build(
        g1="1 + 0.1*x1^2", g2="2", h={3: "1.5", 4: "-1 - 0.1*y3", 5: "2", 6: "1", 7: "0.5", 8: "3"},
        w=[["0.2*x1", "0.1"], ["0.3", "0", "0.7", "0"], None],
        n=[["0.05", "x2"], None, ["0.1", "0.2", "0", "0", "0", "0"]],
    )


PT = {"x1": 0.4, "x2": -0.3, "y3": 0.2, "y4": 0.0, "y5": 0.5, "y6": 0.0, "y7": 0.1, "y8": 0.0}


def test_brane_metric_congruence(ansatz, prof):
    G = brane.assemble_brane_metric(ansatz, prof, PT)[0]
    assert np.array_equal(G, G.T)
    r = prof("hbar", 0.5) / prof("phi2", 0.5)
    d = np.array([1 + 0.016, 2, 1.5, -1.02, 2 * r, r, 0.5 * r, 3 * r])
    N = np.array([[0.08, 0.1], [0.05, -0.3], [0.3, 0], [0, 0], [0, 0], [0.1, 0.2]])
    # by hand: top-left block g + sum_a h_a N^a_i N^a_j, mixed blocks h_a N^a_i
    top = np.diag(d[:2]) + np.einsum("a,ai,aj->ij", d[2:], N, N)
    np.testing.assert_allclose(G[:2, :2], top, rtol=1e-13)
    np.testing.assert_allclose(G[2:, :2], d[2:, None] * N, rtol=1e-13)
    np.testing.assert_allclose(np.diag(G)[2:], d[2:], rtol=1e-13)
    # the y-components of the shell-1/2 coefficients never enter
    assert G[4, 2] == 0.0 and G[6, 4] == 0.0


def test_brane_metric_independent_of_lstar(ansatz):
    pts = {k: np.full(3, v) for k, v in PT.items()}
    pts["y5"] = np.array([0.0, 1.0, 3.0])
    ref = brane.assemble_brane_metric(ansatz, brane.brane_profile(1.0, 1.0), pts)
    for l in (1e-3, 0.1, 10.0):
        G, hs = brane.assemble_brane_metric(ansatz, brane.brane_profile(1.0, 1.0, lstar=l), pts, with_h=True)
        np.testing.assert_allclose(G, ref, rtol=1e-12)
        # the coefficients themselves carry 1/l
        np.testing.assert_allclose(l * hs[5], ref[:, 4, 4], rtol=1e-12)


def test_brane_metric_sign_flips(ansatz, prof):
    G = brane.assemble_brane_metric(ansatz, prof, PT, signs78=(-1, 1))[0]
    G0 = brane.assemble_brane_metric(ansatz, prof, PT)[0]
    assert G[6, 6] == -G0[6, 6] and G[7, 7] == G0[7, 7]


def test_custom_q(ansatz, prof):
    G = brane.assemble_brane_metric(ansatz, prof, PT, q={5: "y7", 6: "1", 7: "1", 8: "1"})[0]
    r = prof("hbar", 0.5) / prof("phi2", 0.5)
    assert G[4, 4] == pytest.approx(0.1 * r)


def test_fiber_bracket_is_the_whole_difference(ansatz):
    # dropping the shell-1/2 fiber terms removes exactly l^2 (hbar/phi^2) sum (N^a_i N^a_j q_a)
    for l in (0.5, 2.0):
        p = brane.brane_profile(1.0, 1.0, lstar=l)
        G = brane.assemble_brane_metric(ansatz, p, PT)[0]
        G0 = brane.assemble_brane_metric(ansatz, p, PT, q={k: "0" for k in range(5, 9)})[0]
        r = l**2 * p("hbar", 0.5) / p("phi2", 0.5)
        Nw = np.array([[0.3, 0.0], [0.0, 0.0], [0.0, 0.0], [0.1, 0.2]])  # rows h5..h8
        qv = np.array([2.0, 1.0, 0.5, 3.0])
        np.testing.assert_allclose(G[:2, :2] - G0[:2, :2], r * np.einsum("a,ai,aj->ij", qv, Nw, Nw), rtol=1e-12)
        np.testing.assert_array_equal(G[2:4], G0[2:4])
