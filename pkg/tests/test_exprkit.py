import numpy as np
import pytest

from oracles import expr_fn, fd_first, fd_second, random_tree, smooth_tree

from finslerforge.errors import EvalDomainError, ParseError, UndeclaredVariableError
from finslerforge.exprkit import (
    Binary, Chart, Const, Jet, Pow, Unary, Var, eval_jet, evaluate, jet_space, parse_expr, to_text,
)

NAMES = ("x1", "x2", "y1", "y2")


def test_parse_sum_of_squares():
    e = parse_expr("y1^2 + y2^2", NAMES)
    assert e == Binary("add", Pow(Var("y1"), 2), Pow(Var("y2"), 2))


def test_precedence_and_associativity():
    assert parse_expr("x1 - x2 - y1", NAMES) == Binary("sub", Binary("sub", Var("x1"), Var("x2")), Var("y1"))
    assert parse_expr("x1 + x2 * y1", NAMES) == Binary("add", Var("x1"), Binary("mul", Var("x2"), Var("y1")))
    assert parse_expr("2 * (x1 + 1)", NAMES) == Binary("mul", Const(2), Binary("add", Var("x1"), Const(1)))


def test_functions_parse():
    e = parse_expr("sqrt(exp(x1)) + log(y1) - sin(x2) * cos(y2) + neg(y1)", NAMES)
    assert to_text(e).count("(") >= 5
    assert parse_expr(to_text(e), NAMES) == e


def test_syntax_error_offset():
    with pytest.raises(ParseError) as exc:
        parse_expr("y1 +", NAMES)
    assert exc.value.offset == 4


def test_bad_character_offset():
    with pytest.raises(ParseError) as exc:
        parse_expr("x1 $ 2", NAMES)
    assert exc.value.offset == 3


def test_undeclared_variable_named():
    with pytest.raises(UndeclaredVariableError) as exc:
        parse_expr("x1 + y9", NAMES)
    assert exc.value.name == "y9"
    assert "y9" in str(exc.value)


def test_roundtrip_random_trees():
    rng = np.random.default_rng(7)
    for _ in range(300):
        e = random_tree(rng, NAMES, 5)
        assert parse_expr(to_text(e), NAMES) == e


def test_negative_constant_roundtrip():
    e = Binary("mul", Const(-2.5), Var("x1"))
    assert parse_expr(to_text(e), NAMES) == e


def test_hand_partials():
    e = parse_expr("x1*y1^2", NAMES)
    j = eval_jet(e, {"x1": 2.0, "y1": 3.0}, order=3)
    assert j.value == 18.0
    assert j.partial("y1", "y1") == 4.0
    assert j.partial("x1", "y1", "y1") == 2.0
    assert j.partial("y1", "x1", "y1") == 2.0


def test_constant_jet():
    j = eval_jet(Const(5.0), {"x1": 0.3}, order=2, wrt=("x1", "y1"))
    assert j.value == 5.0
    assert all(v == 0.0 for v in j.partials.values())


def test_order_zero_matches_plain_arithmetic():
    rng = np.random.default_rng(3)
    for _ in range(50):
        e = smooth_tree(rng, NAMES)
        pt = {c: float(rng.uniform(-1, 1)) for c in NAMES}
        j = eval_jet(e, pt, order=0)
        assert j.value == pytest.approx(float(expr_fn(e)({c: np.array([v]) for c, v in pt.items()})[0]), rel=1e-14)


def test_smooth_trees_against_finite_differences():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        e = smooth_tree(rng, NAMES)
        pt = {c: np.array([rng.uniform(-1, 1)]) for c in NAMES}
        j = eval_jet(e, {c: float(v[0]) for c, v in pt.items()}, 2, wrt=NAMES)
        f = expr_fn(e)
        for a in NAMES:
            fd = float(fd_first(f, pt, a)[0])
            worst = max(worst, abs(j.partial(a) - fd) / max(1.0, abs(fd)))
            for b in NAMES:
                fd2 = float(fd_second(f, pt, a, b, 1e-3)[0])
                worst = max(worst, abs(j.partial(a, b) - fd2) / max(1.0, abs(fd2)))
    assert worst < 1e-5


def test_schwarz_symmetry_fourth_order():
    e = parse_expr("exp(x1*y1) * sin(x2 + y2^2) / (2 + cos(x1))", NAMES)
    j = eval_jet(e, {"x1": 0.3, "x2": -0.2, "y1": 0.7, "y2": 0.4}, order=4)
    assert j.partial("x1", "y1", "y2", "y2") == j.partial("y2", "x1", "y2", "y1")


def test_jet_add_mul_commute_and_associate():
    rng = np.random.default_rng(5)
    sp = jet_space(("a", "b"), 3)
    mk = lambda: Jet(sp, rng.normal(size=(4, sp.size)))
    p, q, r = mk(), mk(), mk()
    np.testing.assert_allclose((p * q).c, (q * p).c, rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(((p * q) * r).c, (p * (q * r)).c, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(((p + q) + r).c, (p + (q + r)).c, rtol=1e-15, atol=1e-15)


@pytest.mark.parametrize("text", ["log(x1 - 1)", "1/(x1 - 0.5)", "sqrt(x1 - 2)"])
def test_domain_errors_name_node(text):
    e = parse_expr(text, NAMES)
    with pytest.raises(EvalDomainError) as exc:
        eval_jet(e, {"x1": 0.5}, 1)
    assert "node" in str(exc.value)


def test_integer_power_of_negative_base():
    j = eval_jet(parse_expr("x1^3", NAMES), {"x1": -2.0}, 2)
    assert (j.value, j.partial("x1"), j.partial("x1", "x1")) == (-8.0, 12.0, -12.0)


def test_fractional_power_needs_positive_base():
    with pytest.raises(EvalDomainError):
        eval_jet(parse_expr("x1^0.5", NAMES), {"x1": -1.0}, 1)


def test_wrt_subset_only_carries_requested():
    j = eval_jet(parse_expr("x1*x2", NAMES), {"x1": 1.0, "x2": 2.0}, 2, wrt=("x1",))
    assert set(j.partials) == {("x1",), ("x1", "x1")}


def test_batch_evaluation_matches_pointwise():
    e = parse_expr("x1^2*exp(y1) + sin(x2)", NAMES)
    xs = np.linspace(-1, 1, 5)
    pts = {"x1": xs, "x2": xs[::-1], "y1": 0.3 * xs}
    j = evaluate(e, jet_space(("x1",), 1), pts)
    for k in range(5):
        pj = eval_jet(e, {c: v[k] for c, v in pts.items()}, 1, wrt=("x1",))
        assert j.value[k] == pytest.approx(pj.value)
        assert j.partial("x1")[k] == pytest.approx(pj.partial("x1"))


def test_chart_shells():
    ch = Chart.shell()
    assert ch.coords == ("x1", "x2", "y3", "y4", "y5", "y6", "y7", "y8")
    assert ch.shell_of("y7") == 2
    assert parse_expr("y8 + x2", ch) == Binary("add", Var("y8"), Var("x2"))
    with pytest.raises(UndeclaredVariableError):
        parse_expr("y1", ch)


def test_unary_names_validated():
    with pytest.raises(ValueError):
        Unary("tan", Var("x1"))


def test_unary_minus_binds_looser_than_power():
    assert parse_expr("-y1^2", NAMES) == Unary("neg", Pow(Var("y1"), 2))
    assert parse_expr("-2^2", NAMES) == Unary("neg", Pow(Const(2), 2))
    assert parse_expr("-2*x1", NAMES) == Binary("mul", Const(-2), Var("x1"))
    assert eval_jet(parse_expr("-x1^2", NAMES), {"x1": 3.0}, 0).value == -9.0
