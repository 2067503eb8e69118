import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from finslerkit.catalog import builtin_catalog, builtin_metric
from finslerkit.dsl import (
    BinOp,
    Call,
    Const,
    Neg,
    Num,
    Pow,
    Var,
    bundle_env,
    compose_maps,
    evaluate,
    format_expr,
    parse_expr,
    parse_map,
    parse_metric,
    square_expr,
)
from finslerkit.errors import (
    DefinitionError,
    DimensionMismatchError,
    DomainError,
    ExprSyntaxError,
    UnknownIdentifierError,
)
from finslerkit.jets import jet_eval
from finslerkit.sampling import SampleConfig, draw_samples

# --- parsing -----------------------------------------------------------------


def test_parse_euclidean_metric():
    m = parse_metric("dim=2, F=sqrt(y1^2+y2^2), cone=[y1^2+y2^2]")
    assert m.n == 2
    assert len(m.cone) == 1
    assert m.value([0, 0], [3, 4]) == 5.0


def test_parse_minkowski_metric_with_unicode_minus():
    m = parse_metric("dim=2, F=sqrt(y1^2−y2^2), cone=[y1, y1^2−y2^2]")
    assert m.in_cone([0, 0], [2, 1])
    assert not m.in_cone([0, 0], [-2, 1])
    assert not m.in_cone([0, 0], [1, 2])


def test_file_format_with_comments_and_quotes():
    text = '''# a Randers norm
name = "randers"
dim = 2
F = "sqrt(y1^2 + y2^2) + 0.3*y1"  # drift along e1
cone = ["y1^2 + y2^2"]
'''
    m = parse_metric(text)
    assert m.name == "randers"
    assert m.value([0, 0], [1, 0]) == pytest.approx(1.3)


def test_unknown_identifier_beyond_dimension():
    with pytest.raises(UnknownIdentifierError, match="y3"):
        parse_metric("dim=2, F=sqrt(y3^2)")


def test_syntax_error_has_line_and_column():
    with pytest.raises(ExprSyntaxError) as info:
        parse_metric('dim = 2\nF = "sqrt(y1^2 +* y2)"')
    assert (info.value.line, info.value.column) == (2, 17)


@pytest.mark.parametrize("text", [
    "dim=2, F=abs(y1)",
    "dim=2, F=y1^x1",
    "dim=2, F=y1^2^(1/2)",
    "dim=2, F=y1^sqrt(2)",
    "dim=2, F=foo(y1)",
    "dim=2, F=y1 y2",
    "dim=2, F=(y1",
    "F=y1",
    "dim=7, F=y1",
    "dim=2, F=y1, speed=3",
])
def test_rejected_metric_files(text):
    with pytest.raises(DefinitionError):
        parse_metric(text)


def test_rational_exponent_accepted():
    e = parse_expr("(y1^2 + y2^2)^(1/2)")
    assert isinstance(e, Pow) and e.exponent == Fraction(1, 2)
    assert evaluate(e, bundle_env([0, 0], [3, 4])) == 5.0


def test_parse_maps():
    rot = parse_map("f1=x1*cos(0.5)−x2*sin(0.5), f2=x1*sin(0.5)+x2*cos(0.5)")
    assert np.allclose(rot.apply([1.0, 0.0]), [math.cos(0.5), math.sin(0.5)])
    shift = parse_map("f1=x1+1, f2=x2")
    assert shift.apply([0.5, 2.0]).tolist() == [1.5, 2.0]


def test_map_forbids_y_variables():
    with pytest.raises(UnknownIdentifierError, match="y-variables"):
        parse_map("f1=y1")


def test_map_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        parse_map('dim = 3\nf = ["x1", "x2"]')


def test_precedence():
    env = bundle_env([2.0, 3.0])
    assert evaluate(parse_expr("-x1^2"), env) == -4.0
    assert evaluate(parse_expr("2^3^2"), env) == 512.0
    assert evaluate(parse_expr("x1 - x2 - 1"), env) == -2.0
    assert evaluate(parse_expr("x2 / x1 * 4"), env) == 6.0


# --- evaluation --------------------------------------------------------------


def test_domain_error_names_subexpression():
    e = parse_expr("sqrt(y1^2 - y2^2)")
    with pytest.raises(DomainError) as info:
        evaluate(e, bundle_env([0, 0], [1, 2]))
    assert info.value.subexpression == "sqrt(y1^2 - y2^2)"


def test_linear_jet_derivative_is_exact():
    x1 = 0.7310585786300049
    jet = jet_eval(parse_expr("x1*y1"), bundle_env([x1, 0.0], [2.0, 0.0]), ["y1"], order=1)
    assert jet.first[0] == x1


def test_compose_maps_by_substitution():
    f = parse_map("f1=x1+1, f2=x2")
    g = parse_map("f1=2*x1, f2=x2^2")
    fg = compose_maps(f, g)
    x = np.array([0.3, -0.4])
    assert np.array_equal(fg.apply(x), f.apply(g.apply(x)))


def test_square_expr_matches_square():
    for entry in builtin_catalog():
        m = entry.metric
        for p in draw_samples(m, SampleConfig(seed=5, count=20)):
            env = bundle_env(p.x, p.y)
            assert evaluate(m.F2, env) == pytest.approx(evaluate(m.F, env) ** 2, rel=1e-14)


def test_metric_text_round_trip():
    m = builtin_metric("minkowski3")
    again = parse_metric(m.to_text())
    assert again.F == m.F and again.cone == m.cone and again.n == m.n


# --- properties --------------------------------------------------------------

_leaf = st.one_of(
    st.floats(min_value=0.0, max_value=1e6, allow_nan=False, allow_infinity=False).map(Num),
    st.sampled_from(["pi", "e"]).map(Const),
    st.builds(Var, st.sampled_from("xy"), st.integers(1, 3)),
)
_exponent = st.fractions(min_value=-5, max_value=5, max_denominator=7).filter(lambda r: r != 0)


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.builds(BinOp, st.sampled_from("+-*/"), children, children),
        st.builds(Pow, children, _exponent),
        st.builds(Call, st.sampled_from(["sqrt", "exp", "log", "sin", "cos", "tan", "sinh", "cosh", "tanh"]),
                  children),
    )


expressions = st.recursive(_leaf, _extend, max_leaves=12)


@given(expressions)
def test_print_parse_round_trip(e):
    assert parse_expr(format_expr(e)) == e


def _catalog_expressions():
    out = []
    for entry in builtin_catalog():
        m = entry.metric
        out += [(m, m.F), (m, m.F2)] + [(m, c) for c in m.cone]
    return out


@pytest.mark.parametrize("m,e", _catalog_expressions(), ids=lambda v: getattr(v, "name", None) or format_expr(v))
def test_plain_and_jet_values_agree_bit_for_bit(m, e):
    seeds = [f"x{i + 1}" for i in range(m.n)] + [f"y{i + 1}" for i in range(m.n)]
    for p in draw_samples(m, SampleConfig(seed=99, count=1000)):
        env = bundle_env(p.x, p.y)
        plain = evaluate(e, env)
        assert jet_eval(e, env, seeds, order=1).value == plain
