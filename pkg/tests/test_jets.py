import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from finslerkit.catalog import builtin_metric
from finslerkit.dsl import bundle_env, evaluate, parse_expr
from finslerkit.errors import DomainError
from finslerkit.jets import Jet, fd_partial, jet_eval, partial

Y = ["y1", "y2"]


def test_polynomial_third_partial_is_exact():
    jet = jet_eval(parse_expr("y1^2*y2"), bundle_env([0, 0], [2, 3]), Y, order=3)
    assert partial(jet, [0, 0, 1]) == 2.0
    assert partial(jet, [1, 1, 1]) == 0.0


def test_euclidean_hessian_of_F2():
    m = builtin_metric("euclidean2")
    jet = jet_eval(m.F2, bundle_env([0, 0], [0.6, 0.8]), Y, order=2)
    assert np.array_equal(jet.second, 2.0 * np.eye(2))


def test_randers_hessian_matches_fd():
    m = builtin_metric("randers03")
    env = bundle_env([0, 0], [1, 0])
    jet = jet_eval(m.F2, env, Y, order=2)
    for i, j in itertools.product(range(2), repeat=2):
        fd = fd_partial(m.F2, env, [Y[i], Y[j]])
        assert jet.second[i, j] == pytest.approx(fd, rel=1e-6, abs=1e-6)
    # closed form: g = (F/a)(I - y y^T/a^2) + (b + y/a)(b + y/a)^T with a = |y|, F = 1.3
    assert np.allclose(0.5 * jet.second, [[1.69, 0.0], [0.0, 1.3]], atol=1e-14)


def test_randers_third_partials_match_fd():
    m = builtin_metric("randers03")
    env = bundle_env([0, 0], [1, 0.2])
    jet = jet_eval(m.F2, env, Y, order=3)
    for idx in itertools.combinations_with_replacement(range(2), 3):
        fd = fd_partial(m.F2, env, [Y[i] for i in idx], h=1e-3)
        assert jet.third[idx] == pytest.approx(fd, rel=1e-4, abs=1e-8)


def test_fd_first_and_mixed():
    assert fd_partial(parse_expr("y1^2"), {"y1": 3.0}, ["y1"], h=1e-4) == pytest.approx(6.0, abs=1e-7)
    m = builtin_metric("euclidean2")
    assert fd_partial(m.F2, bundle_env([0, 0], [0.6, 0.8]), ["y1", "y2"]) == pytest.approx(0.0, abs=1e-6)


def test_fd_stencil_leaving_domain_raises():
    with pytest.raises(DomainError):
        fd_partial(parse_expr("sqrt(y1)"), {"y1": 1e-4}, ["y1"], h=1e-3)


def test_unseeded_variable_has_zero_slots():
    jet = jet_eval(parse_expr("exp(y1)"), bundle_env([0, 0], [0.5, 0.5]), ["y2", "y1"], order=3)
    assert jet.first[0] == 0.0
    assert not jet.second[0].any() and not jet.third[0].any()


def test_symmetry_is_exact():
    m = builtin_metric("conformal_lorentz2")
    seeds = ["x1", "x2", "y1", "y2"]
    jet = jet_eval(m.F2, bundle_env([0.3, -0.2], [1.5, 0.4]), seeds, order=3)
    assert np.array_equal(jet.second, jet.second.T)
    for perm in itertools.permutations(range(3)):
        assert np.array_equal(jet.third, jet.third.transpose(perm))


def test_euler_homogeneity_at_jet_level():
    m = builtin_metric("randers06")
    for y in ([1.0, 0.3], [-0.4, 1.7], [0.01, -2.0]):
        jet = jet_eval(m.F, bundle_env([0, 0], y), Y, order=1)
        F = m.value([0, 0], y)
        assert abs(jet.first @ np.array(y) - F) <= 1e-10 * F


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_chain_rule_matches_expanded_ast(a, b):
    env = bundle_env([0, 0], [a, b])
    inner = jet_eval(parse_expr("y1*y2 + 2"), env, Y, order=3)
    composed = inner.log().sin()
    expanded = jet_eval(parse_expr("sin(log(y1*y2 + 2))"), env, Y, order=3)
    assert composed.value == expanded.value
    for got, want in ((composed.first, expanded.first), (composed.second, expanded.second),
                      (composed.third, expanded.third)):
        np.testing.assert_allclose(got, want, rtol=1e-13, atol=1e-13)


@given(st.floats(0.1, 3.0), st.floats(-2.0, 2.0))
def test_division_jet_against_quotient_rule(u, v):
    env = bundle_env([0, 0], [u, v])
    jet = jet_eval(parse_expr("y2/y1"), env, Y, order=2)
    assert jet.value == v / u
    np.testing.assert_allclose(jet.first, [-v / u**2, 1 / u], rtol=1e-14)
    np.testing.assert_allclose(jet.second, [[2 * v / u**3, -1 / u**2], [-1 / u**2, 0.0]], rtol=1e-13, atol=1e-15)


def test_jet_arithmetic_with_numpy_scalars():
    j = Jet.variable(2.0, 0, 1, 2)
    out = np.float64(3.0) * j + np.float64(1.0)
    assert isinstance(out, Jet) and out.value == 7.0 and out.first[0] == 3.0


def test_value_matches_plain_evaluation():
    e = parse_expr("exp(x1)*sqrt(y1^2 - y2^2)/(1 + y1)^(1/3)")
    env = bundle_env([0.25, 0.0], [1.3, 0.2])
    assert jet_eval(e, env, ["x1", "y1", "y2"], order=3).value == evaluate(e, env)
