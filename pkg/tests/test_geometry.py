import numpy as np
import pytest

from finslerkit.catalog import builtin_metric
from finslerkit.dsl import parse_metric
from finslerkit.errors import ConeViolationError, DegenerateTensorError, InvalidMetricError
from finslerkit.geometry import (
    fundamental_tensor,
    gamma_block,
    gamma_via_lie,
    horizontal_frame,
    horizontal_projector,
    liouville,
    local_geometry,
    metric_index,
    quasi_tangent,
    sasaki_matrix,
    sasaki_via_projectors,
    signature,
    spray_coefficients,
    spray_vector,
    vertical_projector,
)
from finslerkit.sampling import BundlePoint, SampleConfig, draw_samples


def P(x, y):
    return BundlePoint(x, y)


def conformal_christoffel_spray(x, y):
    """G^i = 1/2 Gamma^i_jk y^j y^k for the metric e^{2 x1} delta (n = 2)."""
    y1, y2 = y
    return np.array([0.5 * (y1 * y1 - y2 * y2), y1 * y2])


# --- fundamental tensor ------------------------------------------------------


def test_euclidean_tensor_is_identity():
    t = fundamental_tensor(builtin_metric("euclidean2"), P([0.1, 0.2], [0.3, -1.0]))
    assert np.array_equal(t.g, np.eye(2)) and t.index_k == 0


def test_minkowski_tensor():
    t = fundamental_tensor(builtin_metric("minkowski2"), P([0, 0], [2, 1]))
    assert np.array_equal(t.g, np.diag([1.0, -1.0])) and t.index_k == 1


def test_randers_tensor_closed_form():
    t = fundamental_tensor(builtin_metric("randers03"), P([0, 0], [1, 0]))
    np.testing.assert_allclose(t.g, [[1.69, 0.0], [0.0, 1.3]], atol=1e-14)
    assert t.index_k == 0


@pytest.mark.parametrize("name,k", [("euclidean2", 0), ("minkowski2", 1), ("randers03", 0), ("minkowski3", 2)])
def test_metric_index(name, k):
    assert metric_index(builtin_metric(name), SampleConfig(seed=2, count=20)) == k


def test_metric_index_detects_inconsistency():
    m = parse_metric("dim=2, F=sqrt(y1^2 + (y2^2 - 1)*y2^2) , cone=[y1^2 + (y2^2 - 1)*y2^2]")
    # F^2 = y1^2 - y2^2 + y2^4 is not 2-homogeneous; pick points with different signatures of g
    pts = [P([0, 0], [1.0, 0.1]), P([0, 0], [1.0, 1.5])]
    with pytest.raises(InvalidMetricError):
        metric_index(m, pts)


def test_degenerate_tensor_raises():
    m = parse_metric("dim=2, F=y1, cone=[y1]")
    with pytest.raises(DegenerateTensorError):
        fundamental_tensor(m, P([0, 0], [1, 0]))


def test_cone_violation_raises():
    with pytest.raises(ConeViolationError):
        fundamental_tensor(builtin_metric("minkowski2"), P([0, 0], [1, 2]))


def test_near_singular_tensor_is_degenerate_not_warned():
    # the relative zero-eigenvalue rule (1e-8) catches this long before cond reaches 1e12
    m = parse_metric("dim=2, F=sqrt(y1^2 + 1e-13*y2^2), cone=[y1^2 + y2^2]")
    with pytest.raises(DegenerateTensorError):
        fundamental_tensor(m, P([0, 0], [1, 1]))


def test_signature_zero_threshold():
    assert signature(np.diag([1.0, -2.0, 1e-12])) == (1, 1, 1)


# --- spray and connection ------------------------------------------------------


@pytest.mark.parametrize("name", ["minkowski2", "randers06", "euclidean3"])
def test_x_independent_metrics_have_zero_spray(name):
    m = builtin_metric(name)
    for p in draw_samples(m, SampleConfig(seed=4, count=5)):
        sd = spray_coefficients(m, p)
        assert not sd.G.any() and not sd.N.any()


def test_conformal_spray_at_reference_point():
    m = builtin_metric("conformal2")
    p = P([0, 0], [1, 1])
    sd = spray_coefficients(m, p)
    np.testing.assert_allclose(sd.G, [0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(sd.N, [[1.0, -1.0], [1.0, 1.0]], atol=1e-15)
    np.testing.assert_allclose(spray_vector(m, p), [1, 1, 0, -2], atol=1e-15)


def test_conformal_spray_matches_christoffel_oracle():
    m = builtin_metric("conformal2")
    for p in draw_samples(m, SampleConfig(seed=8, count=50)):
        G = spray_coefficients(m, p).G
        want = conformal_christoffel_spray(p.x, p.y)
        assert np.max(np.abs(G - want)) <= 1e-9 * max(1.0, np.max(np.abs(want)))


def test_spray_vectors():
    assert spray_vector(builtin_metric("euclidean2"), P([0, 0], [1, 2])).tolist() == [1, 2, 0, 0]
    assert spray_vector(builtin_metric("minkowski2"), P([0, 0], [2, 1])).tolist() == [2, 1, 0, 0]
    assert liouville(P([0, 0], [1, 2])).tolist() == [0, 0, 1, 2]
    assert liouville(P([0, 0], [2, 1])).tolist() == [0, 0, 2, 1]


def test_quasi_tangent_structure():
    J = quasi_tangent(2)
    assert np.array_equal(J[2:, :2], np.eye(2)) and not J[:2].any() and not J[:, 2:].any()
    assert not (J @ J).any()
    assert np.linalg.matrix_rank(J) == 2


def test_spray_jacobian_against_fd():
    # DG from the order-3 jet, compared with central differences of G
    m = builtin_metric("conformal_lorentz2")
    p = P([0.2, -0.3], [1.4, 0.5])
    geo = local_geometry(m, p)
    h = 1e-6
    for j in range(4):
        dz = np.zeros(4)
        dz[j] = h
        plus = local_geometry(m, P(p.x + dz[:2], p.y + dz[2:])).G
        minus = local_geometry(m, P(p.x - dz[:2], p.y - dz[2:])).G
        np.testing.assert_allclose(geo.DG[:, j], (plus - minus) / (2 * h), atol=1e-7)


# --- Gamma, projectors, Sasaki ----------------------------------------------------


def test_gamma_x_independent():
    m = builtin_metric("randers03")
    want = np.diag([1.0, 1.0, -1.0, -1.0])
    p = P([0.4, 0.1], [1.0, 0.5])
    assert np.array_equal(gamma_via_lie(m, p).matrix, want)
    assert np.array_equal(gamma_block(m, p).matrix, want)
    h = horizontal_projector(gamma_block(m, p))
    assert np.array_equal(h, np.diag([1.0, 1.0, 0.0, 0.0]))


def test_gamma_dual_path_conformal():
    m = builtin_metric("conformal2")
    p = P([0, 0], [1, 1])
    diff = gamma_via_lie(m, p).matrix - gamma_block(m, p).matrix
    assert np.max(np.abs(diff)) <= 1e-10


def test_projectors_sum_to_identity_and_frame():
    m = builtin_metric("conformal_lorentz2")
    p = P([0.1, 0.2], [1.0, 0.3])
    gamma = gamma_via_lie(m, p)
    assert np.array_equal(horizontal_projector(gamma) + vertical_projector(gamma), np.eye(4))
    geo = local_geometry(m, p)
    delta = horizontal_frame(geo.N)
    np.testing.assert_allclose(horizontal_projector(gamma) @ delta, delta, atol=1e-14)
    np.testing.assert_allclose(vertical_projector(gamma) @ delta, 0.0, atol=1e-14)


def test_spray_is_horizontal_randers():
    m = builtin_metric("randers06")
    for p in draw_samples(m, SampleConfig(seed=12, count=20)):
        S = spray_vector(m, p)
        h = horizontal_projector(gamma_via_lie(m, p))
        assert np.max(np.abs(h @ S - S)) <= 1e-9 * np.max(np.abs(S))


def test_sasaki_examples():
    e = sasaki_matrix(builtin_metric("euclidean2"), P([0, 0], [0.3, 0.4]))
    assert np.array_equal(e.GF, np.eye(4)) and e.index == 0
    mk = sasaki_matrix(builtin_metric("minkowski2"), P([0, 0], [2, 1]))
    assert np.array_equal(mk.GF, np.diag([1.0, -1.0, 1.0, -1.0])) and mk.index == 2


def test_sasaki_dual_path_conformal():
    m = builtin_metric("conformal2")
    geo = local_geometry(m, P([0, 0], [1, 1]))
    block = sasaki_matrix(m, geo.point).GF
    assert np.max(np.abs(block - sasaki_via_projectors(geo))) <= 1e-10
    assert np.array_equal(block, block.T)
