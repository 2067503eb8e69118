"""Pointwise pseudo-Finsler geometry on the slit tangent bundle.

Everything here is evaluated at one bundle point ``p = (x, y)`` in the
natural frame ``(d/dx, d/dy)`` of TM:

* fundamental tensor ``g_ij = 1/2 d^2(F^2)/dy_i dy_j`` and its index k,
* spray coefficients ``G^i`` and connection coefficients ``N^i_j = dG^i/dy^j``,
* spray ``S = (y, -2G)``, Liouville field ``C = (0, y)``, quasi-tangent
  structure ``J = [[0, 0], [I, 0]]``,
* the almost product structure ``Gamma = -L_S J`` and its projectors,
* the Sasaki matrix of g^F.

Convention: g carries the factor 1/2, so a quadratic ``F^2 = y^T A y`` has
``g = A`` and ``g(y, y) = F^2``. A constant factor on g rescales the Sasaki
metric but changes no signature, spray or isometry verdict.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dsl import MetricDef, bundle_env
from .errors import ConeViolationError, DegenerateTensorError, IllConditionedWarning, InvalidMetricError
from .jets import jet_eval
from .sampling import BundlePoint, SampleConfig, draw_samples

DEFAULT_MARGIN = 1e-6
DET_TOL = 1e-12
ZERO_EIGEN_REL = 1e-8
COND_WARN = 1e12


def signature(matrix: np.ndarray, rel_zero: float = ZERO_EIGEN_REL) -> tuple[int, int, int]:
    """(negative, zero, positive) eigenvalue counts of a symmetric matrix."""
    ev = np.linalg.eigvalsh(matrix)
    scale = np.max(np.abs(ev)) if ev.size else 0.0
    zero = np.abs(ev) <= rel_zero * scale
    return int(np.sum((ev < 0) & ~zero)), int(np.sum(zero)), int(np.sum((ev > 0) & ~zero))


@dataclass(frozen=True)
class FundamentalTensor:
    g: np.ndarray
    index_k: int
    det: float


@dataclass(frozen=True)
class SprayData:
    G: np.ndarray
    N: np.ndarray


@dataclass(frozen=True)
class GammaTensor:
    matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0] // 2


@dataclass(frozen=True)
class SasakiMatrix:
    GF: np.ndarray
    index: int


@dataclass(frozen=True)
class LocalGeometry:
    """All first- and second-order data at one bundle point.

    ``DG`` is the n x 2n Jacobian of the spray coefficients with respect to
    (x, y); its y-block is the connection N.
    """

    point: BundlePoint
    F: float
    tensor: FundamentalTensor
    G: np.ndarray
    DG: np.ndarray

    @property
    def n(self) -> int:
        return self.point.n

    @property
    def g(self) -> np.ndarray:
        return self.tensor.g

    @property
    def N(self) -> np.ndarray:
        return self.DG[:, self.n:]

    @property
    def Gx(self) -> np.ndarray:
        return self.DG[:, : self.n]


def as_point(x, y) -> BundlePoint:
    return x if isinstance(x, BundlePoint) else BundlePoint(x, y)


def require_cone(m: MetricDef, p: BundlePoint, margin: float | None = DEFAULT_MARGIN):
    if margin is None:
        return
    if p.n != m.n:
        raise ConeViolationError(f"point has dimension {p.n}, metric {m.name!r} has {m.n}")
    if not m.in_cone(p.x, p.y, margin):
        raise ConeViolationError(f"point x={p.x.tolist()}, y={p.y.tolist()} is not inside the cone of {m.name!r} (margin {margin})")


def _seeds(n: int) -> list[str]:
    return [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)]


def _checked_tensor(g: np.ndarray, p: BundlePoint, det_tol: float) -> FundamentalTensor:
    det = float(np.linalg.det(g))
    neg, zero, _ = signature(g)
    if abs(det) <= det_tol or zero:
        raise DegenerateTensorError(
            f"fundamental tensor is degenerate at x={p.x.tolist()}, y={p.y.tolist()} (det={det:.3e})", p
        )
    cond = np.linalg.cond(g)
    if cond > COND_WARN:
        warnings.warn(f"fundamental tensor has condition number {cond:.2e} at {p.as_list()}", IllConditionedWarning, stacklevel=3)
    return FundamentalTensor(g, neg, det)


def fundamental_tensor(m: MetricDef, p: BundlePoint, margin: float | None = DEFAULT_MARGIN, det_tol: float = DET_TOL) -> FundamentalTensor:
    require_cone(m, p, margin)
    seeds = [f"y{i + 1}" for i in range(m.n)]
    jet = jet_eval(m.F2, bundle_env(p.x, p.y), seeds, order=2)
    return _checked_tensor(0.5 * jet.second, p, det_tol)


def local_geometry(m: MetricDef, p: BundlePoint, margin: float | None = DEFAULT_MARGIN,
                   det_tol: float = DET_TOL, spray_fault: float = 0.0) -> LocalGeometry:
    """Fundamental tensor, spray and connection from one order-3 jet of F^2.

    ``G = 1/4 g^{-1} (d^2F^2/dy dx . y - dF^2/dx)``; its Jacobian is obtained by
    pushing the same formula through the product rule with the order-3 jet,
    ``dG = 1/4 g^{-1} (dB - dg . 4G)``. ``spray_fault`` adds a constant to G^1
    only (fault injection for the identity suite).
    """
    require_cone(m, p, margin)
    n = m.n
    X, Y = slice(0, n), slice(n, 2 * n)
    jet = jet_eval(m.F2, bundle_env(p.x, p.y), _seeds(n), order=3)
    E1, E2, E3 = jet.first, jet.second, jet.third
    tensor = _checked_tensor(0.5 * E2[Y, Y], p, det_tol)
    g, y = tensor.g, p.y

    M = E2[Y, X]
    B = M @ y - E1[X]
    G = 0.25 * np.linalg.solve(g, B)

    dg = 0.5 * E3[Y, Y, :]  # (l, m, j)
    dB = np.einsum("lkj,k->lj", E3[Y, X, :], y) - E2[X, :]
    dB[:, Y] += M
    DG = 0.25 * np.linalg.solve(g, dB - np.einsum("lmj,m->lj", dg, 4.0 * G))
    if spray_fault:
        G = G.copy()
        G[0] += spray_fault
    F = float(m.value(p.x, p.y))
    return LocalGeometry(p, F, tensor, G, DG)


def spray_coefficients(m: MetricDef, p: BundlePoint, **kw) -> SprayData:
    geo = local_geometry(m, p, **kw)
    return SprayData(geo.G, geo.N)


def spray_G(m: MetricDef, x, y) -> np.ndarray:
    """Spray coefficients only (order-2 jet); used by the geodesic integrator."""
    n = m.n
    X, Y = slice(0, n), slice(n, 2 * n)
    jet = jet_eval(m.F2, bundle_env(x, y), _seeds(n), order=2)
    g = 0.5 * jet.second[Y, Y]
    B = jet.second[Y, X] @ np.asarray(y, dtype=float) - jet.first[X]
    return 0.25 * np.linalg.solve(g, B)


def spray_vector_from(geo: LocalGeometry) -> np.ndarray:
    return np.concatenate([geo.point.y, -2.0 * geo.G])


def spray_vector(m: MetricDef, p: BundlePoint, **kw) -> np.ndarray:
    return spray_vector_from(local_geometry(m, p, **kw))


def liouville(p: BundlePoint) -> np.ndarray:
    return np.concatenate([np.zeros(p.n), p.y])


def quasi_tangent(n: int) -> np.ndarray:
    J = np.zeros((2 * n, 2 * n))
    J[n:, :n] = np.eye(n)
    return J


def spray_jacobian(geo: LocalGeometry) -> np.ndarray:
    """``DS^a_c = dS^a/dz^c`` for ``S = (y, -2G)`` in coordinates z = (x, y)."""
    n = geo.n
    DS = np.zeros((2 * n, 2 * n))
    DS[:n, n:] = np.eye(n)
    DS[n:, :] = -2.0 * geo.DG
    return DS


def gamma_via_lie_from(geo: LocalGeometry) -> GammaTensor:
    # (L_S J) = S.dJ - DS J + J DS, with dJ = 0 for the constant J
    J = quasi_tangent(geo.n)
    DS = spray_jacobian(geo)
    return GammaTensor(DS @ J - J @ DS)


def gamma_block_from(geo: LocalGeometry) -> GammaTensor:
    n = geo.n
    I = np.eye(n)
    return GammaTensor(np.block([[I, np.zeros((n, n))], [-2.0 * geo.N, -I]]))


def gamma_via_lie(m: MetricDef, p: BundlePoint, **kw) -> GammaTensor:
    return gamma_via_lie_from(local_geometry(m, p, **kw))


def gamma_block(m: MetricDef, p: BundlePoint, **kw) -> GammaTensor:
    return gamma_block_from(local_geometry(m, p, **kw))


def horizontal_projector(gamma: GammaTensor) -> np.ndarray:
    return 0.5 * (np.eye(gamma.matrix.shape[0]) + gamma.matrix)


def vertical_projector(gamma: GammaTensor) -> np.ndarray:
    return 0.5 * (np.eye(gamma.matrix.shape[0]) - gamma.matrix)


def horizontal_frame(N: np.ndarray) -> np.ndarray:
    """Columns ``delta_j = d/dx^j - N^i_j d/dy^i``."""
    n = N.shape[0]
    return np.vstack([np.eye(n), -N])


def sasaki_from(geo: LocalGeometry) -> SasakiMatrix:
    g, N = geo.g, geo.N
    NtG = N.T @ g
    hh = g + NtG @ N
    hh = 0.5 * (hh + hh.T)
    GF = np.block([[hh, NtG], [NtG.T, g]])
    neg, _, _ = signature(GF)
    return SasakiMatrix(GF, neg)


def sasaki_via_projectors(geo: LocalGeometry) -> np.ndarray:
    """GF(X, Y) = g(dpi hX, dpi hY) + g(vX, vY), assembled from Gamma."""
    n = geo.n
    gamma = gamma_via_lie_from(geo)
    Ph = horizontal_projector(gamma)[:n, :]
    Pv = vertical_projector(gamma)[n:, :]
    return Ph.T @ geo.g @ Ph + Pv.T @ geo.g @ Pv


def sasaki_matrix(m: MetricDef, p: BundlePoint, **kw) -> SasakiMatrix:
    return sasaki_from(local_geometry(m, p, **kw))


def metric_index(m: MetricDef, sample) -> int:
    """Common index of g over a sample (SampleConfig or list of points)."""
    points = draw_samples(m, sample) if isinstance(sample, SampleConfig) else list(sample)
    if len(points) < 2:
        raise ValueError("metric_index needs at least 2 sample points")
    indices = {}
    for p in points:
        indices.setdefault(fundamental_tensor(m, p, margin=None).index_k, p)
    if len(indices) > 1:
        found = {k: v.as_list() for k, v in indices.items()}
        raise InvalidMetricError(f"index of {m.name!r} is not constant across samples: {found}")
    return next(iter(indices))
