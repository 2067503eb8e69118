"""The averaged Riemannian metric of a Finsler structure.

At a point x the indicatrix ``Sigma_x = {y : F(x, y) = 1}`` is charted as the
radial graph ``u(theta) = w(theta) / F(x, w(theta))`` over unit Euclidean
directions w. Then

    h_ij(x) = int_Sigma g_u,ij dOmega(u),

where dOmega is the volume of the metric that g_u induces on Sigma. Tangent
vectors of Sigma come from jets in the angle variables, so the density
``sqrt(det(E^T g_u E))`` already carries the chart Jacobian.

n = 2 uses the periodic trapezoid rule on theta in [0, 2 pi); n = 3 uses
Gauss-Legendre in the polar angle times the trapezoid rule in azimuth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dsl import MapDef, MetricDef, bundle_env, evaluate
from .errors import FinslerPreconditionError, QuadratureConvergenceError
from .geometry import fundamental_tensor
from .isometry import map_jets, verify_finsler_isometry
from .jets import Jet
from .report import CheckResult, VerificationReport
from .sampling import BundlePoint, SampleConfig

CONVERGENCE_TOL = 1e-8
MAX_DOUBLINGS = 4
INVARIANCE_TOL = 1e-7
INDICATRIX_TOL = 1e-12
NON_COMPACT = ("the indicatrix of a pseudo-Finsler metric with index k > 0 is never compact, "
               "so the average over it is undefined")


@dataclass(frozen=True)
class IndicatrixNode:
    direction: np.ndarray  # unit Euclidean direction w
    u: np.ndarray  # point of the indicatrix on the ray of w
    tangent: np.ndarray  # n x (n-1), columns du/dangle
    g: np.ndarray  # fundamental tensor, 0-homogeneous so g_u = g_w
    weight: float  # quadrature weight in angle space


@dataclass(frozen=True)
class AveragedMetric:
    h: np.ndarray
    resolution: int
    trace: list[dict] = field(default_factory=list)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.h)


def _angle_nodes(n: int, resolution: int, offset: float):
    """Angle tuples and their weights for the product rule."""
    psi = 2.0 * np.pi * np.arange(resolution) / resolution + offset
    if n == 2:
        return [((t,), 2.0 * np.pi / resolution) for t in psi]
    nodes, weights = np.polynomial.legendre.leggauss(max(2, resolution // 2))
    phi = 0.5 * np.pi * (nodes + 1.0)
    wphi = 0.5 * np.pi * weights
    return [((a, b), wa * 2.0 * np.pi / resolution) for a, wa in zip(phi, wphi) for b in psi]


def _direction_jets(angles):
    k = len(angles)
    t = [Jet.variable(float(a), i, k, 1) for i, a in enumerate(angles)]
    if k == 1:
        return [t[0].cos(), t[0].sin()]
    phi, psi = t
    s = phi.sin()
    return [s * psi.cos(), s * psi.sin(), phi.cos()]


def indicatrix_chart(m: MetricDef, x, resolution: int, offset: float = 0.0) -> list[IndicatrixNode]:
    """Quadrature nodes on the indicatrix at x; checks the Finsler precondition at each one."""
    if m.n not in (2, 3):
        raise ValueError(f"averaging supports n = 2 or 3, got n = {m.n}")
    x = np.asarray(x, dtype=float)
    out = []
    for angles, weight in _angle_nodes(m.n, resolution, offset):
        w = _direction_jets(angles)
        direction = np.array([c.value for c in w])
        if not m.in_cone(x, direction, 0.0):
            raise FinslerPreconditionError(
                f"cone of {m.name!r} misses direction {direction.tolist()} at x={x.tolist()}; "
                "averaging needs F on all of T_xM minus 0"
            )
        tensor = fundamental_tensor(m, BundlePoint(x, direction), margin=None)
        if tensor.index_k:
            raise FinslerPreconditionError(f"{m.name!r} has index {tensor.index_k} at x={x.tolist()}: {NON_COMPACT}")
        env = bundle_env(x, np.zeros(m.n))
        env.update({f"y{i + 1}": c for i, c in enumerate(w)})
        F = evaluate(m.F, env)
        u = [c / F for c in w]
        out.append(IndicatrixNode(direction, np.array([c.value for c in u]),
                                  np.array([c.first for c in u]), tensor.g, weight))
    return out


def quadrature_h(m: MetricDef, x, resolution: int, offset: float = 0.0) -> tuple[np.ndarray, float]:
    """``h`` at one fixed resolution and the max indicatrix defect ``|F(x, u) - 1|``."""
    x = np.asarray(x, dtype=float)
    terms, defect = [], 0.0
    for node in indicatrix_chart(m, x, resolution, offset):
        g = node.g
        gram = node.tangent.T @ g @ node.tangent
        density = math.sqrt(np.linalg.det(gram))
        terms.append(node.weight * density * g)
        defect = max(defect, abs(m.value(x, node.u) - 1.0))
    n = m.n
    stacked = np.array(terms)
    h = np.array([[math.fsum(stacked[:, i, j]) for j in range(n)] for i in range(n)])
    return 0.5 * (h + h.T), defect


def default_resolution(n: int) -> int:
    return 32 if n == 2 else 16


def average_metric(m: MetricDef, x, resolution: int | None = None, offset: float = 0.0,
                   tol: float = CONVERGENCE_TOL, max_doublings: int = MAX_DOUBLINGS) -> AveragedMetric:
    """Average the fundamental tensor over the indicatrix, doubling the resolution until stable."""
    resolution = resolution or default_resolution(m.n)
    h, defect = quadrature_h(m, x, resolution, offset)
    trace = [{"resolution": resolution, "max_entry_change": None, "indicatrix_defect": defect}]
    for _ in range(max_doublings):
        resolution *= 2
        finer, defect = quadrature_h(m, x, resolution, offset)
        delta = float(np.max(np.abs(finer - h)))
        trace.append({"resolution": resolution, "max_entry_change": delta, "indicatrix_defect": defect})
        h = finer
        if delta <= tol:
            if defect > INDICATRIX_TOL:
                raise QuadratureConvergenceError(f"indicatrix nodes miss F = 1 by {defect:.2e}")
            return AveragedMetric(h, resolution, trace)
    raise QuadratureConvergenceError(
        f"averaged metric of {m.name!r} did not converge to {tol:g} after {max_doublings} doublings: {trace}"
    )


def verify_h_invariance(m: MetricDef, f: MapDef, x, resolution: int | None = None, force: bool = False,
                        neighborhood: float = 0.1, samples: int = 20, seed: int = 0) -> VerificationReport:
    """``Df^T h(f(x)) Df = h(x)`` relative to ``max|h(x)|``.

    The map must first pass the Finsler isometry check on a box around x;
    ``force`` skips that gate so a non-isometry's residual can be inspected.
    """
    x = np.asarray(x, dtype=float)
    info = {"metric": m.name, "map": f.name, "x": x.tolist(), "resolution": resolution}
    if not force:
        box = [(v - neighborhood, v + neighborhood) for v in x]
        gate = verify_finsler_isometry(m, f, SampleConfig(seed=seed, count=samples, x_box=box))
        if gate.verdict != "PASS":
            raise FinslerPreconditionError(
                f"{f.name!r} is not a Finsler isometry of {m.name!r} near x={x.tolist()}:\n{gate.to_text()}"
            )
    fx, Df, _ = map_jets(f, x)
    here = average_metric(m, x, resolution)
    there = average_metric(m, fx, resolution)
    diff = Df.T @ there.h @ Df - here.h
    check = CheckResult("Df^T h(f(x)) Df = h(x)", INVARIANCE_TOL)
    check.add(np.max(np.abs(diff)) / np.max(np.abs(here.h)), {"x": x.tolist(), "f(x)": fx.tolist()})
    info.update({"h(x)": here.h, "h(f(x))": there.h, "forced": force})
    return VerificationReport(f"h-invariance {m.name} / {f.name}", [check], None, 1, info)
