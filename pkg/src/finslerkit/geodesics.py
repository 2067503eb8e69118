"""Integral curves of the geodesic spray.

The spray's integral curves are velocity lifts ``t -> (x(t), x'(t))`` of
geodesics, so integrating ``x' = y, y' = -2 G(x, y)`` traces geodesics.
The integrator is the Dormand-Prince 5(4) embedded pair with PI step-size
control and the usual 4th-order continuous extension for dense output.
A trial state outside the cone is rejected and the step shrunk; when the
step underflows against the boundary, integration stops with status
``left-cone`` and keeps the samples already emitted.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .dsl import MetricDef
from .errors import DomainError, NumericPreconditionError
from .geometry import DEFAULT_MARGIN, require_cone, spray_G
from .sampling import BundlePoint

COMPLETED, LEFT_CONE, STEP_FAILURE = "completed", "left-cone", "step-failure"

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# 5th-order minus embedded 4th-order weights, 7th stage is f(t + h, y_new)
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# continuous extension: y(t + s h) = y + h K^T (P @ [s, s^2, s^3, s^4])
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
H_INITIAL = 1e-3
H_MIN = 1e-12
ALPHA, BETA = 0.7 / 5, 0.4 / 5  # PI controller exponents
MIN_FACTOR, MAX_FACTOR = 0.2, 10.0


@dataclass
class GeodesicPath:
    samples: list[tuple[float, np.ndarray, np.ndarray]] = field(default_factory=list)
    status: str = COMPLETED
    steps_accepted: int = 0
    steps_rejected: int = 0

    @property
    def t(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples])

    @property
    def x(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples])

    @property
    def y(self) -> np.ndarray:
        return np.array([s[2] for s in self.samples])

    def to_csv(self, m: MetricDef) -> str:
        n = m.n
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)] + ["F"])
        for t, x, y in self.samples:
            row = [t, *x, *y, m.value(x, y)]
            writer.writerow([format(float(v), ".17g") for v in row])
        return buf.getvalue()


def _rhs(m: MetricDef, z: np.ndarray) -> np.ndarray:
    n = m.n
    x, y = z[:n], z[n:]
    return np.concatenate([y, -2.0 * spray_G(m, x, y)])


def integrate_geodesic(m: MetricDef, p0: BundlePoint, t_max: float, tol: float = 1e-9,
                       t_eval=None, samples: int = 101, margin: float = DEFAULT_MARGIN) -> GeodesicPath:
    """Integrate the spray from ``p0`` over ``[0, t_max]``.

    Output is sampled at ``t_eval`` (default ``samples`` equispaced times).
    The local error estimate of every accepted step satisfies
    ``|err_i| <= tol * (1 + max(|z_i|, |z_i_new|))``.
    """
    require_cone(m, p0, margin)
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    if t_eval is None:
        t_eval = np.linspace(0.0, t_max, samples)
    t_eval = np.asarray(t_eval, dtype=float)
    if np.any(np.diff(t_eval) <= 0) or t_eval[0] < 0 or t_eval[-1] > t_max:
        raise ValueError("t_eval must be strictly increasing within [0, t_max]")

    n = m.n
    z = np.concatenate([p0.x, p0.y])
    path = GeodesicPath()
    pending = list(t_eval)

    def emit(t, zz) -> bool:
        x, y = zz[:n].copy(), zz[n:].copy()
        if not m.in_cone(x, y, margin):
            path.status = LEFT_CONE
            return False
        path.samples.append((float(t), x, y))
        return True

    while pending and pending[0] == 0.0:
        pending.pop(0)
        emit(0.0, z)

    t, h = 0.0, min(H_INITIAL, t_max)
    err_prev = 1.0
    hit_cone = False  # the last rejection was a trial state outside the domain
    k1 = _rhs(m, z)
    K = np.empty((7, 2 * n))
    while t < t_max and pending:
        h = min(h, t_max - t)
        if h < H_MIN:
            path.status = LEFT_CONE if hit_cone else STEP_FAILURE
            break
        K[0] = k1
        try:
            for s in range(1, 6):
                K[s] = _rhs(m, z + h * (np.asarray(_A[s]) @ K[:s]))
            z_new = z + h * (_B @ K[:6])
            if not m.in_cone(z_new[:n], z_new[n:], margin):
                raise DomainError("trial step left the cone")
            K[6] = _rhs(m, z_new)
        except (DomainError, NumericPreconditionError, np.linalg.LinAlgError):
            # shrink towards the boundary; underflow there means the curve leaves the cone
            hit_cone = True
            path.steps_rejected += 1
            h *= 0.5
            continue
        scale = tol * (1.0 + np.maximum(np.abs(z), np.abs(z_new)))
        err = float(np.max(np.abs(h * (_E @ K)) / scale))
        if err <= 1.0:
            hit_cone = False
            Q = K.T @ _P
            while pending and pending[0] <= t + h:
                te = pending.pop(0)
                sigma = (te - t) / h
                zs = z_new if te == t + h else z + h * (Q @ np.cumprod(np.full(4, sigma)))
                if not emit(te, zs):
                    break
            if path.status == LEFT_CONE:
                break
            t += h
            z, k1 = z_new, K[6].copy()
            path.steps_accepted += 1
            factor = SAFETY * max(err, 1e-10) ** -ALPHA * err_prev ** BETA
            h *= min(MAX_FACTOR, max(MIN_FACTOR, factor))
            err_prev = max(err, 1e-4)
        else:
            hit_cone = False
            path.steps_rejected += 1
            h *= max(MIN_FACTOR, SAFETY * err ** -0.2)
    return path


def conservation_report(m: MetricDef, path: GeodesicPath) -> float:
    """Max relative drift of F along the path, ``max |F - F0| / F0``."""
    if not path.samples:
        return 0.0
    _, x0, y0 = path.samples[0]
    F0 = m.value(x0, y0)
    return max(abs(m.value(x, y) - F0) / F0 for _, x, y in path.samples)
