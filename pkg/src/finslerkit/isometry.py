"""Sampled isometry verification through the lift ``Phi = df``.

A map f of the chart lifts to the tangent bundle as ``Phi(x, y) = (f(x),
Df(x) y)`` with differential ``DPhi = [[Df, 0], [D2f[y], Df]]``. The checks
here compare F, the quasi-tangent structure J, the spray and the Sasaki
matrix across Phi at seeded bundle points.
"""

from __future__ import annotations

import warnings

import numpy as np

from .catalog import CatalogEntry, sample_linear_isometry
from .dsl import MapDef, MetricDef, bundle_env, parse_map
from .errors import IllConditionedWarning, NumericPreconditionError, SingularJacobianError
from .geometry import COND_WARN, local_geometry, quasi_tangent, sasaki_from, spray_vector_from
from .identities import _maxabs, _rel
from .jets import jet_eval
from .report import FAIL_THRESHOLD, CheckResult, VerificationReport
from .sampling import BundlePoint, SampleConfig, draw_samples, draw_unconstrained, sample_stream

EXACT_TOL = 1e-9
INVERSE_TOL = 1e-8
JACOBIAN_DET_TOL = 1e-12
SECOND_JET_NOTE = ("supporting evidence only: uniqueness is tested inside one parameterized "
                   "family of linear isometries, not over the full isometry group")


def map_jets(f: MapDef, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``f(x)``, ``Df(x)`` and ``D2f(x)`` (shape n x n x n) from order-2 jets."""
    env = bundle_env(x)
    seeds = [f"x{i + 1}" for i in range(f.n)]
    jets = [jet_eval(c, env, seeds, order=2) for c in f.components]
    return (np.array([j.value for j in jets]), np.array([j.first for j in jets]),
            np.array([j.second for j in jets]))


def lift_map(f: MapDef, p: BundlePoint) -> tuple[BundlePoint, np.ndarray]:
    """Image ``Phi(p)`` and the 2n x 2n differential ``DPhi(p)``.

    The image is not checked against any cone; callers decide.
    """
    if p.n != f.n:
        raise ValueError(f"point has dimension {p.n}, map {f.name!r} has {f.n}")
    fx, Df, D2f = map_jets(f, p.x)
    det = np.linalg.det(Df)
    if abs(det) <= JACOBIAN_DET_TOL:
        raise SingularJacobianError(f"Jacobian of {f.name!r} is singular at x={p.x.tolist()} (det={det:.3e})")
    cond = np.linalg.cond(Df)
    if cond > COND_WARN:
        warnings.warn(f"Jacobian of {f.name!r} has condition number {cond:.2e} at x={p.x.tolist()}",
                      IllConditionedWarning, stacklevel=2)
    n = f.n
    DPhi = np.zeros((2 * n, 2 * n))
    DPhi[:n, :n] = Df
    DPhi[n:, n:] = Df
    DPhi[n:, :n] = np.einsum("ijk,k->ij", D2f, p.y)
    return BundlePoint(fx, Df @ p.y), DPhi


def _config(s: SampleConfig | None) -> SampleConfig:
    return s or SampleConfig()


def _witness(p: BundlePoint, image: BundlePoint | None = None):
    def build():
        out = p.as_list()
        if image is not None:
            out["image"] = image.as_list()
        return out
    return build


def _finsler_checks(m: MetricDef, f: MapDef, points, margin: float) -> list[CheckResult]:
    cone = CheckResult("cone preserved: Phi(p) in cone", 0.0, 0.0)
    value = CheckResult("F(Phi(p)) = F(p)", EXACT_TOL, FAIL_THRESHOLD)
    for p in points:
        q, _ = lift_map(f, p)
        wit = _witness(p, q)
        inside = m.in_cone(q.x, q.y, margin)
        cone.add(0.0 if inside else 1.0, wit)
        if not inside:
            value.add(np.inf, wit)
            continue
        F = m.value(p.x, p.y)
        value.add(abs(m.value(q.x, q.y) - F) / F, wit)
    return [cone, value]


def verify_finsler_isometry(m: MetricDef, f: MapDef, s: SampleConfig | None = None) -> VerificationReport:
    s = _config(s)
    checks = _finsler_checks(m, f, draw_samples(m, s), s.margin)
    return VerificationReport(f"finsler-isometry {m.name} / {f.name}", checks, s.seed, s.count,
                              {"metric": m.name, "map": f.name})


def verify_J_invariance(f: MapDef, s: SampleConfig | None = None) -> VerificationReport:
    """``DPhi^-1 J DPhi = J`` at unconstrained bundle points; holds for every diffeomorphism."""
    s = _config(s)
    J = quasi_tangent(f.n)
    check = CheckResult("DPhi^-1 J DPhi = J", EXACT_TOL, FAIL_THRESHOLD)
    for p in draw_unconstrained(f.n, s):
        _, DPhi = lift_map(f, p)
        check.add(_maxabs(np.linalg.solve(DPhi, J @ DPhi) - J), _witness(p))
    return VerificationReport(f"J-invariance {f.name}", [check], s.seed, s.count, {"map": f.name})


def _image_geometry(m, q, margin):
    if not m.in_cone(q.x, q.y, margin):
        return None
    try:
        return local_geometry(m, q, margin=None)
    except (NumericPreconditionError, np.linalg.LinAlgError):
        return None


def _spray_check(m, f, points, margin) -> CheckResult:
    check = CheckResult("DPhi S(p) = S(Phi(p))", INVERSE_TOL, FAIL_THRESHOLD)
    for p in points:
        q, DPhi = lift_map(f, p)
        image = _image_geometry(m, q, margin)
        if image is None:
            check.add(np.inf, _witness(p, q))
            continue
        S = spray_vector_from(local_geometry(m, p, margin=None))
        check.add(_rel(DPhi @ S, spray_vector_from(image)), _witness(p, q))
    return check


def verify_spray_equivariance(m: MetricDef, f: MapDef, s: SampleConfig | None = None) -> VerificationReport:
    s = _config(s)
    check = _spray_check(m, f, draw_samples(m, s), s.margin)
    return VerificationReport(f"spray-equivariance {m.name} / {f.name}", [check], s.seed, s.count,
                              {"metric": m.name, "map": f.name})


SASAKI_CHECK = "DPhi^T GF(Phi(p)) DPhi = GF(p)"


def _sasaki_check(m, f, points, margin) -> CheckResult:
    check = CheckResult(SASAKI_CHECK, INVERSE_TOL, FAIL_THRESHOLD)
    for p in points:
        q, DPhi = lift_map(f, p)
        image = _image_geometry(m, q, margin)
        if image is None:
            check.add(np.inf, _witness(p, q))
            continue
        GF = sasaki_from(local_geometry(m, p, margin=None)).GF
        pulled = DPhi.T @ sasaki_from(image).GF @ DPhi
        check.add(_rel(pulled, GF), _witness(p, q))
    return check


def verify_sasaki_isometry(m: MetricDef, f: MapDef, s: SampleConfig | None = None) -> VerificationReport:
    """Pullback of the Sasaki matrix, reported next to the Finsler checks at the same samples.

    Keeping both in one report lets a reader confirm that a Sasaki PASS comes
    with a Finsler PASS and conversely.
    """
    s = _config(s)
    points = draw_samples(m, s)
    checks = [_sasaki_check(m, f, points, s.margin), *_finsler_checks(m, f, points, s.margin)]
    return VerificationReport(f"sasaki-isometry {m.name} / {f.name}", checks, s.seed, s.count,
                              {"metric": m.name, "map": f.name})


def verify_all(m: MetricDef, f: MapDef, s: SampleConfig | None = None) -> VerificationReport:
    """Finsler, J, spray and Sasaki checks with one combined verdict."""
    s = _config(s)
    points = draw_samples(m, s)
    checks = [
        *_finsler_checks(m, f, points, s.margin),
        *verify_J_invariance(f, s).checks,
        _spray_check(m, f, points, s.margin),
        _sasaki_check(m, f, points, s.margin),
    ]
    return VerificationReport(f"verify {m.name} / {f.name}", checks, s.seed, s.count,
                              {"metric": m.name, "map": f.name})


# --- second-jet evidence ---------------------------------------------------


def affine_map(A: np.ndarray, b: np.ndarray, name: str = "affine") -> MapDef:
    """MapDef for ``x -> A x + b`` built through the text format."""
    n = len(b)
    comps = []
    for i in range(n):
        terms = [f"({float(A[i, j])!r})*x{j + 1}" for j in range(n)] + [f"({float(b[i])!r})"]
        comps.append('"' + " + ".join(terms) + '"')
    return parse_map(f"dim = {n}\nf = [{', '.join(comps)}]\n", name=name)


def second_jet_evidence(entry: CatalogEntry, s: SampleConfig | None = None, trials: int = 5,
                        grid: int = 10) -> VerificationReport:
    """Lift-agreement at one point forces agreement on a grid, inside a linear-isometry family.

    For an x-independent norm, each trial draws a random isometry
    ``f(x) = A x + b`` from the entry's family, reads the first-order data of
    its lift at one bundle point, refits a family member from that data
    alone and compares both maps on a ``grid x grid`` evaluation grid.
    """
    if not entry.x_independent:
        raise ValueError(f"{entry.name!r} is not an x-independent norm with a linear isometry family")
    s = s or SampleConfig(seed=11, count=trials)
    m, n = entry.metric, entry.metric.n
    isometry = CheckResult("f is an isometry (Finsler check)", EXACT_TOL, FAIL_THRESHOLD)
    fitted = CheckResult("refit from lift data preserves F", EXACT_TOL, FAIL_THRESHOLD)
    agree = CheckResult("maps agree on evaluation grid", EXACT_TOL, FAIL_THRESHOLD, note=SECOND_JET_NOTE)
    axis = np.linspace(-1.0, 1.0, grid)
    points = draw_samples(m, s)
    for t, p in enumerate(points):
        rng = sample_stream(s.seed, 1_000_000 + t)
        A = sample_linear_isometry(entry.family, n, rng)
        b = rng.uniform(-1.0, 1.0, n)
        f1 = affine_map(A, b, f"iso{t}")
        for c in verify_finsler_isometry(m, f1, SampleConfig(seed=s.seed + t, count=8)).checks:
            isometry.add(c.max_residual, c.witness)

        q, DPhi = lift_map(f1, p)
        A2 = DPhi[:n, :n]
        b2 = q.x - A2 @ p.x
        for r in points:
            F = m.value(r.x, r.y)
            fitted.add(abs(m.value(r.x, A2 @ r.y) - F) / F, r.as_list)
        f2 = affine_map(A2, b2, f"refit{t}")
        for u in axis:
            for v in axis:
                x = np.zeros(n)
                x[0], x[1] = u, v
                agree.add(_maxabs(f1.apply(x) - f2.apply(x)), lambda x=x, t=t: {"trial": t, "x": x.tolist()})
    return VerificationReport(f"second-jet evidence {m.name}", [isometry, fitted, agree], s.seed, len(points),
                              {"metric": m.name, "family": entry.family, "grid": f"{grid}x{grid}",
                               "evidence": "supporting only"})
