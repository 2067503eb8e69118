"""Sampled checks of the structural identities at the heart of the construction.

``validate_metric`` checks the defining properties of a pseudo-Finsler
structure (positivity, positive 1-homogeneity, nondegeneracy, constant index).
``identity_suite`` checks, point by point, the identities of the spray,
the almost product structure Gamma and the Sasaki matrix.
"""

from __future__ import annotations

import numpy as np

from .dsl import MetricDef, bundle_env
from .errors import DegenerateTensorError
from .geometry import (
    DEFAULT_MARGIN,
    fundamental_tensor,
    gamma_block_from,
    gamma_via_lie_from,
    horizontal_projector,
    liouville,
    local_geometry,
    quasi_tangent,
    sasaki_from,
    sasaki_via_projectors,
    spray_jacobian,
    spray_vector_from,
)
from .jets import jet_eval
from .report import FAIL_THRESHOLD, CheckResult, VerificationReport
from .sampling import BundlePoint, SampleConfig, draw_samples

HOMOGENEITY_FACTORS = (0.5, 2.0)
KERNEL_ZERO = 1e-8


def _maxabs(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(a))) if a.size else 0.0


def _rel(a, b) -> float:
    scale = _maxabs(b)
    diff = _maxabs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    if diff == 0.0:
        return 0.0
    return diff / scale if scale > 0 else np.inf


def _check(name, tol, fail=FAIL_THRESHOLD, note=""):
    return CheckResult(name, tol, fail, note=note)


def validate_metric(m: MetricDef, config: SampleConfig | None = None) -> VerificationReport:
    config = config or SampleConfig(count=50)
    points = draw_samples(m, config)
    positive = _check("F > 0 on cone", 0.0, 0.0)
    homog = _check("F(x,ty) = t F(x,y)", 1e-9)
    euler = _check("Euler: y.dF/dy = F", 1e-10)
    nondeg = _check("g nondegenerate", 0.0, 0.0)
    quad = _check("g(y,y) = F^2", 1e-9)
    const = _check("index constant", 0.0, 0.0)
    k0 = None
    yseeds = [f"y{i + 1}" for i in range(m.n)]
    for p in points:
        wit = p.as_list
        F = m.value(p.x, p.y)
        positive.add(0.0 if F > 0 else 1.0, wit)
        for t in HOMOGENEITY_FACTORS:
            homog.add(_rel(m.value(p.x, t * p.y), t * F), wit)
        jet = jet_eval(m.F, bundle_env(p.x, p.y), yseeds, order=1)
        euler.add(abs(float(jet.first @ p.y) - F) / abs(F) if F else np.inf, wit)
        try:
            ft = fundamental_tensor(m, p, margin=None)
        except DegenerateTensorError:
            nondeg.add(1.0, wit)
            continue
        nondeg.add(0.0, wit)
        quad.add(_rel(p.y @ ft.g @ p.y, F * F), wit)
        if k0 is None:
            k0 = ft.index_k
        const.add(0.0 if ft.index_k == k0 else 1.0, lambda p=p, k=ft.index_k: {**p.as_list(), "index": k})
    info = {"metric": m.name, "dim": m.n, "index_k": k0}
    return VerificationReport(
        f"validate {m.name}", [positive, homog, euler, nondeg, quad, const], config.seed, config.count, info
    )


def identity_suite(m: MetricDef, config: SampleConfig | None = None, spray_fault: float = 0.0,
                   expected_index: int | None = None) -> VerificationReport:
    """Run every pointwise identity of spray, connection and Sasaki lift.

    With ``spray_fault`` != 0 the spray coefficients are perturbed (G^1 +=
    fault) to demonstrate that the suite catches a wrong spray.
    """
    config = config or SampleConfig()
    n = m.n
    J = quasi_tangent(n)
    I2 = np.eye(2 * n)
    checks = {
        "J(S) = C": _check("J(S) = C", 1e-12),
        "[C,S] = S": _check("[C,S] = S", 1e-9),
        "Gamma^2 = Id": _check("Gamma^2 = Id", 1e-9),
        "(Gamma+I) Ver = 0": _check("(Gamma+I) Ver = 0", 1e-9),
        "dim Ker(Gamma-I) = n": _check("dim Ker(Gamma-I) = n", 0.0, 0.0),
        "gamma_via_lie = gamma_block": _check("gamma_via_lie = gamma_block", 1e-9),
        "h^2 = h": _check("h^2 = h", 1e-9),
        "h S = S (spray horizontal)": _check("h S = S (spray horizontal)", 1e-9),
        "G(x,ty) = t^2 G(x,y)": _check("G(x,ty) = t^2 G(x,y)", 1e-9),
        "N(x,ty) = t N(x,y)": _check("N(x,ty) = t N(x,y)", 1e-9),
        "g(y,y) = F^2": _check("g(y,y) = F^2", 1e-9),
        "index constant": _check("index constant", 0.0, 0.0),
        "index(GF) = 2k": _check("index(GF) = 2k", 0.0, 0.0),
        "Sasaki block = projector assembly": _check("Sasaki block = projector assembly", 1e-9),
    }
    k0 = expected_index
    for p in draw_samples(m, config):
        wit = p.as_list
        geo = local_geometry(m, p, margin=None, spray_fault=spray_fault)
        S = spray_vector_from(geo)
        C = liouville(p)
        checks["J(S) = C"].add(_maxabs(J @ S - C), wit)

        # [C,S]^a = C^c d_c S^a - S^c d_c C^a, with dC/dz = [[0,0],[0,I]]
        DS = spray_jacobian(geo)
        DC = np.zeros((2 * n, 2 * n))
        DC[n:, n:] = np.eye(n)
        bracket = DS @ C - DC @ S
        checks["[C,S] = S"].add(_rel(bracket, S), wit)

        lie = gamma_via_lie_from(geo)
        block = gamma_block_from(geo)
        Gm = lie.matrix
        checks["Gamma^2 = Id"].add(_maxabs(Gm @ Gm - I2), wit)
        checks["(Gamma+I) Ver = 0"].add(_maxabs((Gm + I2)[:, n:]), wit)
        sv = np.linalg.svd(Gm - I2, compute_uv=False)
        kernel = int(np.sum(sv < KERNEL_ZERO))
        checks["dim Ker(Gamma-I) = n"].add(abs(kernel - n), wit)
        checks["gamma_via_lie = gamma_block"].add(_maxabs(Gm - block.matrix), wit)

        h = horizontal_projector(lie)
        checks["h^2 = h"].add(_maxabs(h @ h - h), wit)
        checks["h S = S (spray horizontal)"].add(_rel(h @ S, S), wit)

        for t in HOMOGENEITY_FACTORS:
            scaled = local_geometry(m, BundlePoint(p.x, t * p.y), margin=None, spray_fault=spray_fault)
            checks["G(x,ty) = t^2 G(x,y)"].add(_rel(scaled.G, t * t * geo.G), wit)
            checks["N(x,ty) = t N(x,y)"].add(_rel(scaled.N, t * geo.N), wit)

        checks["g(y,y) = F^2"].add(_rel(p.y @ geo.g @ p.y, geo.F ** 2), wit)
        k = geo.tensor.index_k
        if k0 is None:
            k0 = k
        checks["index constant"].add(0.0 if k == k0 else 1.0, lambda p=p, k=k: {**p.as_list(), "index": k})
        sas = sasaki_from(geo)
        checks["index(GF) = 2k"].add(abs(sas.index - 2 * k0), lambda p=p, s=sas: {**p.as_list(), "index_GF": s.index})
        checks["Sasaki block = projector assembly"].add(_rel(sas.GF, sasaki_via_projectors(geo)), wit)
    info = {"metric": m.name, "dim": n, "index_k": k0, "margin": config.margin}
    if spray_fault:
        info["spray_fault"] = spray_fault
    return VerificationReport(f"identities {m.name}", list(checks.values()), config.seed, config.count, info)


__all__ = ["validate_metric", "identity_suite", "DEFAULT_MARGIN"]
