"""Check results and verification reports.

A check PASSes when its max residual is within tolerance and FAILs above the
fail threshold; in between it is INCONCLUSIVE, since sampled verification can
refute or support a property but never certify it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

PASS, FAIL, INCONCLUSIVE = "PASS", "FAIL", "INCONCLUSIVE"
FAIL_THRESHOLD = 1e-3


def jsonable(value):
    """Convert numpy containers and non-finite floats for JSON output."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    return value


@dataclass
class CheckResult:
    name: str
    tolerance: float
    fail_threshold: float | None = None
    max_residual: float = 0.0
    witness: dict | None = None
    samples: int = 0
    note: str = ""

    @property
    def verdict(self) -> str:
        if self.max_residual <= self.tolerance:
            return PASS
        threshold = self.tolerance if self.fail_threshold is None else self.fail_threshold
        if self.max_residual > threshold or math.isnan(self.max_residual):
            return FAIL
        return INCONCLUSIVE

    def add(self, residual: float, witness: Any = None):
        """Fold one sample in; the witness of the worst sample is kept."""
        self.samples += 1
        residual = float(residual)
        if math.isnan(residual):
            residual = math.inf
        if residual > self.max_residual or (self.witness is None and residual == self.max_residual and residual > 0):
            self.max_residual = residual
            self.witness = witness() if callable(witness) else witness
        return self

    def merge(self, other: "CheckResult") -> "CheckResult":
        out = CheckResult(self.name, self.tolerance, self.fail_threshold, self.max_residual, self.witness,
                          self.samples + other.samples, self.note)
        if other.max_residual > out.max_residual:
            out.max_residual, out.witness = other.max_residual, other.witness
        return out

    def to_dict(self) -> dict:
        return jsonable({
            "check": self.name,
            "tolerance": self.tolerance,
            "fail_threshold": self.fail_threshold if self.fail_threshold is not None else self.tolerance,
            "max_residual": self.max_residual,
            "samples": self.samples,
            "verdict": self.verdict,
            "witness": self.witness,
            **({"note": self.note} if self.note else {}),
        })


@dataclass
class VerificationReport:
    title: str
    checks: list[CheckResult] = field(default_factory=list)
    seed: int | None = None
    count: int | None = None
    info: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        verdicts = [c.verdict for c in self.checks]
        if FAIL in verdicts:
            return FAIL
        if INCONCLUSIVE in verdicts:
            return INCONCLUSIVE
        return PASS

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return jsonable({
            "title": self.title,
            "seed": self.seed,
            "count": self.count,
            "verdict": self.verdict,
            "info": self.info,
            "checks": [c.to_dict() for c in self.checks],
        })

    def to_text(self) -> str:
        lines = [f"{self.title}: {self.verdict}  (seed={self.seed}, samples={self.count})"]
        for key, value in self.info.items():
            lines.append(f"  {key}: {value}")
        for c in self.checks:
            lines.append(
                f"  {c.verdict:<12} {c.name:<34} max_residual={c.max_residual:.3e}  tol={c.tolerance:.1e}"
            )
            if c.verdict != PASS and c.witness is not None:
                lines.append(f"  {'':<12} witness: {jsonable(c.witness)}")
            if c.note:
                lines.append(f"  {'':<12} note: {c.note}")
        return "\n".join(lines)
