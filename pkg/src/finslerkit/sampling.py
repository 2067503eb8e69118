"""Seeded, platform-independent sampling of bundle points.

Random numbers come from numpy's Philox4x64 counter-based generator. Sample
``i`` of a run with seed ``s`` uses its own stream keyed by ``(s, i)``, so
any sample can be regenerated (or drawn in parallel) from the pair alone and
the bit stream does not depend on the platform.

Each draw takes ``n`` uniforms for x from the chart box, then ``n`` uniforms
for y from the fibre box, and is rejected unless every cone expression
exceeds the margin.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dsl import MetricDef
from .errors import SamplingExhaustedError

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class BundlePoint:
    """A point (x, y) of the tangent bundle over one chart."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be vectors of the same length")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def as_list(self) -> dict:
        return {"x": self.x.tolist(), "y": self.y.tolist()}


Interval = tuple[float, float]


@dataclass(frozen=True)
class SampleConfig:
    """Where and how many bundle points to draw.

    ``x_box``/``y_box`` are either one interval applied to every coordinate
    or one interval per coordinate.
    """

    seed: int = 0
    count: int = 100
    x_box: Interval | Sequence[Interval] = (-1.0, 1.0)
    y_box: Interval | Sequence[Interval] = (-2.0, 2.0)
    margin: float = 1e-6
    max_rejections: int = 100_000

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be at least 1")
        if self.margin < 0:
            raise ValueError("margin must be non-negative")
        for box in (self.x_box, self.y_box):
            for lo, hi in _intervals(box):
                if not lo < hi:
                    raise ValueError(f"empty sampling interval ({lo}, {hi})")

    def bounds(self, which: str, n: int) -> tuple[np.ndarray, np.ndarray]:
        ivs = _intervals(self.x_box if which == "x" else self.y_box)
        if len(ivs) == 1:
            ivs = ivs * n
        if len(ivs) != n:
            raise ValueError(f"{which}_box has {len(ivs)} intervals for dimension {n}")
        lo, hi = np.array(ivs, dtype=float).T
        return lo, hi

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "count": self.count,
            "x_box": list(self.x_box),
            "y_box": list(self.y_box),
            "margin": self.margin,
        }


def _intervals(box) -> list[Interval]:
    if len(box) == 2 and all(np.isscalar(v) for v in box):
        return [(float(box[0]), float(box[1]))]
    return [(float(lo), float(hi)) for lo, hi in box]


def sample_stream(seed: int, index: int) -> np.random.Generator:
    key = np.array([seed & _MASK64, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def draw_samples(m: MetricDef, s: SampleConfig) -> list[BundlePoint]:
    """``s.count`` bundle points strictly inside the cone (by ``s.margin``)."""
    xlo, xhi = s.bounds("x", m.n)
    ylo, yhi = s.bounds("y", m.n)
    points, rejected = [], 0
    for i in range(s.count):
        rng = sample_stream(s.seed, i)
        while True:
            x = xlo + (xhi - xlo) * rng.random(m.n)
            y = ylo + (yhi - ylo) * rng.random(m.n)
            if m.in_cone(x, y, s.margin):
                points.append(BundlePoint(x, y))
                break
            rejected += 1
            if rejected >= s.max_rejections:
                raise SamplingExhaustedError(
                    f"no cone point found for {m.name!r} after {rejected} rejected draws "
                    f"(margin {s.margin}); the cone is too thin for the sampling box"
                )
    return points


def draw_unconstrained(n: int, s: SampleConfig) -> list[BundlePoint]:
    """Bundle points with no cone condition (for metric-free checks)."""
    xlo, xhi = s.bounds("x", n)
    ylo, yhi = s.bounds("y", n)
    out = []
    for i in range(s.count):
        rng = sample_stream(s.seed, i)
        out.append(BundlePoint(xlo + (xhi - xlo) * rng.random(n), ylo + (yhi - ylo) * rng.random(n)))
    return out
