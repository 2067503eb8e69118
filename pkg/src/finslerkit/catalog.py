"""Built-in metrics and maps.

Every entry is shipped as a definition file under ``finslerkit/data`` and
loaded through the same parser as user files. Each entry lists maps known to
be isometries and maps known not to be, plus the expected index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .dsl import MapDef, MetricDef, parse_map, parse_metric
from .errors import InvalidMetricError
from .sampling import BundlePoint, SampleConfig, draw_samples, sample_stream  # noqa: F401  (re-exported)

# name -> (expected index, isometries, non-isometries, linear isometry family)
_ENTRIES = {
    "euclidean2": (0, ["rotation2", "translation2", "reflection2_x2"], ["dilation2", "shear2"], "orthogonal"),
    "euclidean3": (0, ["rotation3", "spatial_rotation3", "translation3"], ["dilation3", "boost3"], "orthogonal"),
    "minkowski2": (1, ["boost2", "translation2", "reflection2_x2"], ["rotation2", "dilation2", "time_reversal2"], "lorentz"),
    "minkowski3": (2, ["boost3", "spatial_rotation3", "translation3"], ["rotation3", "dilation3"], "lorentz"),
    "randers03": (0, ["translation2", "translation2_x2", "reflection2_x2"], ["rotation2", "dilation2"], "randers"),
    "randers06": (0, ["translation2", "translation2_x2", "reflection2_x2"], ["rotation2", "dilation2"], "randers"),
    "randers_wave2": (0, ["translation2"], ["translation2_x2", "reflection2_x2"], None),
    "conformal2": (0, ["translation2_x2", "reflection2_x2"], ["translation2", "rotation2"], None),
    "conformal_lorentz2": (1, ["translation2_x2", "reflection2_x2"], ["translation2", "time_reversal2"], None),
}


@dataclass(frozen=True)
class CatalogEntry:
    metric: MetricDef
    index: int
    isometries: tuple[MapDef, ...] = ()
    non_isometries: tuple[MapDef, ...] = ()
    family: str | None = field(default=None)

    @property
    def name(self) -> str:
        return self.metric.name

    @property
    def x_independent(self) -> bool:
        return self.family is not None


def _read(filename: str) -> str:
    return resources.files("finslerkit").joinpath("data").joinpath(filename).read_text(encoding="utf-8")


def builtin_metric(name: str) -> MetricDef:
    return parse_metric(_read(f"{name}.metric"), name=name)


def builtin_map(name: str) -> MapDef:
    return parse_map(_read(f"{name}.map"), name=name)


def metric_names() -> list[str]:
    return list(_ENTRIES)


def map_names() -> list[str]:
    files = resources.files("finslerkit").joinpath("data").iterdir()
    return sorted(f.name[:-4] for f in files if f.name.endswith(".map"))


def self_validate(entry: CatalogEntry, config: SampleConfig | None = None):
    from .identities import validate_metric

    report = validate_metric(entry.metric, config or SampleConfig(seed=7, count=16))
    if report.verdict != "PASS" or report.info["index_k"] != entry.index:
        raise InvalidMetricError(f"catalog entry {entry.name!r} failed self-validation:\n{report.to_text()}")


@lru_cache(maxsize=None)
def builtin_catalog(validate: bool = True) -> tuple[CatalogEntry, ...]:
    entries = []
    for name, (k, iso, non, family) in _ENTRIES.items():
        entry = CatalogEntry(
            builtin_metric(name),
            k,
            tuple(builtin_map(f) for f in iso),
            tuple(builtin_map(f) for f in non),
            family,
        )
        if validate:
            self_validate(entry)
        entries.append(entry)
    return tuple(entries)


def catalog_entry(name: str) -> CatalogEntry:
    for entry in builtin_catalog():
        if entry.name == name:
            return entry
    raise KeyError(f"no catalog entry named {name!r}; known: {', '.join(_ENTRIES)}")


def _orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def sample_linear_isometry(family: str, n: int, rng: np.random.Generator) -> np.ndarray:
    """A random linear isometry of an x-independent catalog norm.

    ``orthogonal``: O(n). ``lorentz``: time-orientation preserving Lorentz
    transformations (x1 timelike), a boost times a spatial O(n-1).
    ``randers``: maps fixing the drift direction e1, i.e. 1 (+) O(n-1).
    """
    if family == "orthogonal":
        return _orthogonal(n, rng)
    spatial = np.eye(n)
    spatial[1:, 1:] = _orthogonal(n - 1, rng)
    if family == "randers":
        return spatial
    if family == "lorentz":
        u = rng.standard_normal(n - 1)
        u /= np.linalg.norm(u)
        s = rng.uniform(-1.0, 1.0)
        boost = np.eye(n)
        boost[0, 0] = np.cosh(s)
        boost[0, 1:] = boost[1:, 0] = np.sinh(s) * u
        boost[1:, 1:] += (np.cosh(s) - 1.0) * np.outer(u, u)
        return boost @ spatial
    raise ValueError(f"unknown isometry family {family!r}")
