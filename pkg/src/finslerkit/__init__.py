"""Numerical pseudo-Finsler geometry: fundamental tensor, geodesic spray,
nonlinear connection, Sasaki lift and isometry verification."""

from .dsl import MapDef, MetricDef, compose_maps, evaluate, format_expr, parse_expr, parse_map, parse_metric
from .sampling import BundlePoint, SampleConfig, draw_samples

__version__ = "0.1.0"

__all__ = [
    "BundlePoint",
    "MapDef",
    "MetricDef",
    "SampleConfig",
    "compose_maps",
    "draw_samples",
    "evaluate",
    "format_expr",
    "parse_expr",
    "parse_map",
    "parse_metric",
]
