"""Gain model: predicted accuracy gain and regressions over host results."""
from .model import (
    METRICS,
    FTest,
    GainModelParams,
    GainPoint,
    RegressionFit,
    fit_linear,
    load_points,
    nested_f_test,
    parse_points,
    per_benchmark_fits,
    predict_gain,
)
from .stats import betainc, f_sf, t_two_sided_p

__all__ = [
    "FTest",
    "GainModelParams",
    "GainPoint",
    "METRICS",
    "RegressionFit",
    "betainc",
    "f_sf",
    "fit_linear",
    "load_points",
    "nested_f_test",
    "parse_points",
    "per_benchmark_fits",
    "predict_gain",
    "t_two_sided_p",
]
