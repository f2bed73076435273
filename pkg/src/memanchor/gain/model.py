"""Diminishing-returns gain model and the regressions that test it."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import ArgumentError, DegenerateDesignError, SchemaError
from .stats import f_sf, t_two_sided_p

METRICS = ("lme_micro", "lme_macro", "locomo")


@dataclass(frozen=True)
class GainPoint:
    host: str
    metric: str
    base_accuracy: float
    delta: float

    def __post_init__(self):
        if self.metric not in METRICS:
            raise SchemaError(f"unknown metric {self.metric!r}; expected one of {', '.join(METRICS)}")
        if not 0 <= self.base_accuracy <= 100:
            raise SchemaError(f"base accuracy {self.base_accuracy} outside [0, 100]")
        if self.base_accuracy + self.delta > 100:
            raise SchemaError(f"base {self.base_accuracy} + delta {self.delta} exceeds 100")


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    r_squared: float
    n: int
    p_value_slope: float

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "r_squared": self.r_squared,
                "n": self.n, "p_value_slope": self.p_value_slope}


@dataclass(frozen=True)
class FTest:
    f_stat: float
    df1: int
    df2: int
    p_value: float

    def to_dict(self):
        return {"f_stat": self.f_stat, "df1": self.df1, "df2": self.df2, "p_value": self.p_value}


@dataclass(frozen=True)
class GainModelParams:
    lam: float
    delta_rho: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ArgumentError("lambda must be > 0")
        if not self.delta_rho >= 0:
            raise ArgumentError("delta_rho must be >= 0")

    @property
    def k_constant(self) -> float:
        return -math.expm1(-self.lam * self.delta_rho)


def predict_gain(p_base: float, params: GainModelParams) -> float:
    """Expected accuracy gain (1 - exp(-lambda * delta_rho)) * (1 - p_base)."""
    if not 0 <= p_base <= 1:
        raise ArgumentError(f"p_base must be in [0, 1], got {p_base!r}")
    return params.k_constant * (1.0 - p_base)


def _ols(x, y):
    n = len(x)
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    sxx = math.fsum((xi - mx) ** 2 for xi in x)
    if sxx == 0:
        raise DegenerateDesignError("all base accuracies are equal; slope is undefined")
    sxy = math.fsum((xi - mx) * (yi - my) for xi, yi in zip(x, y))
    slope = sxy / sxx
    intercept = my - slope * mx
    sse = math.fsum((yi - intercept - slope * xi) ** 2 for xi, yi in zip(x, y))
    sst = math.fsum((yi - my) ** 2 for yi in y)
    return slope, intercept, sxx, sse, sst


def fit_linear(points) -> RegressionFit:
    """OLS of delta on base accuracy with a two-sided t-test on the slope."""
    points = list(points)
    if len(points) < 3:
        raise DegenerateDesignError(f"need at least 3 points for a regression, got {len(points)}")
    x = [p.base_accuracy for p in points]
    y = [p.delta for p in points]
    slope, intercept, sxx, sse, sst = _ols(x, y)
    n = len(points)
    r2 = 1.0 if sst == 0 else max(0.0, min(1.0, 1.0 - sse / sst))
    df = n - 2
    se = math.sqrt(sse / df / sxx)
    if se == 0:
        p = 1.0 if slope == 0 else 0.0
    else:
        p = t_two_sided_p(slope / se, df)
    return RegressionFit(slope, intercept, r2, n, p)


def per_benchmark_fits(points) -> dict[str, RegressionFit]:
    groups = {}
    for p in points:
        groups.setdefault(p.metric, []).append(p)
    return {m: fit_linear(groups[m]) for m in METRICS if m in groups}


def _rss(design, y):
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return float(resid @ resid)


def nested_f_test(points, grouping=None) -> FTest:
    """Common slope versus one slope per group, both with a shared intercept."""
    points = list(points)
    labels = list(grouping) if grouping is not None else [p.host for p in points]
    if len(labels) != len(points):
        raise ArgumentError("grouping must have one label per point")
    groups = sorted(set(labels))
    if len(groups) < 2:
        raise ArgumentError("nested F-test needs at least 2 groups")
    for g in groups:
        if labels.count(g) < 2:
            raise ArgumentError(f"group {g!r} has fewer than 2 points")
    n = len(points)
    x = np.array([p.base_accuracy for p in points], dtype=float)
    y = np.array([p.delta for p in points], dtype=float)
    if np.all(x == x[0]):
        raise DegenerateDesignError("all base accuracies are equal")
    restricted = np.column_stack([np.ones(n), x])
    full = np.column_stack([np.ones(n)] + [x * (np.array(labels) == g) for g in groups])
    df_r, df_f = n - 2, n - 1 - len(groups)
    if df_f <= 0:
        raise ArgumentError("not enough points for one slope per group")
    if np.linalg.matrix_rank(full) < full.shape[1]:
        raise DegenerateDesignError("per-group slope design is rank deficient")
    rss_r, rss_f = _rss(restricted, y), _rss(full, y)
    df1 = df_r - df_f
    gain = max(0.0, rss_r - rss_f)
    if rss_f <= 0:
        f = 0.0 if gain == 0 else math.inf
    else:
        f = (gain / df1) / (rss_f / df_f)
    return FTest(f, df1, df_f, f_sf(f, df1, df_f))


def parse_points(text: str, source: str = "<csv>") -> list[GainPoint]:
    """Parse ``host,metric,base,delta`` rows; lines starting with '#' are comments."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(io.StringIO("\n".join(lines)))
    need = {"host", "metric", "base", "delta"}
    if reader.fieldnames is None or not need <= {f.strip() for f in reader.fieldnames}:
        raise SchemaError(f"{source}: header must contain host,metric,base,delta")
    points = []
    for i, row in enumerate(reader, 1):
        row = {k.strip(): (v or "").strip() for k, v in row.items() if k is not None}
        try:
            points.append(GainPoint(row["host"], row["metric"], float(row["base"]), float(row["delta"])))
        except ValueError as exc:
            raise SchemaError(f"{source}: row {i}: {exc}") from exc
    if not points:
        raise SchemaError(f"{source}: no data rows")
    return points


def load_points(path=None) -> list[GainPoint]:
    """Read a gain CSV; with no path, the bundled five-host dataset."""
    if path is None:
        text = resources.files("memanchor").joinpath("data/table1.csv").read_text(encoding="utf-8")
        return parse_points(text, "table1.csv")
    path = Path(path)
    return parse_points(path.read_text(encoding="utf-8"), str(path))
