"""Gain analysis report: text summary, JSON, CSV of fits and a figure."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..errors import ArgumentError  # noqa: E402
from .model import METRICS, fit_linear, nested_f_test, per_benchmark_fits  # noqa: E402

COLORS = {"lme_micro": "tab:blue", "lme_macro": "tab:orange", "locomo": "tab:green"}


def analyze(points) -> dict:
    """Pooled fit, per-metric fits and the host-slope F-test.

    The pooled fit must succeed; per-metric fits and the F-test are reported
    as skipped when the data cannot support them.
    """
    points = list(points)
    report = {"n": len(points), "pooled": fit_linear(points).to_dict(), "per_benchmark": {}, "skipped": {}}
    groups = {}
    for p in points:
        groups.setdefault(p.metric, []).append(p)
    for metric in METRICS:
        if metric not in groups:
            continue
        try:
            report["per_benchmark"][metric] = per_benchmark_fits(groups[metric])[metric].to_dict()
        except ArgumentError as exc:
            report["skipped"][metric] = str(exc)
    try:
        report["f_test"] = nested_f_test(points).to_dict()
    except ArgumentError as exc:
        report["f_test"] = None
        report["skipped"]["f_test"] = str(exc)
    return report


def _fit_line(name, fit):
    return (f"{name:<10} n={fit['n']:<3d} slope={fit['slope']:+.4f}  intercept={fit['intercept']:.3f}  "
            f"R^2={fit['r_squared']:.4f}  p={fit['p_value_slope']:.3g}")


def format_report(report: dict) -> str:
    lines = ["Gain vs. baseline accuracy (delta regressed on base)", _fit_line("pooled", report["pooled"])]
    for metric, fit in report["per_benchmark"].items():
        lines.append(_fit_line(metric, fit))
    f = report.get("f_test")
    if f:
        lines.append(f"per-host slopes vs common slope: F({f['df1']},{f['df2']}) = {f['f_stat']:.4f}, "
                     f"p = {f['p_value']:.4f}")
    for what, why in report["skipped"].items():
        lines.append(f"skipped {what}: {why}")
    return "\n".join(lines)


def write_fits_csv(report: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["group", "n", "slope", "intercept", "r_squared", "p_value_slope"])
        rows = [("pooled", report["pooled"])] + list(report["per_benchmark"].items())
        for name, fit in rows:
            w.writerow([name, fit["n"], repr(fit["slope"]), repr(fit["intercept"]),
                        repr(fit["r_squared"]), repr(fit["p_value_slope"])])


def plot_gain(points, report: dict, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4.2), dpi=120)
    xs = [p.base_accuracy for p in points]
    lo, hi = min(xs) - 2, max(xs) + 2
    for metric in METRICS:
        sel = [p for p in points if p.metric == metric]
        if not sel:
            continue
        ax.scatter([p.base_accuracy for p in sel], [p.delta for p in sel], color=COLORS[metric], label=metric, s=28)
        fit = report["per_benchmark"].get(metric)
        if fit:
            ax.plot([lo, hi], [fit["intercept"] + fit["slope"] * lo, fit["intercept"] + fit["slope"] * hi],
                    color=COLORS[metric], linewidth=1, linestyle="--")
    pooled = report["pooled"]
    ax.plot([lo, hi], [pooled["intercept"] + pooled["slope"] * lo, pooled["intercept"] + pooled["slope"] * hi],
            color="black", linewidth=1.5,
            label=f"pooled: slope {pooled['slope']:.2f}, R$^2$ {pooled['r_squared']:.2f}")
    ax.set_xlabel("base accuracy (%)")
    ax.set_ylabel("gain (percentage points)")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def write_outputs(points, report: dict, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"json": out / "report.json", "csv": out / "fits.csv", "figure": out / "gain_vs_base.png"}
    paths["json"].write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_fits_csv(report, paths["csv"])
    plot_gain(points, report, paths["figure"])
    return paths
