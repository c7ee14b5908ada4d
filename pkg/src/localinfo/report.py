"""Report emission: delimited risk tables and the companion figures."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .harness import RiskReport, rate_fit

CSV_COLUMNS = ["family", "constraint_kind", "constraint_value", "n", "d", "s",
               "p", "trials", "risk", "stderr", "seed"]


def write_risk_csv(report: RiskReport, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in report.rows():
            writer.writerow(row)
    return path


def write_risk_json(report: RiskReport, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True, default=float))
    return path


def render_risk_figure(report: RiskReport, path) -> Path:
    """Log-log risk curve with bootstrap error bars and the fitted slope."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    cfg = report.config
    ns = [pt.n for pt in report.points]
    risks = [pt.risk for pt in report.points]
    errs = [pt.stderr for pt in report.points]

    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.errorbar(ns, risks, yerr=errs, fmt="o-", capsize=3, label="empirical risk")
    if len(report.points) >= 3 and all(r > 0 for r in risks):
        fit = rate_fit(report)
        xs = [min(ns), max(ns)]
        ys = [math.exp(fit.intercept + fit.slope * math.log(x)) for x in xs]
        ax.plot(xs, ys, "--", color="gray",
                label=f"fit: slope {fit.slope:+.3f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("players n")
    p_label = "inf" if cfg.p == math.inf else f"{cfg.p:g}"
    ax.set_ylabel(f"l{p_label} risk")
    constraint = (f"eps={cfg.eps:g}" if cfg.eps is not None
                  else f"b={cfg.bits}" if cfg.bits is not None else "unconstrained")
    ax.set_title(f"{cfg.estimator} on {cfg.family} (d={cfg.d}, s={cfg.s}, {constraint})")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
