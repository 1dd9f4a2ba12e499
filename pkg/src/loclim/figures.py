"""Figure rendering for the report path.

Static PNGs next to the delimited tables: a log-log rate plot with its
fitted slope line for rate records, and a variance/normalization panel
for distributional records.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["rate_figure", "clt_figure", "render_figures"]


def rate_figure(rec: dict, path) -> None:
    res = rec["results"]
    eps = np.asarray(res["eps"])
    mean_abs = np.asarray(res["mean_abs_delta"])
    se = np.asarray(res["se_mean_abs_delta"])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(eps, mean_abs, yerr=se, fmt="o", capsize=3, label="mean |delta|")
    fit = np.exp(res["intercept"]) * eps ** res["slope"]
    ax.loglog(eps, fit, "-", label=f"slope {res['slope']:.3f} +- {res['slope_se']:.3f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("bandwidth eps")
    ax.set_ylabel("mean |estimate - proxy|")
    ax.set_title(f"rate ({rec['regime']}), H={rec['config']['hurst']:g}")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def clt_figure(rec: dict, path) -> None:
    res = rec["results"]
    eps = np.asarray(res["eps"])
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    ax = axes[0]
    d_value = res["constant_value"] if res.get("constant_value") else 1.0
    ratio = np.asarray(res["var_F"]) / (d_value * res["mean_local_time"])
    ax.semilogx(eps, ratio, "o-")
    ax.axhline(1.0, color="k", lw=0.8)
    ax.set_xlabel("bandwidth eps")
    ax.set_ylabel("Var(F) / (D * mean local time)")
    ax.set_title(f"variance ratio ({rec['regime']})")
    ax.grid(True, which="both", alpha=0.3)

    ax = axes[1]
    sd = np.asarray(res["sd_delta"])
    ax.loglog(eps, sd, "o-", label=f"sd slope {res['sd_slope']:.3f}")
    ax.set_xlabel("bandwidth eps")
    ax.set_ylabel("sd(estimate - proxy)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_figures(records, out_dir) -> list:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for rec in records:
        kind = rec.get("kind", "record")
        path = out_dir / f"{kind}_{rec['config_hash']}.png"
        if kind == "rate":
            rate_figure(rec, path)
        elif kind == "clt":
            clt_figure(rec, path)
        else:
            continue
        written.append(path)
    return written
