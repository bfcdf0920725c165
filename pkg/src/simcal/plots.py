"""Figure rendering for study reports.

Renders q-q diagnostics of replicate p-values against Uniform[0,1] and
error/sensitivity curves across the alpha grid. Uses the Agg backend
with pinned PNG metadata so identical inputs yield identical bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_PNG_METADATA = {"Software": "simcal"}
_DPI = 120


def _save(fig, path: Path) -> None:
    fig.savefig(path, dpi=_DPI, metadata=_PNG_METADATA)
    plt.close(fig)


def render_qq(p_values, path, title: str = "p-value q-q", label: str = "calibrated",
              naive_p_values=None) -> Path:
    """Sorted replicate p-values against uniform quantiles s/m."""
    p = np.sort(np.asarray(p_values, dtype=float))
    m = p.size
    q = np.arange(1, m + 1) / m
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot([0, 1], [0, 1], color="0.6", lw=1, label="uniform")
    ax.plot(q, p, lw=1.2, label=label)
    if naive_p_values is not None:
        pn = np.sort(np.asarray(naive_p_values, dtype=float))
        ax.plot(np.arange(1, pn.size + 1) / pn.size, pn, lw=1.2,
                linestyle="--", label="uncalibrated")
    ax.set_xlabel("uniform quantile")
    ax.set_ylabel("sorted p-value")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize=8)
    path = Path(path)
    _save(fig, path)
    return path


def render_metric_curves(per_alpha: dict, path, title: str = "selection metrics") -> Path:
    """FWER / FDR / sensitivity against alpha, one panel per criterion.

    ``per_alpha`` maps criterion name to {alpha: {metric: value}}.
    """
    criteria = sorted(per_alpha)
    fig, axes = plt.subplots(
        1, len(criteria), figsize=(5 * len(criteria), 4), squeeze=False
    )
    for ax, crit in zip(axes[0], criteria):
        table = {float(a): v for a, v in per_alpha[crit].items()}
        alphas = sorted(table)
        for metric in ("fwer", "fdr", "sensitivity"):
            vals = [table[a][metric] for a in alphas]
            ax.plot(alphas, vals, marker=".", lw=1.2, label=metric)
        ax.plot(alphas, alphas, color="0.6", lw=1, linestyle=":", label="alpha")
        ax.set_xlabel("alpha")
        ax.set_ylim(-0.02, 1.02)
        ax.set_title(crit)
        ax.legend(fontsize=8)
    fig.suptitle(title)
    path = Path(path)
    _save(fig, path)
    return path
