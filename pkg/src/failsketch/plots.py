"""Figure rendering for simulation reports and epidemic curves.

Every report path writes its delimited output first; these helpers
render the companion PNGs.  Layout mirrors the classic presentation:
one point per host, true failure rate on x, estimated on y, with the
y = x reference line.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .pipeline import HostReport

plt.rcParams.update(
    {
        "figure.figsize": (5.2, 4.0),
        "font.size": 9,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "savefig.dpi": 130,
    }
)


def scatter_reports(reports: list[HostReport], path, title: str) -> None:
    """Per-host true vs estimated failure rate with the y = x line."""
    pairs = [(r.k_true, r.k_hat) for r in reports if r.k_true is not None]
    fig, ax = plt.subplots()
    if pairs:
        k_true, k_hat = map(np.asarray, zip(*pairs))
        top = max(1.0, 1.05 * float(max(k_true.max(), k_hat.max())))
        ax.plot([0, top], [0, top], color="0.4", lw=1, label="y = x")
        ax.scatter(k_true, k_hat, s=4, alpha=0.5, color="tab:blue", edgecolors="none")
        ax.set_xlim(0, top)
        ax.set_ylim(0, top)
    ax.set_xlabel("actual failure rate (per period)")
    ax.set_ylabel("estimated failure rate (per period)")
    ax.set_title(title)
    if pairs:
        ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def compare_budgets(rows: list[dict], path) -> None:
    """Worm-host error vs memory budget, one line per sketch kind."""
    fig, ax = plt.subplots()
    for kind, color in (("bitmap", "tab:red"), ("dsra", "tab:green")):
        pts = sorted(
            (row["budget_bits"], row["worm_mean_rel_error"])
            for row in rows
            if row["kind"] == kind
        )
        if pts:
            x, y = zip(*pts)
            ax.plot(
                [b / 1e6 for b in x], [100 * v for v in y],
                marker="o", color=color, label=kind,
            )
    ax.set_xlabel("memory per direction (Mbit)")
    ax.set_ylabel("scanner mean relative error (%)")
    ax.set_title("estimation error vs memory budget")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def epidemic_curves(
    times: np.ndarray,
    unlimited: np.ndarray,
    limited: np.ndarray,
    slowdown: float,
    path,
) -> None:
    """Infected fraction over time, with and without rate limiting."""
    fig, ax = plt.subplots()
    ax.plot(times / 3600.0, unlimited, color="tab:red", label="unlimited")
    ax.plot(times / 3600.0, limited, color="tab:green", label=f"limited ({slowdown:g}x slower)")
    ax.set_xlabel("time (hours)")
    ax.set_ylabel("infected fraction of vulnerable hosts")
    ax.set_title("propagation with and without rate limiting")
    ax.set_ylim(0, 1)
    ax.legend(loc="center right")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
