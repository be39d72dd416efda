"""Matplotlib figures for frontier tables.

Figures are written as SVG with a fixed id salt and no timestamp so that
identical tables produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# 960 x 540 viewBox: matplotlib's SVG backend uses 72 units per inch
FIGSIZE = (960 / 72, 540 / 72)

RC = {
    "svg.hashsalt": "ccportfolio",
    "svg.fonttype": "path",
    "font.family": "DejaVu Sans",
    "font.size": 11,
    "axes.labelsize": 12,
    "axes.titlesize": 12,
    "legend.fontsize": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
}

TITLES = {
    "nominal": "Nominal model",
    "piecewise_linear": "Piecewise-linear generating function",
    "bernstein": "Bernstein approximation",
    "piecewise_quadratic": "Piecewise-quadratic generating function",
}


def frontier_figure(table):
    """Two panels: stacked allocations vs tau, and risk vs tau.

    Only optimal rows are drawn. A single optimal row yields markers
    without connecting segments.
    """
    rows = [r for r in table.rows if r.status == "optimal"]
    taus = np.array([r.tau for r in rows])
    weights = np.array([r.x for r in rows]).reshape(len(rows), -1)
    risks = np.array([r.risk for r in rows])
    labels = table.assets or tuple(f"x_{i + 1}" for i in range(weights.shape[1]))

    fig, (ax_alloc, ax_risk) = plt.subplots(1, 2, figsize=FIGSIZE)
    title = TITLES.get(table.kind, table.kind)
    fig.suptitle(f"{title} (beta = {table.beta:g})")

    if len(rows) > 1:
        stack = ax_alloc.stackplot(taus, weights.T, labels=labels, alpha=0.85)
        for k, poly in enumerate(stack):
            poly.set_gid(f"allocation-{k + 1}")
        line = ax_risk.plot(taus, risks, color="black", linewidth=1.5)[0]
        line.set_gid("frontier-line")
    else:
        bottom = 0.0
        for k, w in enumerate(weights.T):
            bar = ax_alloc.bar(taus, w, bottom=bottom, width=0.05, label=labels[k])
            bar.patches[0].set_gid(f"allocation-{k + 1}")
            bottom = bottom + w
    markers = ax_risk.plot(taus, risks, linestyle="none", marker="o", color="black")[0]
    markers.set_gid("frontier-markers")

    ax_alloc.set_xlabel("target return tau (%)")
    ax_alloc.set_ylabel("portfolio weight")
    ax_alloc.set_ylim(0.0, 1.0)
    ax_alloc.legend(loc="upper left", frameon=False)
    ax_alloc.set_title("Optimal allocation")
    ax_risk.set_xlabel("target return tau (%)")
    ax_risk.set_ylabel("optimal portfolio risk 0.5 x'Sx")
    ax_risk.set_title("Efficient frontier")
    fig.tight_layout()
    return fig


def save_svg(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_frontier(table, path) -> None:
    with plt.rc_context(RC):
        save_svg(frontier_figure(table), path)
