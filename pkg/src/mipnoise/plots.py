"""Static line-chart rendering for experiment summaries."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_line_chart(
    groups: list[dict],
    path: str | Path,
    log_y: bool = True,
    title: str | None = None,
    xlabel: str = "eta",
    ylabel: str = "value",
) -> Path:
    """One line per (method, n) series: mean value against eta.

    groups is the summarize() output. Saves whatever format the suffix asks
    for; the experiment pipeline uses .svg.
    """
    series: dict[tuple, list[tuple[float, float]]] = {}
    for g in groups:
        series.setdefault((g["method"], g["n"]), []).append((g["eta"], g["mean"]))
    n_values = {key[1] for key in series}
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for (method, n), points in sorted(series.items()):
        points.sort()
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        label = method if len(n_values) == 1 else f"{method} (n={n})"
        style = "--" if method == "dp" else "-"
        ax.plot(xs, ys, style, label=label, linewidth=1.5)
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path
