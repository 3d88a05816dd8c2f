"""Render coverage-over-time figures next to the CSV data."""
from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")  # headless; must be selected before pyplot loads
import matplotlib.pyplot as plt  # noqa: E402

Timeline = Sequence[tuple[int, int, int]]


def plot_coverage(
    timelines: Timeline | Mapping[str, Timeline],
    out_path: str,
    x_axis: str = "iteration",
) -> None:
    """Save a step plot of distinct engine edges over a campaign.

    `timelines` is either one timeline or a mapping of label to timeline
    (e.g. one per worker); `x_axis` selects "iteration" or "elapsed_ms".
    """
    if x_axis not in ("iteration", "elapsed_ms"):
        raise ValueError(f"x_axis must be 'iteration' or 'elapsed_ms', got {x_axis!r}")
    if not isinstance(timelines, Mapping):
        timelines = {"": timelines}
    col = 0 if x_axis == "iteration" else 1

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for label, tl in timelines.items():
        xs = [row[col] for row in tl]
        ys = [row[2] for row in tl]
        ax.step(xs, ys, where="post", label=label or None)
    ax.set_xlabel(x_axis.replace("_", " "))
    ax.set_ylabel("distinct engine edges")
    ax.set_title("coverage growth")
    ax.grid(True, alpha=0.3)
    if len(timelines) > 1:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
