"""Figures and delimited tables for the ``report`` command."""

from __future__ import annotations

import csv
import io
import itertools

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import LogNorm  # noqa: E402

from geotorsion.torsion import VANISHING_THRESHOLD, InvariantVector  # noqa: E402

# PNG metadata would otherwise carry the matplotlib version string
_SAVE = {"dpi": 120, "metadata": {"Software": None}, "bbox_inches": "tight"}


def vector_csv(vec: InvariantVector) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "C", "D", "value"])
    for (C, D), v in vec.components.items():
        w.writerow([len(C), " ".join(C), " ".join(D), repr(float(v))])
    return buf.getvalue()


def level_heatmap(vec: InvariantVector, level: int, path: str, threshold: float = VANISHING_THRESHOLD) -> None:
    """|I_{C,D}| over all C (columns) and D (rows) of one level, log colour scale."""
    subsets = [tuple(s) for s in itertools.combinations(vec.edge_order, level)]
    pos = {s: i for i, s in enumerate(subsets)}
    grid = np.zeros((len(subsets), len(subsets)))
    for (C, D), v in vec.level(level).items():
        grid[pos[D], pos[C]] = abs(float(v))
    top = grid.max()
    floor = top * threshold if top > 0 else 1.0
    shown = np.where(grid >= floor, grid, np.nan)

    size = max(4.0, min(14.0, 0.12 * len(subsets) + 3))
    fig, ax = plt.subplots(figsize=(size, size))
    if top > 0:
        im = ax.imshow(shown, norm=LogNorm(vmin=floor, vmax=top), cmap="viridis", interpolation="nearest")
        fig.colorbar(im, ax=ax, shrink=0.8, label="|I|")
    else:
        ax.imshow(grid, cmap="Greys", interpolation="nearest")
    labels = [",".join(s) or "{}" for s in subsets]
    if len(subsets) <= 80:
        ax.set_xticks(range(len(subsets)), labels, rotation=90, fontsize=5)
        ax.set_yticks(range(len(subsets)), labels, fontsize=5)
    ax.set_xlabel("C")
    ax.set_ylabel("D")
    ax.set_title(f"level {level}: components above {threshold:g} x max")
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def factor_heatmap(table, names, path: str) -> None:
    table = np.asarray(table)
    lim = max(1, int(np.abs(table).max()))
    fig, ax = plt.subplots(figsize=(6, 5.5))
    im = ax.imshow(table, cmap="RdBu_r", vmin=-lim, vmax=lim)
    for (r, c), v in np.ndenumerate(table):
        if v:
            ax.text(c, r, str(v), ha="center", va="center", fontsize=7)
    ax.set_xticks(range(len(names)), names, rotation=90, fontsize=7)
    ax.set_yticks(range(len(names)), names, fontsize=7)
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_title("f3 / J(ABCD)")
    fig.savefig(path, **_SAVE)
    plt.close(fig)
