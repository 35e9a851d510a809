"""Log-log convergence figures with reference-slope triangles."""

from dataclasses import dataclass

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .reader import MissingColumnError, read_blocks

X_CHOICES = ("h", "cells")


@dataclass(frozen=True)
class PlotSpec:
    """What to draw: which files, which x-axis, which error columns, which
    reference slopes, and where to write the image (None skips writing).

    Slopes are rates with respect to h.  With ``x="cells"`` the triangles are
    drawn with slope -s/2 (cells grows like h^-2 on uniform refinements) but
    keep their h-rate labels.
    """

    inputs: tuple
    x: str = "h"
    columns: tuple = ("err_u_l2",)
    slopes: tuple = ()
    out: str = None


def _curve_label(block, column, n_blocks, n_columns):
    parts = []
    if n_blocks > 1 or n_columns == 1:
        parts.append(block.label)
    if n_columns > 1:
        parts.append(column)
    return " ".join(parts)


def _column_data(block, column, path):
    if column not in block.columns:
        raise MissingColumnError(column, path)
    values = block.values(column)
    if any(v is None for v in values):
        raise ValueError("column %r in %s has empty cells" % (column, path))
    arr = np.asarray(values, dtype=float)
    if not (arr > 0).all():
        raise ValueError("column %r in %s is not positive, cannot draw "
                         "log-log" % (column, path))
    return arr


def _slope_triangle(ax, x_pts, y_last, slope, drawn_slope):
    """Right triangle under the last two points of a curve, hypotenuse of
    the given drawn slope, labelled with the h-rate."""
    xa, xb = sorted(x_pts)
    ref = 0.55 * y_last * (np.array([xa, xb]) / x_pts[-1]) ** drawn_slope
    (x_hi, r_hi), (x_lo, r_lo) = sorted(zip((xa, xb), ref),
                                        key=lambda t: -t[1])
    ax.plot([xa, xb, x_hi, xa], [ref[0], ref[1], r_lo, ref[0]],
            color="0.45", lw=0.9, gid="slope-triangle", zorder=1)
    ax.text(np.sqrt(xa * xb), 0.82 * r_lo, "%g" % slope, color="0.35",
            fontsize=8, ha="center", va="top", gid="slope-label")


def plot_convergence(spec):
    """Render the figure described by `spec`; returns the matplotlib Figure.

    One curve per (block, column).  The output file is only written after
    every input validates, so failures leave nothing behind.
    """
    if spec.x not in X_CHOICES:
        raise ValueError("x axis must be one of %s, got %r"
                         % (X_CHOICES, spec.x))
    if not spec.columns:
        raise ValueError("no columns requested")
    per_file = [(path, read_blocks(path)) for path in spec.inputs]
    n_blocks = sum(len(blocks) for _, blocks in per_file)
    curves = []
    for path, blocks in per_file:
        for block in blocks:
            x = _column_data(block, spec.x, path)
            for column in spec.columns:
                y = _column_data(block, column, path)
                label = _curve_label(block, column, n_blocks,
                                     len(spec.columns))
                curves.append((x, y, label))

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for x, y, label in curves:
        ax.plot(x, y, "o-", label=label, ms=4)
    drawn = {"h": lambda s: s, "cells": lambda s: -0.5 * s}[spec.x]
    for x, y, _ in curves:
        for s in spec.slopes:
            _slope_triangle(ax, x[-2:], y[-1], s, drawn(s))
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(spec.x)
    ax.set_ylabel("error")
    ax.grid(True, which="both", alpha=0.25)
    ax.legend(fontsize=8)
    if spec.out is not None:
        fig.savefig(spec.out, dpi=150)
    return fig
