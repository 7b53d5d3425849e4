"""Log-log convergence figures, rendered without pyplot so runs are headless."""

from __future__ import annotations

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure
import numpy as np

from ..errors import UsageError

_STYLE = {
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "lines.markersize": 5,
    "legend.fontsize": 8,
    "svg.hashsalt": "malliavin-sgd",
    "svg.fonttype": "none",
}


def convergence_figure(series, guides=(1, 2), title=None) -> Figure:
    """One polyline per ``ErrorSeries`` on log-log axes, plus dashed guide
    lines ``C n^-p`` for each order ``p`` in ``guides``."""
    with matplotlib.rc_context(_STYLE):
        fig = Figure(figsize=(6.0, 4.2))
        FigureCanvasSVG(fig)
        ax = fig.add_subplot(1, 1, 1)
        anchor = None
        for s in series:
            n = np.asarray(s.n, dtype=float)
            e = np.asarray(s.error, dtype=float)
            pos = e > 0
            ax.loglog(n[pos], e[pos], marker="o", label=f"{s.method} (K={s.k:g})")
            if anchor is None and pos.any():
                anchor = (n[pos][0], e[pos][0])
        if anchor is not None:
            grid = np.unique(np.concatenate([np.asarray(s.n, dtype=float) for s in series]))
            for p in guides:
                ax.loglog(grid, anchor[1] * (grid / anchor[0]) ** (-p), "k--", lw=0.8, alpha=0.6,
                          label=f"slope -{p}")
        ax.set_xlabel("time steps n")
        ax.set_ylabel("worst-strike absolute error")
        if title:
            ax.set_title(title)
        if series:
            ax.legend(loc="best")
        fig.tight_layout()
    return fig


def save_svg(fig: Figure, path) -> None:
    with matplotlib.rc_context(_STYLE):
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise UsageError(f"cannot write {path}: {exc}") from None
