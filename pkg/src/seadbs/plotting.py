"""Line plots for the experiment CSVs.

Every function takes already-aggregated arrays and a destination path and
writes a single PNG; nothing here touches the simulator.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 3.6),
    "figure.dpi": 120,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "savefig.bbox": "tight",
}

VARIANT_LABELS = {
    "baseline": "Baseline",
    "baseline_pm": "Baseline+PM",
    "baseline_gs": "Baseline+GS",
    "sea_dbs": "SEA-DBS",
}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # no Software tag: keeps PNG bytes stable between identical runs
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def line_plot(series: dict[str, tuple], path, xlabel: str, ylabel: str, title: str = "",
              hline: float | None = None) -> Path:
    """``series`` maps a label to ``(x, y)`` or ``(x, y, band)``; band is shaded +-."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, data in series.items():
            x, y = data[0], data[1]
            (ln,) = ax.plot(x, y, label=VARIANT_LABELS.get(label, label), lw=1.3)
            if len(data) > 2 and data[2] is not None:
                ax.fill_between(x, y - data[2], y + data[2], color=ln.get_color(), alpha=0.15, lw=0)
        if hline is not None:
            ax.axhline(hline, color="0.4", ls="--", lw=0.8)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend()
        return _save(fig, path)


def training_curves(episodes: dict[str, tuple], out_dir, prefix: str = "train") -> list[Path]:
    """PSD and reward vs episode; ``episodes[label] = (episode, beta, reward)``."""
    out_dir = Path(out_dir)
    psd = {k: (v[0], v[1]) for k, v in episodes.items()}
    rew = {k: (v[0], v[2]) for k, v in episodes.items()}
    return [
        line_plot(psd, out_dir / f"{prefix}_beta.png", "episode", "mean relative beta power"),
        line_plot(rew, out_dir / f"{prefix}_reward.png", "episode", "episode return"),
    ]


def bar_plot(values: dict[str, float], path, ylabel: str, title: str = "") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        labels = list(values)
        ax.bar([VARIANT_LABELS.get(k, k) for k in labels], [values[k] for k in labels], color="0.55")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        return _save(fig, path)
