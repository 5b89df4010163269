"""Rendering cost-curve figures from trace CSVs."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .spec import SpecError
from .trace import read_trace, windowed_average


def _series_values(spec, paths):
    """Per-seed metric arrays for one series, stacked as (seeds, T)."""
    time_axis = None
    rows = []
    for path in paths:
        cols = read_trace(path)
        if time_axis is None:
            time_axis = cols["t"]
        elif not np.array_equal(cols["t"], time_axis):
            raise SpecError(f"{path}: time axis differs from the other "
                            "traces in the figure")
        if spec.metric == "instantaneous":
            rows.append(cols["cost"])
        else:
            rows.append(windowed_average(cols["cost"], spec.window))
    return time_axis, np.vstack(rows)


def render(spec):
    """Render the figure described by ``spec`` and write it to spec.output.

    All inputs are read and validated before any file is written, so a bad
    CSV never leaves a partial image behind.
    """
    time_axis = None
    prepared = []
    for series in spec.series:
        axis, values = _series_values(spec, series["paths"])
        if time_axis is None:
            time_axis = axis
        elif not np.array_equal(axis, time_axis):
            raise SpecError(f"series {series['label']!r}: time axis differs "
                            "from the other series")
        prepared.append((series["label"], values))

    fig, ax = plt.subplots(figsize=(7, 4))
    for label, values in prepared:
        mean = values.mean(axis=0)
        ax.plot(time_axis, mean, label=label)
        if values.shape[0] > 1:
            std = values.std(axis=0)
            ax.fill_between(time_axis, mean - std, mean + std, alpha=0.25)
    if spec.switch_time is not None:
        ax.axvline(spec.switch_time, color="black", linestyle="--",
                   linewidth=1)
    ax.set_xlabel("round")
    ax.set_ylabel("cost" if spec.metric == "instantaneous"
                  else "windowed average cost")
    if spec.title:
        ax.set_title(spec.title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(spec.output, dpi=150)
    plt.close(fig)
    return spec.output
