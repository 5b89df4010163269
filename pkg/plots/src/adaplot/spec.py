"""Plot specifications: what to read, which metric, and where to render."""

import json

METRICS = ("instantaneous", "windowed")


class SpecError(ValueError):
    """A plot spec is malformed."""


class PlotSpec:
    """One figure: labelled groups of trace CSVs plus rendering options.

    Each series is a (label, paths) pair; multi-path series are drawn as a
    mean line with a mean +/- 1 std band over the traces.
    """

    def __init__(self, series, output, metric="windowed", window=None,
                 switch_time=None, title=None):
        if metric not in METRICS:
            raise SpecError(f"metric must be one of {METRICS}, got {metric!r}")
        if not series:
            raise SpecError("at least one series is required")
        cleaned = []
        for entry in series:
            label, paths = entry["label"], list(entry["paths"])
            if not paths:
                raise SpecError(f"series {label!r} lists no trace files")
            cleaned.append({"label": str(label), "paths": paths})
        if window is not None and int(window) < 1:
            raise SpecError("window must be a positive number of rounds")
        self.series = cleaned
        self.output = str(output)
        self.metric = metric
        self.window = None if window is None else int(window)
        self.switch_time = None if switch_time is None else float(switch_time)
        self.title = title


def load_spec(path):
    """Read a PlotSpec from a JSON file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as e:
        raise SpecError(f"{path}: not valid JSON ({e})") from None
    known = {"series", "output", "metric", "window", "switch_time", "title"}
    unknown = set(raw) - known
    if unknown:
        raise SpecError(f"{path}: unknown keys {sorted(unknown)}")
    for key in ("series", "output"):
        if key not in raw:
            raise SpecError(f"{path}: missing required key {key!r}")
    try:
        return PlotSpec(**raw)
    except (KeyError, TypeError) as e:
        raise SpecError(f"{path}: malformed spec ({e})") from None
