"""Reading harness trace CSVs and recomputing the windowed-cost metric.

The window rule is recomputed here from the raw cost column rather than
trusting any derived columns, so the plotter doubles as a cross-check of
the harness output.
"""

import csv

import numpy as np

REQUIRED_COLUMNS = ("t", "cost", "cum_cost")


class SchemaError(ValueError):
    """A trace CSV is empty or does not follow the harness schema."""


def read_trace(path):
    """Parse one trace CSV into a dict of float columns.

    Raises SchemaError for an empty file, a header missing the required
    columns, or non-numeric data.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        cols = {name: [] for name in header}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SchemaError(f"{path}: line {lineno} has {len(row)} "
                                  f"fields, expected {len(header)}")
            for name, value in zip(header, row):
                try:
                    cols[name].append(float(value))
                except ValueError:
                    raise SchemaError(f"{path}: line {lineno}, column "
                                      f"{name!r}: not a number: {value!r}") \
                        from None
    if not cols["t"]:
        raise SchemaError(f"{path}: no data rows")
    return {name: np.array(vals) for name, vals in cols.items()}


def windowed_average(costs, window=None):
    """Sliding average over the trailing min(t+1, window) costs.

    With ``window`` unset, the harness convention max(1, T // 3) applies.
    """
    costs = np.asarray(costs, dtype=float)
    T = costs.size
    w = max(1, T // 3) if window is None else int(window)
    if w < 1:
        raise SchemaError("window must be a positive number of rounds")
    csum = np.concatenate([[0.0], np.cumsum(costs)])
    t = np.arange(T)
    lo = np.maximum(0, t + 1 - w)
    return (csum[t + 1] - csum[lo]) / (t + 1 - lo)
