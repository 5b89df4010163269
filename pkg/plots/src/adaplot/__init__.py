"""Plotting companion for adactl experiment outputs.

Reads the trace CSVs emitted by the experiment harness and renders
windowed-average cost figures with multi-seed confidence bands.
"""

from .spec import PlotSpec, SpecError, load_spec
from .trace import SchemaError, read_trace, windowed_average
from .render import render

__all__ = ["PlotSpec", "SpecError", "load_spec", "SchemaError",
           "read_trace", "windowed_average", "render"]
