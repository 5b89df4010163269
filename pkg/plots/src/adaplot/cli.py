"""Command-line entry point: render a figure from a spec file or flags.

Exit codes: 0 on success, 2 on spec or input errors.
"""

import argparse
import sys

from .render import render
from .spec import PlotSpec, SpecError, load_spec
from .trace import SchemaError


def build_parser():
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render cost-curve figures from adactl trace CSVs")
    parser.add_argument("--spec", help="JSON plot spec file")
    parser.add_argument("--series", action="append", default=[],
                        metavar="LABEL=PATH[,PATH...]",
                        help="labelled group of trace CSVs (repeatable)")
    parser.add_argument("--metric", choices=("instantaneous", "windowed"),
                        default="windowed")
    parser.add_argument("--window", type=int, default=None,
                        help="window length (default: T // 3)")
    parser.add_argument("--switch-time", type=float, default=None,
                        help="round to mark with a dashed vertical line")
    parser.add_argument("--title", default=None)
    parser.add_argument("--out", default=None, help="output image path")
    return parser


def _spec_from_flags(args):
    series = []
    for entry in args.series:
        label, sep, paths = entry.partition("=")
        if not sep or not paths:
            raise SpecError(f"--series expects LABEL=PATH[,PATH...], "
                            f"got {entry!r}")
        series.append({"label": label, "paths": paths.split(",")})
    if args.out is None:
        raise SpecError("--out is required when no --spec file is given")
    return PlotSpec(series, args.out, metric=args.metric, window=args.window,
                    switch_time=args.switch_time, title=args.title)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.spec is not None:
            spec = load_spec(args.spec)
        else:
            spec = _spec_from_flags(args)
        out = render(spec)
    except (SpecError, SchemaError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
