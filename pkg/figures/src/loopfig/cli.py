"""Script entry point: render a figure from a JSON spec or mirror flags."""

from __future__ import annotations

import argparse
import json
import sys

from .io import InputError
from .plots import KINDS, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loopfig",
        description="Regenerate ratio-curve, branch and uncertainty figures "
        "from looploc CLI outputs.",
    )
    parser.add_argument("--spec", help="JSON FigureSpec file")
    parser.add_argument("--kind", choices=KINDS, help="figure kind")
    parser.add_argument("--input", action="append", dest="inputs", default=None,
                        help="input CSV (repeatable)")
    parser.add_argument("--label", action="append", dest="labels", default=None,
                        help="legend label per input (repeatable)")
    parser.add_argument("--band-input", help="invert JSON with candidate intervals")
    parser.add_argument("--marker-z", type=float, default=0.15,
                        help="horizontal guide line position (lambda)")
    parser.add_argument("--no-marker", action="store_true", help="omit the guide line")
    parser.add_argument("--x-range", help="axis range LO:HI")
    parser.add_argument("--y-range", help="axis range LO:HI")
    parser.add_argument("--output", help="output image path (.svg, .pdf, .png)")
    return parser


def _parse_range(text):
    if text is None:
        return None
    lo, hi = (float(p) for p in text.split(":"))
    return (lo, hi)


def spec_from_args(args) -> FigureSpec:
    if args.spec:
        with open(args.spec, "r", encoding="utf-8") as fh:
            return FigureSpec.from_dict(json.load(fh))
    if not args.kind or not args.inputs or not args.output:
        raise ValueError("without --spec, the flags --kind, --input and --output are required")
    return FigureSpec(
        kind=args.kind,
        inputs=args.inputs,
        output=args.output,
        labels=args.labels or [],
        band_input=args.band_input,
        marker_z=None if args.no_marker else args.marker_z,
        x_range=_parse_range(args.x_range),
        y_range=_parse_range(args.y_range),
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = spec_from_args(args)
        out = render(spec)
    except (InputError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"loopfig: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
