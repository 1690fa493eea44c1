"""render: build a figure from thermoctl CSV output.

Exit codes: 0 success, 1 schema/validation failure, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureSpec, render
from .schema import SchemaError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render", description="Render figures from thermoctl CSV output"
    )
    parser.add_argument("--kind", choices=KINDS, required=True)
    parser.add_argument(
        "--in",
        dest="inputs",
        metavar="CSV",
        action="append",
        required=True,
        help="input CSV; repeat for side-by-side trajectory panels",
    )
    parser.add_argument("--out", metavar="IMG", required=True)
    parser.add_argument("--title", default="")
    parser.add_argument("--dpi", type=int, default=150)
    args = parser.parse_args(argv)
    try:
        out = render(
            FigureSpec(
                kind=args.kind,
                inputs=args.inputs,
                output=args.out,
                title=args.title,
                dpi=args.dpi,
            )
        )
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
