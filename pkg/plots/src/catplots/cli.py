"""Render CLI: `catsim-render render --figure figN --in DIR --out FILE.png`."""

import argparse
import sys

from .errors import RenderError
from .recipes import RECIPES
from .render import render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="catsim-render")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure from CSV artifacts")
    p.add_argument("--figure", required=True, choices=sorted(RECIPES),
                   help="figure recipe to render")
    p.add_argument("--in", dest="in_dir", required=True,
                   help="directory holding the CSV inputs")
    p.add_argument("--out", required=True, help="output PNG path")
    args = parser.parse_args(argv)
    try:
        out = render(args.figure, args.in_dir, args.out)
    except RenderError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
