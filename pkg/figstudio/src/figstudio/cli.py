"""Command-line front end: ``figstudio render <recipe.json>``."""

from __future__ import annotations

import argparse
import sys

from .recipe import RecipeError, load_recipe
from .render import render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="figstudio",
        description="Render publication-style figures from scenario CSVs")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure recipe")
    p.add_argument("recipe", help="recipe JSON path")
    args = parser.parse_args(argv)

    try:
        out = render(load_recipe(args.recipe))
    except RecipeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
