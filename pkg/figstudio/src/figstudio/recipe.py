"""Figure recipes: a small JSON contract naming inputs, figure kind and
output path, validated before any rendering starts."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

FIGURE_KINDS = ("timeseries+jumps", "envelope", "surface")

# columns each figure kind must find in its inputs, by input role
REQUIRED_COLUMNS = {
    "timeseries+jumps": {"timeseries": ("t", "concurrence"),
                         "jumps": ("t", "channel")},
    "envelope": {"ensemble": ("t", "mean_concurrence", "stderr",
                              "concurrence_of_mean", "concurrence_min",
                              "concurrence_max")},
    "surface": {"scan": ("trap_sigma", "gamma_over_g", "eta",
                         "concurrence")},
}


class RecipeError(Exception):
    """Invalid recipe or nonconforming input CSV; message names the issue."""


@dataclass
class FigureRecipe:
    inputs: list[str]
    figure_kind: str
    output: str
    labels: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.figure_kind not in FIGURE_KINDS:
            raise RecipeError(
                f"figure_kind must be one of {list(FIGURE_KINDS)}, "
                f"got {self.figure_kind!r}")
        if not self.inputs:
            raise RecipeError("inputs: need at least one CSV path")
        n_expected = len(REQUIRED_COLUMNS[self.figure_kind])
        if len(self.inputs) != n_expected:
            roles = sorted(REQUIRED_COLUMNS[self.figure_kind])
            raise RecipeError(
                f"{self.figure_kind}: expected {n_expected} input(s) "
                f"({', '.join(roles)} in order), got {len(self.inputs)}")
        for path in self.inputs:
            if not os.path.isfile(path):
                raise RecipeError(f"inputs: no such file {path}")
        if not isinstance(self.labels, dict):
            raise RecipeError("labels: must be an object of axis strings")


def load_recipe(path: str) -> FigureRecipe:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise RecipeError(f"{path}: no such file")
    except json.JSONDecodeError as exc:
        raise RecipeError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    if not isinstance(raw, dict):
        raise RecipeError(f"{path}: top level must be an object")
    unknown = set(raw) - {"inputs", "figure_kind", "output", "labels"}
    if unknown:
        raise RecipeError(f"{path}: unknown fields {sorted(unknown)}")
    for key in ("inputs", "figure_kind", "output"):
        if key not in raw:
            raise RecipeError(f"{path}: missing required field '{key}'")
    base = os.path.dirname(os.path.abspath(path))

    def _resolve(p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(base, p)

    return FigureRecipe(inputs=[_resolve(p) for p in raw["inputs"]],
                        figure_kind=raw["figure_kind"],
                        output=_resolve(raw["output"]),
                        labels=raw.get("labels", {}))


def read_csv(path: str, required: tuple[str, ...]) -> dict[str, list[str]]:
    """Parse a CSV into named columns, checking the required ones exist.

    Values stay as strings; numeric conversion is the caller's job since the
    jumps file mixes numbers and channel names.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RecipeError(f"{path}: empty file, no header")
        rows = [row for row in reader if row]
    for col in required:
        if col not in header:
            raise RecipeError(f"{path}: missing column '{col}'")
    cols = {name: [] for name in header}
    for row in rows:
        if len(row) != len(header):
            raise RecipeError(f"{path}: row with {len(row)} fields, "
                              f"header has {len(header)}")
        for name, val in zip(header, row):
            cols[name].append(val)
    return cols
