import json

import pytest

from figstudio.recipe import FigureRecipe, RecipeError, load_recipe, read_csv


def test_rejects_unknown_kind(tmp_path):
    csv = tmp_path / "x.csv"
    csv.write_text("t,concurrence\n0,0\n")
    with pytest.raises(RecipeError, match="figure_kind"):
        FigureRecipe(inputs=[str(csv)], figure_kind="pie",
                     output=str(tmp_path / "o.png"))


def test_rejects_wrong_input_count(tmp_path):
    csv = tmp_path / "x.csv"
    csv.write_text("t,concurrence\n0,0\n")
    with pytest.raises(RecipeError, match="expected 2"):
        FigureRecipe(inputs=[str(csv)], figure_kind="timeseries+jumps",
                     output=str(tmp_path / "o.png"))


def test_rejects_missing_input_file(tmp_path):
    with pytest.raises(RecipeError, match="no such file"):
        FigureRecipe(inputs=[str(tmp_path / "absent.csv")],
                     figure_kind="envelope", output=str(tmp_path / "o.png"))


def test_load_recipe_resolves_relative_paths(tmp_path):
    (tmp_path / "scan.csv").write_text(
        "trap_sigma,gamma_over_g,eta,concurrence,stderr\n0,0.1,1,0.9,0.01\n")
    recipe_path = tmp_path / "r.json"
    recipe_path.write_text(json.dumps({
        "inputs": ["scan.csv"], "figure_kind": "surface",
        "output": "out.png"}))
    recipe = load_recipe(str(recipe_path))
    assert recipe.inputs[0] == str(tmp_path / "scan.csv")
    assert recipe.output == str(tmp_path / "out.png")


def test_load_recipe_rejects_bad_json(tmp_path):
    p = tmp_path / "r.json"
    p.write_text("{nope")
    with pytest.raises(RecipeError, match="r.json:1"):
        load_recipe(str(p))
    p.write_text(json.dumps({"inputs": [], "figure_kind": "surface",
                             "output": "o.png", "zzz": 1}))
    with pytest.raises(RecipeError, match="unknown fields"):
        load_recipe(str(p))
    p.write_text(json.dumps({"figure_kind": "surface", "output": "o.png"}))
    with pytest.raises(RecipeError, match="'inputs'"):
        load_recipe(str(p))


def test_read_csv_names_missing_column(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("t,channel\n1.0,cavity-detected\n")
    with pytest.raises(RecipeError, match="missing column 'concurrence'"):
        read_csv(str(p), ("t", "concurrence"))
    cols = read_csv(str(p), ("t", "channel"))
    assert cols["channel"] == ["cavity-detected"]


def test_read_csv_rejects_ragged_rows(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("t,channel\n1.0\n")
    with pytest.raises(RecipeError, match="1 fields"):
        read_csv(str(p), ("t",))
    p.write_text("")
    with pytest.raises(RecipeError, match="no header"):
        read_csv(str(p), ("t",))
