"""Figure rendering for scenario CSV outputs.

Strictly a consumer: reads the CSV files written by the simulation CLI and
renders deterministic PNGs. No physics is recomputed here.
"""

from .recipe import FigureRecipe, RecipeError, load_recipe
from .render import render

__all__ = ["FigureRecipe", "RecipeError", "load_recipe", "render"]
__version__ = "1.0.0"
