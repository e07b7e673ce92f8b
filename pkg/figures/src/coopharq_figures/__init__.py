"""Pure-view figure rendering over the coopharq CLI's CSV outputs.

Nothing in this package recomputes link math; it reads the CSV files a
documented CLI invocation produced and draws them.  The primary package
is not imported, only its file format is consumed.
"""
from .recipes import RECIPES, FigureRecipe, SeriesSpec
from .render import FigureDataError, load_series, render

__all__ = [
    "RECIPES",
    "FigureRecipe",
    "SeriesSpec",
    "FigureDataError",
    "load_series",
    "render",
]
__version__ = "0.1.0"
