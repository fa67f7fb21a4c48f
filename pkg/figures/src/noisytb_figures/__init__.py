"""Figure scripts for noisy tight-binding result CSVs."""

__version__ = "0.1.0"

from .render import FigureRecipe, render
from .resultcsv import ResultCSVError, ResultTable, read_result_csv

__all__ = ["FigureRecipe", "render", "ResultCSVError", "ResultTable",
           "read_result_csv", "__version__"]
