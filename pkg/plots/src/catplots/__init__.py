"""catplots: figure replicas from catsim CSV artifacts."""

__version__ = "0.1.0"

from .errors import MissingInput, RenderError, SchemaMismatch
from .recipes import RECIPES, FigureRecipe, recipe
from .render import render
