"""Figure rendering for qbatt outputs."""

__version__ = "0.1.0"

from .plots import RENDERERS, render
from .io import SchemaMismatch, read_table
