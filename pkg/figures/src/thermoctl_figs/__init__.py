"""Figures for thermoctl output CSVs."""

from .render import FigureSpec, render
from .schema import SchemaError, read_sweep, read_trajectory

__all__ = ["FigureSpec", "render", "SchemaError", "read_sweep", "read_trajectory"]
