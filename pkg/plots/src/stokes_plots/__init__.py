"""Log-log convergence figures from stokes-hybrid CSV output."""

from .figure import PlotSpec, plot_convergence
from .reader import Block, EmptyInputError, MissingColumnError, read_blocks

__all__ = ["PlotSpec", "plot_convergence", "Block", "EmptyInputError",
           "MissingColumnError", "read_blocks"]
