"""Figure rendering for partially kinetic simulation CSV outputs."""

from .csvio import SCHEMAS, FigureDataError, load_input, load_table
from .figures import FIGURES, FigureSpec, render, render_all

__version__ = "0.1.0"

__all__ = [
    "FIGURES",
    "FigureDataError",
    "FigureSpec",
    "SCHEMAS",
    "load_input",
    "load_table",
    "render",
    "render_all",
    "__version__",
]
