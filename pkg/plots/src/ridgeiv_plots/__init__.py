"""Non-interactive figure rendering for ridgeiv experiment CSVs."""

from .render import FigureSpec, SchemaError, build_spec, main, render

__version__ = "0.1.0"

__all__ = ["FigureSpec", "SchemaError", "build_spec", "render", "main"]
