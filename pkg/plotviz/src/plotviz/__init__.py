"""Figure renderer for albench benchmark reports."""

from .render import render_box, render_curves, render_win_heatmap
from .schemas import SchemaError

__all__ = ["render_box", "render_curves", "render_win_heatmap", "SchemaError"]
__version__ = "0.1.0"
