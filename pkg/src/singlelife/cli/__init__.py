"""Command-line interface and SVG plot emitters."""

from .main import main, parse_kv_config
from .plot import heatmap_svg, line_svg, scatter_svg, write_svg

__all__ = ["main", "parse_kv_config", "heatmap_svg", "line_svg", "scatter_svg",
           "write_svg"]
