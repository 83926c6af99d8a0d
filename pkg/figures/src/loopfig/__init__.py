"""Figure regeneration from looploc CLI outputs (no physics of its own)."""

from .io import InputError, read_curve_csv, read_result_json
from .plots import (
    FigureSpec,
    make_position_figure,
    make_ratio_figure,
    make_uncertainty_figure,
    render,
)

__version__ = "0.1.0"
