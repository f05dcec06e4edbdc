"""Static-figure renderer for wflow CSV traces."""

__version__ = "0.1.0"

from .render import (BASE_COLUMNS, BUNDLE_COLUMNS, EXPECTED_COLUMNS, PlotSpec,
                     Trace, ValidationError, load_traces, render)
