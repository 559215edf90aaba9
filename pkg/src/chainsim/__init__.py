"""Online placement, processing and routing for chained network functions."""

__version__ = "0.1.0"
