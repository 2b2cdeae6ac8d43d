"""Figure regeneration for sarcs result files."""

from .plots import (KIND_SCHEMA, SCHEMAS, PlotSpec, SchemaMismatch,
                    read_fit_record, read_table, render)

__version__ = "0.1.0"

__all__ = [
    "KIND_SCHEMA",
    "SCHEMAS",
    "PlotSpec",
    "SchemaMismatch",
    "read_fit_record",
    "read_table",
    "render",
]
