"""Publication figures for the Coulomb gas CLI's delimited outputs.

This package never imports the simulation code; it consumes the
documented CSV/JSON files and nothing else.
"""

from .tables import SchemaError, read_diagnostics, read_table

__all__ = ["SchemaError", "read_diagnostics", "read_table"]
