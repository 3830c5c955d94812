"""Tweet TSV to embedding-record extraction tool."""

__version__ = "0.1.0"
