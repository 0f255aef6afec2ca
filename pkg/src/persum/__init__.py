"""persum: interactive, personalised multi-document extractive summarisation."""

__version__ = "0.1.0"

SCHEMA_VERSION = 1
