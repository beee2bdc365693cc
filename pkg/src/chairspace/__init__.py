"""chairspace: interactive design-space exploration for blob-chair shapes."""

__version__ = "0.1.0"
