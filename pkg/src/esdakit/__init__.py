"""Local spatial regression with diagnostics, clusters, narratives, and reports."""

__version__ = "0.1.0"
