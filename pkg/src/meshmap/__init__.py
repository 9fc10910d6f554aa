"""MeSH-based science maps from Medline records."""

__version__ = "0.1.0"
