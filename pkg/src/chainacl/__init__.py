"""Blockchain-backed access control for a two-level hierarchical P2P overlay."""

__version__ = "0.1.0"
