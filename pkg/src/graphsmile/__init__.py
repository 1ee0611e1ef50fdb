"""Multimodal dialogue affect classification with alternating bipartite graph fusion."""

__version__ = "0.1.0"
