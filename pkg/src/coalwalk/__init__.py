"""Coalescing random walks, the voter model and token processes on graphs."""
from .graph import DegreeStats, Graph, degree_stats, generate, load_edge_list, serialize
from .spectral import Chain, Spectrum, hitting_profile, mixing_time, spectrum, walk_chain

__version__ = "0.1.0"

__all__ = [
    "Chain",
    "DegreeStats",
    "Graph",
    "Spectrum",
    "degree_stats",
    "generate",
    "hitting_profile",
    "load_edge_list",
    "mixing_time",
    "serialize",
    "spectrum",
    "walk_chain",
]
