"""gqlforge: forge, validate, filter and evaluate multi-turn NL2GQL dialogue datasets."""

from .dialogue import Dialogue, DatasetStats, Pattern, Turn, compute_stats, read_dataset, write_dataset
from .graph_store import GraphSchema, PropertyGraph, load_graph, load_schema

__version__ = "0.1.0"

__all__ = [
    "DatasetStats",
    "Dialogue",
    "GraphSchema",
    "Pattern",
    "PropertyGraph",
    "Turn",
    "compute_stats",
    "load_graph",
    "load_schema",
    "read_dataset",
    "write_dataset",
]
