"""Conceptual spaces: similarity graphs over token embeddings and their analysis."""

__version__ = "0.1.0"

from .embed_io import EmbeddingMatrix, Vocabulary, center, load_embeddings, load_vocab, resolve
from .graph import ConceptualSpace, build, minimal_connecting_k, sweep_k
from .netstats import global_stats
from .simgraph import top_k_edges

__all__ = [
    "__version__", "EmbeddingMatrix", "Vocabulary", "center", "load_embeddings", "load_vocab",
    "resolve", "ConceptualSpace", "build", "minimal_connecting_k", "sweep_k", "top_k_edges",
    "global_stats",
]
