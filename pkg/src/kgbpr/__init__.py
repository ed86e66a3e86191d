"""Per-predicate BPR link prediction for knowledge graphs."""

from kgbpr.store import (
    Adjacency,
    KnowledgeGraph,
    PredicateBipartiteGraph,
    Triple,
    extract_bipartite,
    parse_triples,
    read_triples,
    subgraph_stats,
)
from kgbpr.model import EmbeddingModel, HyperParams, init_model, probability, rank_objects, score
from kgbpr.bpr import TrainReport, TrainSample, sample_training_set, sgd_step, train

__version__ = "0.1.0"

__all__ = [
    "Adjacency",
    "EmbeddingModel",
    "HyperParams",
    "KnowledgeGraph",
    "PredicateBipartiteGraph",
    "TrainReport",
    "TrainSample",
    "Triple",
    "extract_bipartite",
    "init_model",
    "parse_triples",
    "probability",
    "rank_objects",
    "read_triples",
    "sample_training_set",
    "score",
    "sgd_step",
    "subgraph_stats",
    "train",
]
