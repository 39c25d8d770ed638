"""Link prediction on social networks.

Pipeline: SNAP edge-list ingestion -> node-preserving train/test split with
distance-filtered negative sampling -> 56-dim heuristic edge features and/or
random-walk node embeddings -> feed-forward classifiers evaluated by F1.
"""

from linkpred.graph import (
    DiGraph,
    RawEdgeList,
    ComponentLabels,
    ParseError,
    parse_edge_list,
    build_graph,
    bfs_distance,
    weakly_connected_components,
)
from linkpred.sampling import (
    LabeledEdge,
    ShortfallWarning,
    SplitDataset,
    assemble_dataset,
    sample_negative_edges,
    split_positive_edges,
)
from linkpred.heuristics import (
    HEURISTIC_DIM,
    ConvergenceWarning,
    HeuristicConfig,
    KatzDivergenceError,
    compute_hits,
    compute_katz,
    compute_pagerank,
    compute_svd,
    featurize_dataset,
    featurize_edge,
    precompute_artifacts,
)
from linkpred.embeddings import (
    EmbeddingMatrix,
    SkipGramConfig,
    WalkConfig,
    combine_features,
    edge_embedding,
    generate_walks,
    train_skipgram,
)
from linkpred.model import (
    Metrics,
    ModelParams,
    Standardizer,
    TowerSpec,
    TrainConfig,
    TrainingDivergedError,
    evaluate,
    forward,
    parse_arch,
    train,
    train_logistic,
)
from linkpred.config import PipelineConfig, config_hash, load_config, parse_config

__version__ = "0.1.0"

__all__ = [
    "DiGraph",
    "RawEdgeList",
    "ComponentLabels",
    "ParseError",
    "parse_edge_list",
    "build_graph",
    "bfs_distance",
    "weakly_connected_components",
    "LabeledEdge",
    "ShortfallWarning",
    "SplitDataset",
    "assemble_dataset",
    "sample_negative_edges",
    "split_positive_edges",
    "HEURISTIC_DIM",
    "ConvergenceWarning",
    "HeuristicConfig",
    "KatzDivergenceError",
    "compute_hits",
    "compute_katz",
    "compute_pagerank",
    "compute_svd",
    "featurize_dataset",
    "featurize_edge",
    "precompute_artifacts",
    "EmbeddingMatrix",
    "SkipGramConfig",
    "WalkConfig",
    "combine_features",
    "edge_embedding",
    "generate_walks",
    "train_skipgram",
    "Metrics",
    "ModelParams",
    "Standardizer",
    "TowerSpec",
    "TrainConfig",
    "TrainingDivergedError",
    "evaluate",
    "forward",
    "parse_arch",
    "train",
    "train_logistic",
    "PipelineConfig",
    "config_hash",
    "load_config",
    "parse_config",
    "__version__",
]
