"""Sybil-address detection on transaction graphs.

Builds a directed transaction multigraph, extracts a two-layer neighborhood
around each candidate address, computes a canonical 75-slot feature vector by
propagating and fusing per-level amounts and degrees, and classifies with a
from-scratch histogram GBDT.  A seeded synthetic generator plants star, chain,
and tree funding motifs for desk-scale benchmarks.
"""

from .config import PipelineConfig, PipelinePaths, SplitConfig, load_config, save_config
from .features import (
    FEATURE_NAMES,
    N_FEATURES,
    FeatureVector,
    NetworkFeatures,
    TimeFeatures,
    assemble_feature_vector,
    build_feature_matrix,
    compute_features,
    compute_network_features,
    compute_time_features,
    propagate_and_fuse,
    stats5,
)
from .graph import (
    DEFAULT_HUB_CAP,
    LayeredSubgraph,
    TransactionGraph,
    build_graph,
    extract_layers,
    subgraph_to_json,
)
from .ingest import (
    CleaningReport,
    TransactionRecord,
    clean,
    parse_transactions,
    read_transaction_file,
    write_transactions,
)
from .labels import (
    AddressLabel,
    FileLabelProvider,
    HttpLabelProvider,
    load_labels,
    merge_labels,
)
from .metrics import (
    MetricsReport,
    ScoredDataset,
    auc,
    best_f1_threshold,
    confusion_metrics,
    evaluate,
    metrics_table,
    stratified_split,
)
from .model import (
    DecisionTreeModel,
    GbdtModel,
    TrainConfig,
    TreeNode,
    feature_importance,
    load_model,
    predict,
    save_model,
    train_decision_tree,
    train_gbdt,
)
from .synth import LabeledDataset, SynthSpec, default_benchmark_spec, generate, write_dataset

__version__ = "0.1.0"
