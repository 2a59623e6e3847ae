"""Prototype-driven classification on fixed embeddings.

The pipeline: load (or synthesize) a dataset of embeddings with noisy labels,
run a preliminary fit of a linear softmax head to get logits, select difficult
and anomaly prototypes per class in similarity/proximity/confidence space,
derive prototype pseudo-labels, optionally adjust the noisy labels, and train
the head with a multi-objective loss that mixes label supervision with
prototype self-supervision.
"""

from protoclf.data import Dataset, DatasetFormatError, load_dataset, save_dataset, subsample
from protoclf.metrics import (
    SimilarityMatrix,
    confidence,
    cosine_similarity,
    proximity,
    scale_logits,
    similarity_matrix,
    threshold_s_c,
)
from protoclf.prototypes import (
    PrototypeSet,
    logsparse_budget,
    prototype_similarity,
    pseudo_label,
    select_anomaly,
    select_difficult,
    select_prototypes,
)
from protoclf.training import (
    AdjustedLabels,
    ClassifierHead,
    ConfigError,
    TrainConfig,
    adjust_labels,
    ce_loss,
    forward,
    loss_and_grads,
    preliminary_train,
    total_loss,
    train,
)
from protoclf.benchmark import MetricsReport, SynthSpec, evaluate, generate, planted_anomaly_ids, run_experiment

__version__ = "0.1.0"

__all__ = [
    "AdjustedLabels",
    "ClassifierHead",
    "ConfigError",
    "Dataset",
    "DatasetFormatError",
    "MetricsReport",
    "PrototypeSet",
    "SimilarityMatrix",
    "SynthSpec",
    "TrainConfig",
    "adjust_labels",
    "ce_loss",
    "confidence",
    "cosine_similarity",
    "evaluate",
    "forward",
    "generate",
    "load_dataset",
    "logsparse_budget",
    "loss_and_grads",
    "planted_anomaly_ids",
    "preliminary_train",
    "prototype_similarity",
    "proximity",
    "pseudo_label",
    "run_experiment",
    "save_dataset",
    "scale_logits",
    "select_anomaly",
    "select_difficult",
    "select_prototypes",
    "similarity_matrix",
    "subsample",
    "threshold_s_c",
    "total_loss",
    "train",
]
