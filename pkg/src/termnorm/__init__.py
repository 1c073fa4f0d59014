"""Deterministic term normalization over two-level concept ontologies.

Core pieces: an ontology store with a derived pretraining corpus,
contrastive sample generators, hashed character n-gram features, a
full-inventory softmax classifier and a contrastive dual encoder,
strategy-driven deterministic training, IN/OUT-aware evaluation with
cross-dataset transfer matrices, and a synthetic long-tail benchmark.
"""

from .contrastive import PairSample, TripleSample, \
    contrastive_pairs_and_triples, synonym_pairs_from_dataset, \
    synonym_pairs_from_ontology
from .data import Dataset, Sample, Split, dataset_stats, load_dataset, \
    load_split, make_splits, out_fraction, save_dataset, save_split
from .errors import ConfigError, FileFormatError, TermNormError, \
    TrainingDivergedError, UnknownIdError, UsageError
from .hashing import FeatureVector, HashingFeaturizer, featurize, \
    fnv1a_64, normalize_text
from .metrics import AggregateReport, CrossMatrix, Metrics, aggregate, \
    cross_matrix, evaluate
from .models import DualEncoder, HashingClassifier, PtIndex, UNRESOLVED, \
    ingest_predictions, load_model, predict_split, render_prompts, \
    save_model
from .ontology import Concept, LltEntry, Ontology, \
    build_pretraining_corpus, load_ontology, save_ontology
from .rng import SplitMix64, derive_seed
from .synthetic import NoiseStyle, SynthConfig, gen_synthetic
from .training import TrainConfig, default_config, run_strategy, \
    train_phase
from .version import __version__

__all__ = [
    "AggregateReport", "Concept", "ConfigError", "CrossMatrix", "Dataset",
    "DualEncoder", "FeatureVector", "FileFormatError", "HashingClassifier",
    "HashingFeaturizer", "LltEntry", "Metrics", "NoiseStyle", "Ontology",
    "PairSample", "PtIndex", "Sample", "Split", "SynthConfig",
    "SplitMix64", "TermNormError", "TrainConfig", "TrainingDivergedError",
    "TripleSample", "UNRESOLVED", "UnknownIdError", "UsageError",
    "aggregate", "build_pretraining_corpus", "contrastive_pairs_and_triples",
    "cross_matrix", "dataset_stats", "default_config", "derive_seed",
    "evaluate", "featurize", "fnv1a_64", "gen_synthetic",
    "ingest_predictions", "load_dataset", "load_model", "load_ontology",
    "load_split", "make_splits", "normalize_text", "out_fraction",
    "predict_split", "render_prompts", "run_strategy", "save_dataset",
    "save_model", "save_ontology", "save_split",
    "synonym_pairs_from_dataset", "synonym_pairs_from_ontology",
    "train_phase", "__version__",
]
