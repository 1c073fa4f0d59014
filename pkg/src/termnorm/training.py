"""Training strategies: finetune, pretrain, and pretrain then finetune.

A strategy decides which corpora a model sees and in what order:

  - "finetune": labeled dataset samples only.
  - "pretrain": the ontology-derived corpus only (every child term
    paired with its parent concept), which touches every concept in the
    output inventory.
  - "pretrain_finetune": the pretraining phase followed, on the very
    same parameters, by the finetune phase. The first phase is
    bit-identical to running "pretrain" alone with the same seed.

The classifier trains on (text -> concept) samples; the dual encoder
trains on positive synonym pairs (sibling child terms for pretraining,
child term paired with mention text for finetuning).

Per-phase seeds derive from the configured seed and the phase name, so
phase order and count never perturb each other's randomness.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .contrastive import synonym_pairs_from_dataset, \
    synonym_pairs_from_ontology
from .hashing import DEFAULT_N_FEATURES, DEFAULT_NGRAM_RANGE
from .models import DualEncoder, HashingClassifier
from .ontology import build_pretraining_corpus
from .rng import derive_seed
from .validation import check_ngram_range, check_positive, \
    check_power_of_two, check_seed

FINETUNE = "finetune"
PRETRAIN = "pretrain"
PRETRAIN_FINETUNE = "pretrain_finetune"
STRATEGIES = (FINETUNE, PRETRAIN, PRETRAIN_FINETUNE)

CLASSIFIER = "classifier"
DUAL_ENCODER = "dual_encoder"
MODEL_KINDS = (CLASSIFIER, DUAL_ENCODER)

# Default epoch budgets per (model kind, strategy). Pretraining runs
# longer than finetuning; the finetune leg after pretraining is shorter
# than a from-scratch finetune because it only adapts.
_EPOCH_DEFAULTS = {
    CLASSIFIER: {FINETUNE: (0, 10), PRETRAIN: (30, 0),
                 PRETRAIN_FINETUNE: (30, 5)},
    DUAL_ENCODER: {FINETUNE: (0, 15), PRETRAIN: (30, 0),
                   PRETRAIN_FINETUNE: (30, 10)},
}

# The contrastive gradient already carries a 1/temperature factor, so
# the dual encoder wants a much smaller step size.
LR_DEFAULTS = {CLASSIFIER: 10.0, DUAL_ENCODER: 0.5}


@dataclass(frozen=True)
class TrainConfig:
    """Everything run_strategy needs besides the data itself."""

    strategy: str
    model_kind: str = CLASSIFIER
    pretrain_epochs: int = 0
    finetune_epochs: int = 0
    learning_rate: float = 10.0
    batch_size: int = 32
    seed: int = 0
    n_features: int = DEFAULT_N_FEATURES
    ngram_range: tuple = DEFAULT_NGRAM_RANGE
    embed_dim: int = 128
    temperature: float = 0.07

    def validate(self) -> "TrainConfig":
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, "
                             f"got {self.strategy!r}")
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}, "
                             f"got {self.model_kind!r}")
        for name in ("pretrain_epochs", "finetune_epochs"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, "
                                 f"got {v!r}")
        if self.strategy in (PRETRAIN, PRETRAIN_FINETUNE) \
                and self.pretrain_epochs < 1:
            raise ValueError(f"strategy {self.strategy!r} needs "
                             f"pretrain_epochs >= 1")
        if self.strategy in (FINETUNE, PRETRAIN_FINETUNE) \
                and self.finetune_epochs < 1:
            raise ValueError(f"strategy {self.strategy!r} needs "
                             f"finetune_epochs >= 1")
        check_positive(self.learning_rate, "learning_rate")
        check_positive(self.batch_size, "batch_size")
        check_power_of_two(self.n_features, "n_features")
        check_ngram_range(self.ngram_range)
        check_positive(self.embed_dim, "embed_dim")
        check_positive(self.temperature, "temperature")
        check_seed(self.seed)
        return self


def scale_epochs(epochs: int, epoch_scale: float) -> int:
    """Scale a nonzero budget, never below one epoch."""
    if epochs == 0:
        return 0
    return max(1, round(epochs * epoch_scale))


def default_config(strategy: str, model_kind: str = CLASSIFIER,
                   seed: int = 0, epoch_scale: float = 1.0,
                   **overrides) -> TrainConfig:
    """TrainConfig with the stock epoch budget for a strategy.

    epoch_scale multiplies both phase budgets (minimum 1 for a phase
    that runs at all) for quick smoke runs or longer training.
    """
    if model_kind not in _EPOCH_DEFAULTS:
        raise ValueError(f"model_kind must be one of {MODEL_KINDS}, "
                         f"got {model_kind!r}")
    if strategy not in _EPOCH_DEFAULTS[model_kind]:
        raise ValueError(f"strategy must be one of {STRATEGIES}, "
                         f"got {strategy!r}")
    check_positive(epoch_scale, "epoch_scale")
    pre, fine = _EPOCH_DEFAULTS[model_kind][strategy]
    cfg = TrainConfig(strategy=strategy, model_kind=model_kind,
                      pretrain_epochs=scale_epochs(pre, epoch_scale),
                      finetune_epochs=scale_epochs(fine, epoch_scale),
                      learning_rate=LR_DEFAULTS[model_kind],
                      seed=seed)
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg.validate()


def _classifier_corpus(dataset, model):
    encoded = [model.encode(s.text) for s in dataset.samples]
    labels = [model.label_index(s.label_pt_id) for s in dataset.samples]
    return encoded, labels


def _pair_corpus(pairs, model):
    return [(model.encode(p.left), model.encode(p.right))
            for p in pairs if p.polarity == "positive"]


def train_phase(model, corpus, epochs: int, learning_rate: float,
                batch_size: int, seed: int, phase: str = "train"):
    """Run one training phase in place and return the loss history.

    corpus is a Dataset for the classifier or a list of PairSample for
    the dual encoder; a mismatched combination is rejected.
    """
    if epochs == 0:
        return []
    if isinstance(model, HashingClassifier):
        if not hasattr(corpus, "samples"):
            raise TypeError("classifier training needs a Dataset corpus")
        encoded, labels = _classifier_corpus(corpus, model)
        return model.train_epochs(encoded, labels, epochs, learning_rate,
                                  batch_size, seed, phase=phase)
    if isinstance(model, DualEncoder):
        if hasattr(corpus, "samples") or not isinstance(corpus, (list,
                                                                 tuple)):
            raise TypeError("dual-encoder training needs a list of "
                            "PairSample")
        encoded = _pair_corpus(corpus, model)
        if not encoded:
            raise ValueError(f"phase {phase!r}: no positive pairs in corpus")
        return model.train_epochs(encoded, epochs, learning_rate,
                                  batch_size, seed, phase=phase)
    raise TypeError(f"cannot train object of type {type(model).__name__}")


def build_model(config: TrainConfig, ontology):
    """Fresh, seeded-initialized model for a config and ontology."""
    config.validate()
    if config.model_kind == CLASSIFIER:
        model = HashingClassifier(
            pt_order=ontology.pt_ids(), n_features=config.n_features,
            ngram_range=config.ngram_range,
            learning_rate=config.learning_rate,
            epochs=config.finetune_epochs, batch_size=config.batch_size,
            seed=config.seed)
    else:
        model = DualEncoder(
            n_features=config.n_features, ngram_range=config.ngram_range,
            embed_dim=config.embed_dim, temperature=config.temperature,
            learning_rate=config.learning_rate,
            epochs=config.finetune_epochs, batch_size=config.batch_size,
            seed=config.seed)
    return model.init_params()


def run_strategy(config: TrainConfig, ontology, dataset=None):
    """Initialize and train a model per the configured strategy.

    dataset supplies the finetuning corpus and may be omitted for the
    pure pretraining strategy. The trained model is returned ready for
    predict(): the dual encoder gets its retrieval index built here.
    """
    config.validate()
    if config.strategy in (FINETUNE, PRETRAIN_FINETUNE) and dataset is None:
        raise ValueError(f"strategy {config.strategy!r} needs a dataset")
    model = build_model(config, ontology)

    history = {}
    if config.strategy in (PRETRAIN, PRETRAIN_FINETUNE):
        if config.model_kind == CLASSIFIER:
            corpus = build_pretraining_corpus(ontology)
        else:
            corpus = synonym_pairs_from_ontology(ontology)
        history[PRETRAIN] = train_phase(
            model, corpus, config.pretrain_epochs, config.learning_rate,
            config.batch_size, derive_seed(config.seed, "phase:pretrain"),
            phase=PRETRAIN)
    if config.strategy in (FINETUNE, PRETRAIN_FINETUNE):
        if config.model_kind == CLASSIFIER:
            corpus = dataset
        else:
            corpus = synonym_pairs_from_dataset(dataset, ontology)
        history[FINETUNE] = train_phase(
            model, corpus, config.finetune_epochs, config.learning_rate,
            config.batch_size, derive_seed(config.seed, "phase:finetune"),
            phase=FINETUNE)

    if isinstance(model, DualEncoder):
        model.build_index(ontology)
    model.history_ = history
    return model
