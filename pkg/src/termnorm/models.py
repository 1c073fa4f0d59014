"""Trainable normalization models over hashed n-gram features.

Two desk-scale model families:

  - HashingClassifier: multinomial logistic regression whose output
    inventory is the full concept list of an ontology, independent of
    which concepts the training data happens to label. Prediction is
    argmax over logits W^T x + b.
  - DualEncoder: a linear map from hashed features to an L2-normalized
    embedding, trained with a temperature-scaled contrastive loss over
    positive pairs with in-batch negatives. Prediction embeds the query
    and retrieves the concept whose name embedding has the highest
    cosine similarity (ties go to the smallest pt_id).

Both train with deterministic mini-batch SGD: explicit seeded shuffles,
seeded uniform parameter init in (-0.01, 0.01), fixed accumulation
order. Checkpoints are .npz containers carrying the parameters, the
featurizer configuration, and (for the classifier) the concept order,
which must match the ontology supplied at load time.

Also here: prompt rendering for external generative models and the
reader that resolves their raw output strings back to concept ids.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import FileFormatError, TrainingDivergedError, UnknownIdError
from .fileio import atomic_write_bytes, atomic_write_text, dump_jsonl, \
    read_jsonl
from .hashing import DEFAULT_N_FEATURES, DEFAULT_NGRAM_RANGE, encode_text, \
    normalize_text
from .rng import SplitMix64, derive_seed
from .validation import check_ngram_range, check_positive, \
    check_power_of_two, check_seed, check_texts

UNRESOLVED = "<unresolved>"

CHECKPOINT_FORMAT = "termnorm-checkpoint"
CHECKPOINT_VERSION = 1

PROMPT_TEMPLATES = {
    "gpt2": "INPUT: {text}\nMEANING:",
    "sci5": "normalize: {text}",
}


def _check_pt_order(pt_order):
    order = list(pt_order)
    if not order:
        raise ValueError("pt_order must be nonempty")
    if len(set(order)) != len(order):
        raise ValueError("pt_order contains duplicates")
    if order != sorted(order):
        raise ValueError("pt_order must be sorted")
    return order


class HashingClassifier(BaseEstimator, ClassifierMixin):
    """Softmax classifier over a fixed concept inventory.

    Parameters
    ----------
    pt_order : sequence of str
        Sorted concept ids defining the output axis; the inventory stays
        this size no matter what labels the training data contains.
    n_features, ngram_range
        Hashed featurizer configuration (features are L2-normalized).
    learning_rate, epochs, batch_size, seed
        Mini-batch SGD settings used by fit().
    """

    def __init__(self, pt_order=None, n_features: int = DEFAULT_N_FEATURES,
                 ngram_range: tuple = DEFAULT_NGRAM_RANGE,
                 learning_rate: float = 10.0, epochs: int = 10,
                 batch_size: int = 32, seed: int = 0):
        self.pt_order = pt_order
        self.n_features = n_features
        self.ngram_range = ngram_range
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    # -- setup -----------------------------------------------------------

    def _validate_params(self):
        _check_pt_order(self.pt_order if self.pt_order is not None else [])
        check_power_of_two(self.n_features, "n_features")
        check_ngram_range(self.ngram_range)
        check_positive(self.learning_rate, "learning_rate")
        check_positive(self.batch_size, "batch_size")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        check_seed(self.seed)

    def init_params(self):
        """Seeded uniform(-0.01, 0.01) init of weights and biases."""
        self._validate_params()
        self.classes_ = tuple(self.pt_order)
        self._class_index = {c: i for i, c in enumerate(self.classes_)}
        n_classes = len(self.classes_)
        rng = SplitMix64(derive_seed(self.seed, "classifier-init"))
        flat = rng.uniform_array(self.n_features * n_classes, -0.01, 0.01)
        self.coef_ = flat.reshape(self.n_features, n_classes)
        self.intercept_ = rng.uniform_array(n_classes, -0.01, 0.01)
        return self

    def _require_fitted(self):
        if not hasattr(self, "coef_"):
            raise ValueError("model parameters not initialized; call fit() "
                             "or init_params() first")

    def encode(self, text: str):
        return encode_text(text, self.n_features, self.ngram_range, norm=True)

    def label_index(self, pt_id: str) -> int:
        self._require_fitted()
        try:
            return self._class_index[pt_id]
        except KeyError:
            raise UnknownIdError(f"label {pt_id!r} is not in the concept "
                                 f"inventory") from None

    # -- math ------------------------------------------------------------

    def forward(self, encoded) -> np.ndarray:
        """Logits for one encoded sample (idx, val)."""
        self._require_fitted()
        idx, val = encoded
        z = self.intercept_.copy()
        if idx.size:
            z += self.coef_[idx].T @ val
        return z

    def loss_grad(self, encoded, label_index: int):
        """Cross-entropy loss and its exact gradient at one sample.

        Returns (loss, d_coef_rows, d_intercept) where d_coef_rows has
        one row per feature index in the sample; gradient w.r.t. every
        untouched weight row is identically zero.
        """
        idx, val = encoded
        z = self.forward(encoded)
        lse = logsumexp(z)
        loss = float(lse - z[label_index])
        p = np.exp(z - lse)
        dz = p
        dz[label_index] -= 1.0
        d_rows = np.outer(val, dz) if idx.size else \
            np.zeros((0, len(self.classes_)))
        return loss, d_rows, dz

    def batch_update(self, batch, learning_rate: float) -> float:
        """One mini-batch SGD step on the mean gradient; returns mean loss.

        batch items are (encoded, label_index). Accumulation follows
        batch order so repeated runs are bit-identical.
        """
        self._require_fitted()
        scale = learning_rate / len(batch)
        total = 0.0
        grads = []
        for encoded, y in batch:
            loss, d_rows, dz = self.loss_grad(encoded, y)
            total += loss
            grads.append((encoded[0], d_rows, dz))
        for idx, d_rows, dz in grads:
            if idx.size:
                self.coef_[idx] -= scale * d_rows
            self.intercept_ -= scale * dz
        return total / len(batch)

    # -- training --------------------------------------------------------

    def train_epochs(self, encoded_samples, label_indices, epochs: int,
                     learning_rate: float, batch_size: int, seed: int,
                     phase: str = "train") -> list:
        """Seeded-shuffle epoch loop; returns per-epoch mean losses.

        Raises TrainingDivergedError the moment a batch loss is not
        finite.
        """
        self._require_fitted()
        n = len(encoded_samples)
        if epochs > 0 and n == 0:
            raise ValueError(f"phase {phase!r}: no training samples")
        history = []
        rng = SplitMix64(check_seed(seed))
        order = list(range(n))
        for epoch in range(epochs):
            rng.shuffle(order)
            loss_sum = 0.0
            for b, start in enumerate(range(0, n, batch_size)):
                chunk = order[start:start + batch_size]
                batch = [(encoded_samples[i], label_indices[i])
                         for i in chunk]
                loss = self.batch_update(batch, learning_rate)
                if not np.isfinite(loss):
                    raise TrainingDivergedError(phase, epoch, b, loss,
                                                learning_rate)
                loss_sum += loss * len(chunk)
            history.append(loss_sum / n)
        return history

    def fit(self, X, y):
        """Train from scratch on texts X with concept labels y."""
        texts = check_texts(X)
        labels = list(y)
        if len(labels) != len(texts):
            raise ValueError(f"got {len(texts)} texts but {len(labels)} "
                             f"labels")
        self.init_params()
        encoded = [self.encode(t) for t in texts]
        label_idx = [self.label_index(l) for l in labels]
        self.history_ = self.train_epochs(
            encoded, label_idx, self.epochs, self.learning_rate,
            self.batch_size, derive_seed(self.seed, "classifier-fit"))
        return self

    # -- inference -------------------------------------------------------

    def decision_function(self, X) -> np.ndarray:
        texts = check_texts(X)
        return np.stack([self.forward(self.encode(t)) for t in texts]) \
            if texts else np.zeros((0, len(self.classes_)))

    def predict(self, X) -> list:
        """argmax concept id per text; ties resolve to smallest pt_id."""
        self._require_fitted()
        out = []
        for t in check_texts(X):
            z = self.forward(self.encode(t))
            out.append(self.classes_[int(np.argmax(z))])
        return out


@dataclass
class PtIndex:
    """Unit-norm concept-name embeddings in pt_id order."""

    pt_order: tuple
    embeddings: np.ndarray

    def __post_init__(self):
        _check_pt_order(self.pt_order)
        if self.embeddings.shape[0] != len(self.pt_order):
            raise ValueError(
                f"embeddings rows ({self.embeddings.shape[0]}) != "
                f"concept count ({len(self.pt_order)})")
        norms = np.linalg.norm(self.embeddings, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-6):
            worst = int(np.argmax(np.abs(norms - 1.0)))
            raise ValueError(f"index row {worst} is not unit-norm "
                             f"(norm={norms[worst]!r})")

    def retrieve(self, query_embedding: np.ndarray) -> str:
        """Concept with the highest cosine score; first index wins ties,
        which is the smallest pt_id because rows are in sorted order."""
        scores = self.embeddings @ query_embedding
        return self.pt_order[int(np.argmax(scores))]


class DualEncoder(BaseEstimator):
    """Linear text encoder trained contrastively; predicts by retrieval.

    embed(text) = L2-normalize(P^T x) with x the L2-normalized hashed
    n-gram vector; a text with no features maps to the fixed unit vector
    e0 = (1, 0, ..., 0). The training loss for a positive pair under
    in-batch negatives is softmax cross-entropy over cosine similarities
    divided by the temperature, with the paired right-hand side as the
    true class.
    """

    def __init__(self, n_features: int = DEFAULT_N_FEATURES,
                 ngram_range: tuple = DEFAULT_NGRAM_RANGE,
                 embed_dim: int = 128, temperature: float = 0.07,
                 learning_rate: float = 0.5, epochs: int = 15,
                 batch_size: int = 32, seed: int = 0):
        self.n_features = n_features
        self.ngram_range = ngram_range
        self.embed_dim = embed_dim
        self.temperature = temperature
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    def _validate_params(self):
        check_power_of_two(self.n_features, "n_features")
        check_ngram_range(self.ngram_range)
        check_positive(self.embed_dim, "embed_dim")
        check_positive(self.temperature, "temperature")
        check_positive(self.learning_rate, "learning_rate")
        check_positive(self.batch_size, "batch_size")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        check_seed(self.seed)

    def init_params(self):
        """Seeded uniform(-0.01, 0.01) projection; zero init is invalid
        because every embedding would collapse to e0."""
        self._validate_params()
        rng = SplitMix64(derive_seed(self.seed, "dual-encoder-init"))
        flat = rng.uniform_array(self.n_features * self.embed_dim,
                                 -0.01, 0.01)
        self.projection_ = flat.reshape(self.n_features, self.embed_dim)
        self.index_ = None
        return self

    def _require_fitted(self):
        if not hasattr(self, "projection_") or self.projection_ is None:
            raise ValueError("projection not initialized; call fit() or "
                             "init_params() first")

    def encode(self, text: str):
        return encode_text(text, self.n_features, self.ngram_range, norm=True)

    # -- embedding -------------------------------------------------------

    def _embed_encoded(self, encoded):
        """Returns (unit_embedding, raw_norm); raw_norm 0 marks the e0
        fallback for feature-less texts."""
        self._require_fitted()
        idx, val = encoded
        if idx.size == 0:
            e = np.zeros(self.embed_dim)
            e[0] = 1.0
            return e, 0.0
        u = self.projection_[idx].T @ val
        norm = float(np.linalg.norm(u))
        if norm == 0.0:
            e = np.zeros(self.embed_dim)
            e[0] = 1.0
            return e, 0.0
        return u / norm, norm

    def embed(self, text: str) -> np.ndarray:
        """Unit-norm embedding of one text."""
        return self._embed_encoded(self.encode(text))[0]

    def embed_many(self, X) -> np.ndarray:
        texts = check_texts(X)
        if not texts:
            return np.zeros((0, self.embed_dim))
        return np.stack([self.embed(t) for t in texts])

    # -- loss ------------------------------------------------------------

    def contrastive_loss_grad(self, anchor_enc, positive_enc, negative_encs):
        """Loss and exact projection gradient for one anchor.

        Candidates are the positive plus the negatives; the loss is
        cross-entropy of the temperature-scaled cosine scores with the
        positive as the true class. Returns (loss, {row: d_row}).
        """
        encs = [anchor_enc, positive_enc, *negative_encs]
        embeds = []
        norms = []
        for enc in encs:
            e, n = self._embed_encoded(enc)
            embeds.append(e)
            norms.append(n)
        e_a = embeds[0]
        cands = np.stack(embeds[1:])                      # positive first
        s = cands @ e_a / self.temperature
        lse = logsumexp(s)
        loss = float(lse - s[0])
        sigma = np.exp(s - lse)
        coeff = sigma.copy()
        coeff[0] -= 1.0

        g_embeds = [cands.T @ coeff / self.temperature]   # d/d e_anchor
        for k in range(len(cands)):
            g_embeds.append(coeff[k] * e_a / self.temperature)

        grads: dict = {}
        for enc, e, norm, g_e in zip(encs, embeds, norms, g_embeds):
            if norm == 0.0:
                continue                    # e0 fallback: constant in P
            g_u = (g_e - float(e @ g_e) * e) / norm
            idx, val = enc
            rows = np.outer(val, g_u)
            for r, row_idx in enumerate(idx):
                key = int(row_idx)
                if key in grads:
                    grads[key] = grads[key] + rows[r]
                else:
                    grads[key] = rows[r].copy()
        return loss, grads

    # -- training --------------------------------------------------------

    def batch_update(self, encoded_pairs, learning_rate: float) -> float:
        """Mini-batch step with in-batch negatives; returns mean loss.

        For pair k the candidates are all right-hand embeddings in the
        batch, the k-th being the true one, so the score matrix is the
        full left-right cosine grid over the batch.
        """
        self._require_fitted()
        B = len(encoded_pairs)
        lefts = []
        rights = []
        for left_enc, right_enc in encoded_pairs:
            lefts.append(self._embed_encoded(left_enc))
            rights.append(self._embed_encoded(right_enc))
        EL = np.stack([e for e, _ in lefts])
        ER = np.stack([e for e, _ in rights])
        S = EL @ ER.T / self.temperature
        lse = logsumexp(S, axis=1)
        loss = float(np.mean(lse - np.diag(S)))
        sigma = np.exp(S - lse[:, None])
        coeff = sigma - np.eye(B)                        # dL_k / dS[k, j]

        scale = 1.0 / (B * self.temperature)
        g_EL = coeff @ ER * scale
        g_ER = coeff.T @ EL * scale

        grads: dict = {}
        for (enc_pair_slot, embedded, g_E) in (
                (0, lefts, g_EL), (1, rights, g_ER)):
            for k in range(B):
                e, norm = embedded[k]
                if norm == 0.0:
                    continue
                g_e = g_E[k]
                g_u = (g_e - float(e @ g_e) * e) / norm
                idx, val = encoded_pairs[k][enc_pair_slot]
                rows = np.outer(val, g_u)
                for r, row_idx in enumerate(idx):
                    key = int(row_idx)
                    if key in grads:
                        grads[key] = grads[key] + rows[r]
                    else:
                        grads[key] = rows[r].copy()
        for key in sorted(grads):
            self.projection_[key] -= learning_rate * grads[key]
        self.index_ = None
        return loss

    def train_epochs(self, encoded_pairs, epochs: int, learning_rate: float,
                     batch_size: int, seed: int,
                     phase: str = "train") -> list:
        """Seeded-shuffle epoch loop over positive pairs."""
        self._require_fitted()
        n = len(encoded_pairs)
        if epochs > 0 and n == 0:
            raise ValueError(f"phase {phase!r}: no training pairs")
        history = []
        rng = SplitMix64(check_seed(seed))
        order = list(range(n))
        for epoch in range(epochs):
            rng.shuffle(order)
            loss_sum = 0.0
            for b, start in enumerate(range(0, n, batch_size)):
                chunk = order[start:start + batch_size]
                loss = self.batch_update([encoded_pairs[i] for i in chunk],
                                         learning_rate)
                if not np.isfinite(loss):
                    raise TrainingDivergedError(phase, epoch, b, loss,
                                                learning_rate)
                loss_sum += loss * len(chunk)
            history.append(loss_sum / n)
        return history

    def fit(self, pairs, y=None):
        """Train from scratch on PairSample positives.

        Explicit negative pairs are ignored; negatives always come from
        within the batch.
        """
        positives = [p for p in pairs if p.polarity == "positive"]
        self.init_params()
        encoded = [(self.encode(p.left), self.encode(p.right))
                   for p in positives]
        self.history_ = self.train_epochs(
            encoded, self.epochs, self.learning_rate, self.batch_size,
            derive_seed(self.seed, "dual-encoder-fit"))
        return self

    # -- retrieval -------------------------------------------------------

    def build_index(self, ontology) -> PtIndex:
        """Embed every concept name; stored for predict()."""
        self._require_fitted()
        pt_order = tuple(ontology.pt_ids())
        texts = [ontology.concept(p).pt_text for p in pt_order]
        embeddings = np.stack([self.embed(t) for t in texts]) \
            if texts else np.zeros((0, self.embed_dim))
        self.index_ = PtIndex(pt_order=pt_order, embeddings=embeddings)
        return self.index_

    def predict(self, X) -> list:
        texts = check_texts(X)
        if self.index_ is None:
            raise ValueError("no retrieval index; call build_index() after "
                             "training (it is reset whenever parameters "
                             "change)")
        return [self.index_.retrieve(self.embed(t)) for t in texts]


# -- prompts for external generative models ------------------------------

def render_prompts(dataset, style: str) -> list:
    """(sample_id, prompt) rows in dataset order.

    Styles: "gpt2" -> "INPUT: {text}\\nMEANING:", "sci5" ->
    "normalize: {text}". Templates are byte-stable contracts.
    """
    try:
        template = PROMPT_TEMPLATES[style]
    except KeyError:
        raise ValueError(
            f"unknown prompt style {style!r}; expected one of "
            f"{sorted(PROMPT_TEMPLATES)}") from None
    return [(s.sample_id, template.format(text=s.text))
            for s in dataset.samples]


def save_prompts(dataset, style: str, path) -> Path:
    rows = [{"id": sid, "prompt": prompt}
            for sid, prompt in render_prompts(dataset, style)]
    return atomic_write_text(path, dump_jsonl(rows))


# -- prediction files ----------------------------------------------------

def save_predictions(predictions: dict, path) -> Path:
    rows = [{"id": sid, "predicted": predictions[sid]}
            for sid in sorted(predictions)]
    return atomic_write_text(path, dump_jsonl(rows))


def predict_split(model, dataset, split) -> dict:
    """Model predictions for every test id of a split."""
    test_ids = list(split.test)
    texts = [dataset.by_id(i).text for i in test_ids]
    return dict(zip(test_ids, model.predict(texts)))


def ingest_predictions(path, ontology, split) -> dict:
    """Read {"id", "predicted"} JSONL into {test_id: pt_id or UNRESOLVED}.

    A predicted string resolves by literal pt_id first, then by exact
    concept-name match after normalization (name collisions resolve to
    the smallest pt_id); anything else becomes UNRESOLVED, as does any
    test id missing from the file.
    """
    path = Path(path)
    name_map: dict = {}
    for concept in ontology.concepts:        # sorted, so first id wins
        name_map.setdefault(normalize_text(concept.pt_text), concept.pt_id)
    test_ids = set(split.test)
    out: dict = {}
    for lineno, row in read_jsonl(path):
        if set(row) != {"id", "predicted"}:
            raise FileFormatError("expected keys id, predicted", path=path,
                                  line=lineno)
        sid, predicted = row["id"], row["predicted"]
        if not isinstance(sid, str) or not isinstance(predicted, str):
            raise FileFormatError("id and predicted must be strings",
                                  path=path, line=lineno)
        if sid not in test_ids:
            raise FileFormatError(f"id {sid!r} is not a test sample of "
                                  f"this split", path=path, line=lineno)
        if sid in out:
            raise FileFormatError(f"duplicate prediction for id {sid!r}",
                                  path=path, line=lineno)
        if ontology.has_pt(predicted):
            out[sid] = predicted
        else:
            out[sid] = name_map.get(normalize_text(predicted), UNRESOLVED)
    for sid in test_ids - set(out):
        out[sid] = UNRESOLVED
    return out


# -- checkpoints ---------------------------------------------------------

def save_model(model, path) -> Path:
    """Serialize a trained model to an .npz container."""
    if not isinstance(model, (HashingClassifier, DualEncoder)):
        raise ValueError(f"cannot checkpoint object of type "
                         f"{type(model).__name__}")
    meta = {
        "format": CHECKPOINT_FORMAT,
        "format_version": CHECKPOINT_VERSION,
        "params": model.get_params(),
    }
    arrays: dict = {}
    if isinstance(model, HashingClassifier):
        model._require_fitted()
        meta["kind"] = "classifier"
        meta["params"] = {k: v for k, v in meta["params"].items()
                          if k != "pt_order"}
        arrays["pt_order"] = np.array(model.classes_, dtype=np.str_)
        arrays["coef"] = model.coef_
        arrays["intercept"] = model.intercept_
    else:
        model._require_fitted()
        meta["kind"] = "dual_encoder"
        arrays["projection"] = model.projection_
    meta["params"]["ngram_range"] = list(meta["params"]["ngram_range"])
    buf = io.BytesIO()
    np.savez(buf, meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)
    return atomic_write_bytes(path, buf.getvalue())


def load_model(path, ontology):
    """Load a checkpoint and bind it to an ontology.

    A classifier checkpoint whose concept order differs from the
    ontology's sorted pt_ids is rejected; a dual-encoder checkpoint gets
    its retrieval index rebuilt from the ontology.
    """
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as archive:
            contents = {k: archive[k] for k in archive.files}
    except (OSError, ValueError) as exc:
        raise FileFormatError(f"not a readable checkpoint: {exc}",
                              path=path) from exc
    if "meta" not in contents:
        raise FileFormatError("checkpoint has no meta record", path=path)
    try:
        meta = json.loads(str(contents["meta"]))
    except json.JSONDecodeError as exc:
        raise FileFormatError("checkpoint meta is not valid JSON",
                              path=path) from exc
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise FileFormatError(f"unrecognized checkpoint format "
                              f"{meta.get('format')!r}", path=path)
    if meta.get("format_version") != CHECKPOINT_VERSION:
        raise FileFormatError(f"unsupported checkpoint version "
                              f"{meta.get('format_version')!r}", path=path)
    kind = meta.get("kind")
    params = dict(meta.get("params", {}))
    if "ngram_range" in params:
        params["ngram_range"] = tuple(params["ngram_range"])

    if kind == "classifier":
        stored_order = [str(x) for x in contents["pt_order"]]
        expected = ontology.pt_ids()
        if stored_order != expected:
            raise FileFormatError(
                f"checkpoint concept inventory ({len(stored_order)} ids) "
                f"does not match the ontology ({len(expected)} ids); "
                f"refusing to load", path=path)
        model = HashingClassifier(pt_order=stored_order, **params)
        model.init_params()
        coef = contents["coef"]
        intercept = contents["intercept"]
        if coef.shape != model.coef_.shape \
                or intercept.shape != model.intercept_.shape:
            raise FileFormatError(
                f"parameter shapes {coef.shape}/{intercept.shape} do not "
                f"match configuration", path=path)
        model.coef_ = coef.astype(np.float64)
        model.intercept_ = intercept.astype(np.float64)
        return model
    if kind == "dual_encoder":
        model = DualEncoder(**params)
        model.init_params()
        projection = contents["projection"]
        if projection.shape != model.projection_.shape:
            raise FileFormatError(
                f"projection shape {projection.shape} does not match "
                f"configuration", path=path)
        model.projection_ = projection.astype(np.float64)
        model.build_index(ontology)
        return model
    raise FileFormatError(f"unknown model kind {kind!r}", path=path)
