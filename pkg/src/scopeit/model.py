"""The scoping model: embeddings, intra/inter aggregators, scoring, training.

A document is scored in three stages. Token vectors come from an embedding
provider (trainable lookup or frozen precomputed file). The intra-sentence
bidirectional GRU turns each sentence into one vector, the concatenation of
its final forward and backward states. The inter-sentence bidirectional GRU
mixes the sentence vectors across the document, and an affine head plus
sigmoid yields one relevance probability per sentence. Ablations drop the
inter stage (head applies per sentence) or replace the intra stage with a
stored per-sentence CLS vector.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nncore as nn
from .corpus import EmptyCorpus
from .embed_store import EmbeddingStore
from .textprep import TokenizedDocument

PARAM_COUNT_FORMULA = (
    "trainable embedding: V*E; each GRU direction: 3*H*(I+H+2) with I the "
    "layer input width (first layer: encoder input, later layers: 2*H); "
    "two directions per layer; head: in+1"
)


class MissingEmbedding(KeyError):
    pass


class TokenCountMismatch(ValueError):
    pass


class EmptySentence(ValueError):
    pass


class NonFiniteLoss(RuntimeError):
    pass


class VocabularyMismatch(ValueError):
    pass


@dataclass
class ModelConfig:
    embedding: str = "trainable"  # "trainable" | "precomputed"
    embed_dim: int = 64
    vocab_size: int | None = None
    intra_layers: int = 2
    intra_hidden: int = 128
    inter_layers: int = 2
    inter_hidden: int = 128
    use_inter_aggregator: bool = True
    cls_only: bool = False

    def __post_init__(self):
        if self.embedding not in ("trainable", "precomputed"):
            raise ValueError(f"unknown embedding kind {self.embedding!r}")
        if self.embedding == "trainable" and not self.vocab_size:
            raise ValueError("trainable embeddings require vocab_size")
        if self.cls_only and self.embedding != "precomputed":
            raise ValueError("cls_only requires a precomputed embedding store")

    @property
    def sentence_dim(self) -> int:
        return self.embed_dim if self.cls_only else 2 * self.intra_hidden

    @property
    def head_input_dim(self) -> int:
        return 2 * self.inter_hidden if self.use_inter_aggregator else self.sentence_dim


@dataclass
class TrainConfig:
    lr: float = 1e-4
    epochs: int = 50
    batch_size: int = 8
    seed: int = 0
    anneal_factor: float = 0.5
    plateau_patience: int = 5
    early_stop_patience: int = 8


@dataclass
class ScopeItParams:
    embedding: nn.Tensor | None
    intra: list[tuple[nn.GruLayerParams, nn.GruLayerParams]]
    inter: list[tuple[nn.GruLayerParams, nn.GruLayerParams]]
    head_w: nn.Tensor
    head_b: nn.Tensor

    def named_tensors(self) -> list[tuple[str, nn.Tensor]]:
        named: list[tuple[str, nn.Tensor]] = []
        if self.embedding is not None:
            named.append(("embedding.table", self.embedding))
        for k, (fwd, bwd) in enumerate(self.intra):
            named.extend(fwd.named(f"intra.{k}.fwd"))
            named.extend(bwd.named(f"intra.{k}.bwd"))
        for k, (fwd, bwd) in enumerate(self.inter):
            named.extend(fwd.named(f"inter.{k}.fwd"))
            named.extend(bwd.named(f"inter.{k}.bwd"))
        named.append(("head.w", self.head_w))
        named.append(("head.b", self.head_b))
        return named

    def detached(self) -> "ScopeItParams":
        """Share data but drop gradient tracking (inference-only view)."""

        def det(t: nn.Tensor) -> nn.Tensor:
            return nn.Tensor(t.data)

        def det_layer(pair):
            f, b = pair
            return (
                nn.GruLayerParams(*[det(t) for t in f.tensors()]),
                nn.GruLayerParams(*[det(t) for t in b.tensors()]),
            )

        return ScopeItParams(
            embedding=det(self.embedding) if self.embedding is not None else None,
            intra=[det_layer(p) for p in self.intra],
            inter=[det_layer(p) for p in self.inter],
            head_w=det(self.head_w),
            head_b=det(self.head_b),
        )


def init_params(config: ModelConfig, seed: int, dtype=np.float32) -> ScopeItParams:
    """Fresh parameters: embeddings normal(0, 0.1), weights uniform, biases zero."""
    rng = np.random.default_rng(seed)
    embedding = None
    if config.embedding == "trainable":
        embedding = nn.Tensor(
            rng.normal(0.0, 0.1, size=(config.vocab_size, config.embed_dim)).astype(dtype),
            requires_grad=True,
        )
    intra = []
    if not config.cls_only:
        size = config.embed_dim
        for _ in range(config.intra_layers):
            intra.append(
                (nn.init_gru_params(rng, size, config.intra_hidden, dtype),
                 nn.init_gru_params(rng, size, config.intra_hidden, dtype))
            )
            size = 2 * config.intra_hidden
    inter = []
    if config.use_inter_aggregator:
        size = config.sentence_dim
        for _ in range(config.inter_layers):
            inter.append(
                (nn.init_gru_params(rng, size, config.inter_hidden, dtype),
                 nn.init_gru_params(rng, size, config.inter_hidden, dtype))
            )
            size = 2 * config.inter_hidden
    fan_in = config.head_input_dim
    bound = 1.0 / np.sqrt(fan_in)
    head_w = nn.Tensor(rng.uniform(-bound, bound, size=(1, fan_in)).astype(dtype),
                       requires_grad=True)
    head_b = nn.Tensor(np.zeros(1, dtype=dtype), requires_grad=True)
    return ScopeItParams(embedding, intra, inter, head_w, head_b)


def param_count(config: ModelConfig) -> int:
    """Analytic parameter count; must equal the sum of tensor sizes."""

    def gru_stack(first_input: int, hidden: int, layers: int) -> int:
        total = 0
        size = first_input
        for _ in range(layers):
            total += 2 * 3 * hidden * (size + hidden + 2)
            size = 2 * hidden
        return total

    total = 0
    if config.embedding == "trainable":
        total += config.vocab_size * config.embed_dim
    if not config.cls_only:
        total += gru_stack(config.embed_dim, config.intra_hidden, config.intra_layers)
    if config.use_inter_aggregator:
        total += gru_stack(config.sentence_dim, config.inter_hidden, config.inter_layers)
    total += config.head_input_dim + 1
    return total


@dataclass
class RelevanceScores:
    """Per-sentence probabilities, optionally with the retained embeddings."""

    scores: list[float]
    embeddings: np.ndarray | None = None


@dataclass
class Model:
    config: ModelConfig
    params: ScopeItParams
    vocab_id: str


# ---------------------------------------------------------------------------
# Embedding providers
# ---------------------------------------------------------------------------


class TrainableProvider:
    """Lookup-table embeddings that participate in gradient flow."""

    kind = "trainable"

    def __init__(self, table: nn.Tensor):
        self.table = table

    def embed(self, doc_id: str, sentence_index: int, tokens: list[int]) -> nn.Tensor:
        if not tokens:
            raise EmptySentence(f"{doc_id}[{sentence_index}] has no tokens")
        return nn.gather_rows(self.table, np.asarray(tokens))


class PrecomputedProvider:
    """Frozen vectors from an embedding store; never receives gradients."""

    kind = "precomputed"

    def __init__(self, store: EmbeddingStore, expected_vocab_id: str | None = None,
                 dtype=np.float32):
        if expected_vocab_id is not None and store.vocab_hash != expected_vocab_id:
            raise VocabularyMismatch(
                f"store vocabulary hash {store.vocab_hash[:12]} != model {expected_vocab_id[:12]}"
            )
        self.store = store
        self.dtype = dtype

    def embed(self, doc_id: str, sentence_index: int, tokens: list[int]) -> nn.Tensor:
        if not tokens:
            raise EmptySentence(f"{doc_id}[{sentence_index}] has no tokens")
        key = (doc_id, sentence_index)
        if key not in self.store:
            raise MissingEmbedding(f"no stored embedding for {key}")
        vecs = self.store.vectors[key]
        if vecs.shape[0] != len(tokens):
            raise TokenCountMismatch(
                f"{key}: store has {vecs.shape[0]} vectors, sentence has {len(tokens)} tokens"
            )
        return nn.Tensor(vecs.astype(self.dtype))

    def cls(self, doc_id: str, sentence_index: int) -> np.ndarray:
        key = (doc_id, sentence_index)
        if not self.store.has_cls:
            raise MissingEmbedding("store was exported without CLS vectors")
        if key not in self.store:
            raise MissingEmbedding(f"no stored embedding for {key}")
        return self.store.cls_vectors[key].astype(self.dtype)


def embed_sentence(doc_id: str, sentence_index: int, tokens: list[int], provider) -> nn.Tensor:
    """One vector per token from the provider; see provider classes for errors."""
    return provider.embed(doc_id, sentence_index, tokens)


def make_provider(config: ModelConfig, params: ScopeItParams,
                  store: EmbeddingStore | None, vocab_id: str | None = None,
                  dtype=np.float32):
    if config.embedding == "trainable":
        return TrainableProvider(params.embedding)
    if store is None:
        raise MissingEmbedding("precomputed embeddings configured but no store supplied")
    return PrecomputedProvider(store, vocab_id, dtype)


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------


def encode_sentence(token_vectors, intra_layers) -> np.ndarray:
    """Sentence embedding: [final forward state ; final backward state]."""
    arr = np.asarray(token_vectors.data if isinstance(token_vectors, nn.Tensor) else token_vectors)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise EmptySentence("encode_sentence needs at least one token vector")
    _, h_f, h_b = nn.bigru_encode(arr, intra_layers)
    return np.concatenate([h_f, h_b])


def _intra_batched(doc: TokenizedDocument, params: ScopeItParams, config: ModelConfig,
                   provider, dtype) -> nn.Tensor:
    """Encode all sentences of one document in parallel (padded + masked)."""
    m = doc.num_sentences
    lengths = doc.sentence_lengths
    L = max(lengths)
    if isinstance(provider, TrainableProvider):
        ids = np.zeros((m, L), dtype=np.int64)
        for i, toks in enumerate(doc.sentence_tokens):
            ids[i, : len(toks)] = toks
        xs = [nn.gather_rows(provider.table, ids[:, t]) for t in range(L)]
    else:
        per_sentence = [
            provider.embed(doc.doc_id, i, doc.sentence_tokens[i]) for i in range(m)
        ]
        stacked = np.zeros((L, m, config.embed_dim), dtype=dtype)
        for i, vec in enumerate(per_sentence):
            stacked[: lengths[i], i, :] = vec.data
        xs = [nn.Tensor(stacked[t]) for t in range(L)]
    masks = [
        np.array([[1.0 if t < l else 0.0] for l in lengths], dtype=dtype)
        for t in range(L)
    ]
    _, h_f, h_b = nn.bigru_forward(xs, params.intra, masks)
    return nn.concat([h_f, h_b], axis=1)


def _forward(doc: TokenizedDocument, params: ScopeItParams, config: ModelConfig,
             provider, dtype=np.float32) -> tuple[nn.Tensor, nn.Tensor, nn.Tensor]:
    """Score one document; returns (probabilities (m, 1), context embeddings
    f (m, D), sentence embeddings e (m, D'))."""
    if doc.num_sentences == 0:
        raise EmptySentence(f"document {doc.doc_id} has no sentences")
    if config.cls_only:
        e = nn.Tensor(np.stack([
            provider.cls(doc.doc_id, i) for i in range(doc.num_sentences)
        ]).astype(dtype))
    else:
        e = _intra_batched(doc, params, config, provider, dtype)
    if config.use_inter_aggregator:
        steps = nn.sequence_tensors(e)
        outs, _, _ = nn.bigru_forward(steps, params.inter)
        f = nn.concat(outs, axis=0)
    else:
        f = e
    probs = nn.sigmoid(nn.linear(f, params.head_w, params.head_b))
    return probs, f, e


def score_document(doc: TokenizedDocument, model: Model,
                   store: EmbeddingStore | None = None,
                   collect_embeddings: bool = False,
                   embedding_source: str = "inter") -> RelevanceScores:
    """Relevance probability per sentence, refusing vocabulary mismatches.

    ``embedding_source`` picks which vectors are retained when
    ``collect_embeddings`` is set: the context-aware inter-aggregator outputs
    (default) or the per-sentence intra-encoder embeddings.
    """
    if doc.vocab_id != model.vocab_id:
        raise VocabularyMismatch(
            f"document tokenized with vocabulary {doc.vocab_id[:12]}, "
            f"model expects {model.vocab_id[:12]}"
        )
    if embedding_source not in ("inter", "intra"):
        raise ValueError(f"unknown embedding_source {embedding_source!r}")
    params = model.params.detached()
    provider = make_provider(model.config, params, store, model.vocab_id)
    probs, f, e = _forward(doc, params, model.config, provider)
    retained = f if embedding_source == "inter" else e
    return RelevanceScores(
        scores=[float(p) for p in probs.data.reshape(-1)],
        embeddings=retained.data.copy() if collect_embeddings else None,
    )


# ---------------------------------------------------------------------------
# Training and evaluation
# ---------------------------------------------------------------------------


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float
    val_f1: float


@dataclass
class Metrics:
    precision: float
    recall: float
    f1: float
    true_pos: int = 0
    false_pos: int = 0
    false_neg: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def _check_labeled(dataset, name):
    if not dataset:
        raise EmptyCorpus(f"{name} set is empty")
    for doc, labels in dataset:
        if len(labels) != doc.num_sentences:
            raise ValueError(
                f"{doc.doc_id}: {len(labels)} labels for {doc.num_sentences} sentences"
            )


def _doc_loss(doc, labels, params, config, provider, dtype=np.float32) -> nn.Tensor:
    probs, _, _ = _forward(doc, params, config, provider, dtype)
    return nn.bce_loss(probs, np.asarray(labels, dtype=dtype).reshape(-1, 1))


def metrics_from_counts(tp: int, fp: int, fn: int) -> Metrics:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(precision, recall, f1, tp, fp, fn)


def evaluate(model: Model, dataset, threshold: float = 0.5,
             store: EmbeddingStore | None = None) -> Metrics:
    """Micro-averaged precision/recall/F1; relevant means score strictly above threshold."""
    if not dataset:
        raise EmptyCorpus("evaluation set is empty")
    tp = fp = fn = 0
    for doc, labels in dataset:
        scores = score_document(doc, model, store=store).scores
        for s, y in zip(scores, labels):
            pred = s > threshold
            if pred and y:
                tp += 1
            elif pred and not y:
                fp += 1
            elif not pred and y:
                fn += 1
    return metrics_from_counts(tp, fp, fn)


def train(train_set, val_set, config: ModelConfig, tcfg: TrainConfig,
          store: EmbeddingStore | None = None, vocab_id: str = "",
          log_hook=None) -> tuple[Model, list[EpochRecord]]:
    """Adam on mean-per-document BCE with plateau annealing and early stopping.

    Returns the checkpoint with the best validation loss and the epoch log.
    ``log_hook`` is called with each epoch record; a truthy return value
    stops training after that epoch.
    """
    _check_labeled(train_set, "train")
    _check_labeled(val_set, "validation")
    params = init_params(config, tcfg.seed)
    opt = nn.Adam([(n, t) for n, t in params.named_tensors()], lr=tcfg.lr)
    sched = nn.LrSchedule(
        lr=tcfg.lr,
        anneal_factor=tcfg.anneal_factor,
        plateau_patience=tcfg.plateau_patience,
        early_stop_patience=tcfg.early_stop_patience,
    )
    provider = make_provider(config, params, store, vocab_id or None)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([tcfg.seed, 0xD0C5]))

    def val_pass(current: ScopeItParams) -> tuple[float, float]:
        frozen = current.detached()
        fp_provider = make_provider(config, frozen, store, None)
        total = 0.0
        tp = fpos = fneg = 0
        for doc, labels in val_set:
            probs, _, _ = _forward(doc, frozen, config, fp_provider)
            total += float(nn.bce_loss(probs, np.asarray(labels, dtype=np.float32).reshape(-1, 1)).data)
            for s, y in zip(probs.data.reshape(-1), labels):
                pred = s > 0.5
                if pred and y:
                    tp += 1
                elif pred and not y:
                    fpos += 1
                elif not pred and y:
                    fneg += 1
        return total / len(val_set), metrics_from_counts(tp, fpos, fneg).f1

    best_val = float("inf")
    best_state = None
    log: list[EpochRecord] = []
    for epoch in range(1, tcfg.epochs + 1):
        order = shuffle_rng.permutation(len(train_set))
        epoch_loss = 0.0
        for start in range(0, len(order), tcfg.batch_size):
            batch = order[start : start + tcfg.batch_size]
            opt.zero_grad()
            losses = []
            for idx in batch:
                doc, labels = train_set[idx]
                losses.append(_doc_loss(doc, labels, params, config, provider))
            batch_loss = nn.scale(nn.add_n(*losses), 1.0 / len(losses))
            value = float(batch_loss.data)
            if not np.isfinite(value):
                raise NonFiniteLoss(
                    f"loss became {value} at epoch {epoch}, batch starting {start} "
                    f"(lr={opt.lr:g}); aborting"
                )
            epoch_loss += value * len(losses)
            nn.backward(batch_loss)
            opt.step()
        train_loss = epoch_loss / len(train_set)
        val_loss, val_f1 = val_pass(params)
        if val_loss < best_val:
            best_val = val_loss
            best_state = [t.data.copy() for _, t in params.named_tensors()]
        new_lr, stop = nn.schedule_epoch(val_loss, sched)
        opt.lr = new_lr
        record = EpochRecord(epoch, train_loss, val_loss, new_lr, val_f1)
        log.append(record)
        if log_hook is not None and log_hook(record):
            break
        if stop:
            break
    if best_state is not None:
        for (_, t), data in zip(params.named_tensors(), best_state):
            t.data[...] = data
    return Model(config, params, vocab_id), log


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path, model: Model) -> None:
    header = {
        "format_version": 1,
        "precision": "float32",
        "model_config": asdict(model.config),
        "vocab_id": model.vocab_id,
        "param_count": param_count(model.config),
        "param_count_formula": PARAM_COUNT_FORMULA,
    }
    named = [(name, t.data) for name, t in model.params.named_tensors()]
    nn.save_tensors(path, header, named)


def load_checkpoint(path) -> Model:
    header, tensors = nn.load_tensors(path)
    config = ModelConfig(**header["model_config"])
    params = init_params(config, seed=0)
    for name, t in params.named_tensors():
        if name not in tensors:
            raise nn.CheckpointError(f"checkpoint missing tensor {name}")
        if tuple(tensors[name].shape) != tuple(t.data.shape):
            raise nn.CheckpointError(
                f"tensor {name} has shape {tensors[name].shape}, expected {t.data.shape}"
            )
        t.data[...] = tensors[name]
    return Model(config, params, header["vocab_id"])
