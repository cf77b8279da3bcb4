"""Exact nearest-neighbor probe over retained sentence embeddings.

Queries are answered by a full scan (this is the contract, not an
optimization target); each hit carries the matched sentence with its
neighboring sentences for context.

Index file layout: magic ``SCNNIDX1``, u32 rows, u32 dim, u8 metric
(0 = euclidean, 1 = cosine), then row-major little-endian float32, with a
JSON-lines metadata sidecar at ``<path>.meta.jsonl``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import LabeledDocument
from .model import Model, score_document
from .textprep import Vocabulary, tokenize_document

MAGIC = b"SCNNIDX1"
_METRIC_CODES = {"euclidean": 0, "cosine": 1}


class EmptyIndex(ValueError):
    pass


@dataclass
class IndexEntry:
    doc_id: str
    sentence_index: int
    text: str
    context_before: str | None = None
    context_after: str | None = None


@dataclass
class Neighbor:
    rank: int
    distance: float
    doc_id: str
    sentence_index: int
    text: str
    context: list[str]


class EmbeddingIndex:
    def __init__(self, vectors: np.ndarray, entries: list[IndexEntry],
                 metric: str = "euclidean"):
        if metric not in _METRIC_CODES:
            raise ValueError(f"unknown metric {metric!r}")
        if len(entries) != vectors.shape[0]:
            raise ValueError("metadata rows do not match vector rows")
        self.vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        self.entries = entries
        self.metric = metric

    def __len__(self) -> int:
        return self.vectors.shape[0]


def build_index(docs: list[LabeledDocument], model: Model, vocab: Vocabulary,
                sample_size: int | None = None, seed: int = 0,
                metric: str = "euclidean", store=None,
                embedding_source: str = "inter") -> EmbeddingIndex:
    """Score a seeded sample of documents, retaining one row per sentence."""
    if sample_size is not None and sample_size < len(docs):
        rng = np.random.default_rng(seed)
        picked = sorted(rng.choice(len(docs), size=sample_size, replace=False).tolist())
        docs = [docs[i] for i in picked]
    rows: list[np.ndarray] = []
    entries: list[IndexEntry] = []
    for doc in docs:
        tok = tokenize_document(doc.id, doc.sentences, vocab)
        res = score_document(tok, model, store=store, collect_embeddings=True,
                             embedding_source=embedding_source)
        for i, sent in enumerate(doc.sentences):
            rows.append(res.embeddings[i])
            entries.append(IndexEntry(
                doc_id=doc.id,
                sentence_index=i,
                text=sent,
                context_before=doc.sentences[i - 1] if i > 0 else None,
                context_after=doc.sentences[i + 1] if i + 1 < len(doc.sentences) else None,
            ))
    if not rows:
        raise EmptyIndex("no sentences to index")
    return EmbeddingIndex(np.stack(rows), entries, metric)


def _distances(index: EmbeddingIndex, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float32).reshape(-1)
    if q.shape[0] != index.vectors.shape[1]:
        raise ValueError(f"query dim {q.shape[0]} != index dim {index.vectors.shape[1]}")
    if index.metric == "euclidean":
        diff = index.vectors - q
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
    norms = np.linalg.norm(index.vectors, axis=1) * (np.linalg.norm(q) + 1e-12)
    sims = index.vectors @ q / np.maximum(norms, 1e-12)
    return 1.0 - sims


def query(index: EmbeddingIndex, embedding: np.ndarray, k: int = 3) -> list[Neighbor]:
    """Exact k nearest neighbors by full scan, with surrounding context."""
    if len(index) == 0:
        raise EmptyIndex("query against an empty index")
    if not 1 <= k <= len(index):
        raise ValueError(f"k must be in [1, {len(index)}], got {k}")
    dists = _distances(index, embedding)
    order = np.argsort(dists, kind="stable")[:k]
    out = []
    for rank, i in enumerate(order):
        e = index.entries[int(i)]
        context = [c for c in (e.context_before, e.text, e.context_after) if c is not None]
        out.append(Neighbor(
            rank=rank,
            distance=float(dists[i]),
            doc_id=e.doc_id,
            sentence_index=e.sentence_index,
            text=e.text,
            context=context,
        ))
    return out


def save_index(path, index: EmbeddingIndex) -> None:
    path = Path(path)
    rows, dim = index.vectors.shape
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IIB", rows, dim, _METRIC_CODES[index.metric]))
        f.write(index.vectors.astype("<f4").tobytes())
    with open(str(path) + ".meta.jsonl", "w", encoding="utf-8") as f:
        for e in index.entries:
            f.write(json.dumps({
                "doc_id": e.doc_id,
                "sentence_index": e.sentence_index,
                "text": e.text,
                "context_before": e.context_before,
                "context_after": e.context_after,
            }, sort_keys=True, ensure_ascii=False))
            f.write("\n")


def load_index(path) -> EmbeddingIndex:
    path = Path(path)
    blob = path.read_bytes()
    if blob[:8] != MAGIC:
        raise ValueError("not an embedding index (bad magic)")
    rows, dim, metric_code = struct.unpack_from("<IIB", blob, 8)
    vectors = np.frombuffer(blob, dtype="<f4", count=rows * dim, offset=17).reshape(rows, dim)
    metric = {v: k for k, v in _METRIC_CODES.items()}[metric_code]
    entries = []
    with open(str(path) + ".meta.jsonl", "r", encoding="utf-8") as f:
        for line in f:
            raw = json.loads(line)
            entries.append(IndexEntry(
                doc_id=raw["doc_id"],
                sentence_index=raw["sentence_index"],
                text=raw["text"],
                context_before=raw.get("context_before"),
                context_after=raw.get("context_after"),
            ))
    return EmbeddingIndex(vectors.copy(), entries, metric)
