"""Binary store of precomputed per-token sentence embeddings.

This is the wire format written by the standalone embedding exporter and
consumed by the precomputed embedding provider. Layout (little-endian):

    magic    8 bytes  b"EMBSTORE"
    u32      format version (1)
    u32      embedding dim E
    u16      vocabulary hash length, then UTF-8 hex hash
    u32      document count
    u8       has_cls (0/1)
    u32      record count
    per record, sorted by (doc id, sentence index):
        u16      doc id length, then UTF-8 doc id
        u32      sentence index
        u32      token count
        f32*E    CLS vector            (only when has_cls)
        f32*(token count * E) token vectors, row-major

Writing is deterministic: the same records produce identical bytes.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"EMBSTORE"
FORMAT_VERSION = 1


class EmbeddingStoreError(ValueError):
    pass


class EmbeddingStore:
    """In-memory view of an embedding store file."""

    def __init__(self, dim: int, vocab_hash: str, has_cls: bool):
        self.dim = dim
        self.vocab_hash = vocab_hash
        self.has_cls = has_cls
        self.vectors: dict[tuple[str, int], np.ndarray] = {}
        self.cls_vectors: dict[tuple[str, int], np.ndarray] = {}

    def add(self, doc_id: str, sentence_index: int, vectors: np.ndarray,
            cls: np.ndarray | None = None) -> None:
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        if vectors.ndim != 2 or vectors.shape[1] != self.dim:
            raise EmbeddingStoreError(f"expected (*, {self.dim}) vectors, got {vectors.shape}")
        key = (doc_id, sentence_index)
        self.vectors[key] = vectors
        if self.has_cls:
            if cls is None:
                raise EmbeddingStoreError("store has CLS vectors; record is missing one")
            self.cls_vectors[key] = np.ascontiguousarray(cls, dtype=np.float32)

    def document_count(self) -> int:
        return len({doc_id for doc_id, _ in self.vectors})

    def __contains__(self, key) -> bool:
        return key in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)


def save_store(path, store: EmbeddingStore) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", FORMAT_VERSION)
    blob += struct.pack("<I", store.dim)
    hb = store.vocab_hash.encode("utf-8")
    blob += struct.pack("<H", len(hb))
    blob += hb
    blob += struct.pack("<I", store.document_count())
    blob += struct.pack("<B", 1 if store.has_cls else 0)
    keys = sorted(store.vectors)
    blob += struct.pack("<I", len(keys))
    for doc_id, s_idx in keys:
        db = doc_id.encode("utf-8")
        blob += struct.pack("<H", len(db))
        blob += db
        vecs = store.vectors[(doc_id, s_idx)]
        blob += struct.pack("<I", s_idx)
        blob += struct.pack("<I", vecs.shape[0])
        if store.has_cls:
            blob += store.cls_vectors[(doc_id, s_idx)].astype("<f4").tobytes()
        blob += vecs.astype("<f4").tobytes()
    with open(path, "wb") as f:
        f.write(bytes(blob))


def load_store(path) -> EmbeddingStore:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != MAGIC:
        raise EmbeddingStoreError("not an embedding store (bad magic)")
    pos = 8
    (version,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    if version != FORMAT_VERSION:
        raise EmbeddingStoreError(f"unsupported store version {version}")
    (dim,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    (hlen,) = struct.unpack_from("<H", blob, pos)
    pos += 2
    vocab_hash = blob[pos : pos + hlen].decode("utf-8")
    pos += hlen
    (doc_count,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    (has_cls,) = struct.unpack_from("<B", blob, pos)
    pos += 1
    (count,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    store = EmbeddingStore(dim, vocab_hash, bool(has_cls))
    for _ in range(count):
        (dlen,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        doc_id = blob[pos : pos + dlen].decode("utf-8")
        pos += dlen
        s_idx, tokens = struct.unpack_from("<II", blob, pos)
        pos += 8
        cls = None
        if has_cls:
            cls = np.frombuffer(blob, dtype="<f4", count=dim, offset=pos).copy()
            pos += 4 * dim
        vecs = np.frombuffer(blob, dtype="<f4", count=tokens * dim, offset=pos)
        pos += 4 * tokens * dim
        store.add(doc_id, s_idx, vecs.reshape(tokens, dim).copy(), cls)
    if pos != len(blob):
        raise EmbeddingStoreError("trailing bytes after last record")
    if store.document_count() != doc_count:
        raise EmbeddingStoreError("document count does not match records")
    return store
