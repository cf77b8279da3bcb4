"""Shared fixtures for gradient verification and synthetic training tests."""

import numpy as np

from scopeit import model as sm
from scopeit.embed_store import EmbeddingStore
from scopeit.textprep import TokenizedDocument


def tok_doc(doc_id, tokens, vocab_id="v0"):
    return TokenizedDocument(
        doc_id=doc_id,
        sentence_tokens=tokens,
        sentence_lengths=[len(t) for t in tokens],
        vocab_id=vocab_id,
        truncated=[False] * len(tokens),
    )


def random_tiny_setup(seed):
    """Random small architecture + document, in 64-bit, for FD checking.

    Covers all four wiring variants: trainable/precomputed embeddings with
    and without the inter-sentence aggregator, plus the CLS-only baseline.
    """
    rng = np.random.default_rng(seed)
    variant = seed % 5
    kind = "trainable" if variant in (0, 1) else "precomputed"
    use_inter = variant in (0, 2, 4)
    cls_only = variant == 4
    embed_dim = int(rng.integers(2, 5))
    hidden = int(rng.integers(2, 5))
    vocab_size = 12
    config = sm.ModelConfig(
        embedding=kind,
        embed_dim=embed_dim,
        vocab_size=vocab_size if kind == "trainable" else None,
        intra_layers=int(rng.integers(1, 3)),
        intra_hidden=hidden,
        inter_layers=int(rng.integers(1, 3)),
        inter_hidden=int(rng.integers(2, 5)),
        use_inter_aggregator=use_inter,
        cls_only=cls_only,
    )
    params = sm.init_params(config, seed=seed, dtype=np.float64)
    # break the zero-bias symmetry so bias gradients are generic
    for name, t in params.named_tensors():
        t.data += rng.normal(0, 0.05, size=t.data.shape)

    m = int(rng.integers(1, 5))
    tokens = [list(rng.integers(4, vocab_size, size=rng.integers(1, 6))) for _ in range(m)]
    labels = rng.integers(0, 2, size=m).astype(np.float64)
    doc = tok_doc(f"g{seed}", tokens)

    store = None
    if kind == "precomputed":
        store = EmbeddingStore(dim=embed_dim, vocab_hash="v0", has_cls=cls_only)
        for i, t in enumerate(tokens):
            store.add(
                doc.doc_id, i,
                rng.normal(size=(len(t), embed_dim)).astype(np.float32),
                cls=rng.normal(size=embed_dim).astype(np.float32) if cls_only else None,
            )
    provider = sm.make_provider(config, params, store, None, dtype=np.float64)

    def loss_fn():
        return sm._doc_loss(doc, labels, params, config, provider, dtype=np.float64)

    return loss_fn, params.named_tensors(), config
