"""Command-line surface for the full lifecycle.

Subcommands: preprocess, augment, gen-corpus, train, eval, score, scope,
nn, extract-eval, serve. Configuration comes from defaults, overlaid by an
optional JSON config file, overlaid by explicit flags. Exit codes: 0 on
success, 1 on usage errors, 2 on data errors. Set SCOPEIT_LOG to error,
info or debug to control logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import augment as aug
from . import corpus as corpus_mod
from . import nnprobe
from .embed_store import EmbeddingStoreError, load_store
from .extractors import compare_before_after
from .model import (
    Model,
    ModelConfig,
    NonFiniteLoss,
    TrainConfig,
    VocabularyMismatch,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .nncore import CheckpointError
from .report import render_extraction_report, render_training_report
from .scoper import CLASSIFY_THRESHOLD, SCOPE_THRESHOLD, scope
from .serve import make_server, score_raw_text
from .textprep import (
    MalformedPlaceholder,
    Vocabulary,
    build_word_vocab,
    build_wordpiece_vocab,
    repair_mojibake,
    replace_urls_emails,
    split_sentences,
    tokenize_document,
)

log = logging.getLogger("scopeit.cli")

DATA_ERRORS = (
    corpus_mod.SchemaError,
    corpus_mod.LabelMisalignment,
    corpus_mod.UnknownTag,
    corpus_mod.EmptyCorpus,
    aug.SpecError,
    aug.EmptyCandidateList,
    VocabularyMismatch,
    NonFiniteLoss,
    CheckpointError,
    EmbeddingStoreError,
    MalformedPlaceholder,
    FileNotFoundError,
    json.JSONDecodeError,
)

CONFIG_DEFAULTS = {
    "lr": 1e-4,
    "epochs": 50,
    "batch_size": 8,
    "seed": 0,
    "anneal_factor": 0.5,
    "plateau_patience": 5,
    "early_stop_patience": 8,
    "classify_threshold": CLASSIFY_THRESHOLD,
    "scope_threshold": SCOPE_THRESHOLD,
    "embedding": "trainable",
    "embed_dim": 64,
    "intra_layers": 2,
    "intra_hidden": 128,
    "inter_layers": 2,
    "inter_hidden": 128,
    "use_inter_aggregator": True,
    "cls_only": False,
    "vocab_mode": "word",
    "vocab_size": 10000,
    "max_tokens": 128,
}


class CliError(Exception):
    """Usage-level error: wrong flags, impossible combinations."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(message)


def resolve_config(args) -> dict:
    """defaults < config file < explicitly passed flags."""
    merged = dict(CONFIG_DEFAULTS)
    path = getattr(args, "config", None)
    if path:
        with open(path, "r", encoding="utf-8") as f:
            file_cfg = json.load(f)
        unknown = set(file_cfg) - set(CONFIG_DEFAULTS)
        if unknown:
            raise CliError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_cfg)
    for key in CONFIG_DEFAULTS:
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            merged[key] = value
    return merged


def model_config_from(cfg: dict, vocab: Vocabulary | None) -> ModelConfig:
    return ModelConfig(
        embedding=cfg["embedding"],
        embed_dim=cfg["embed_dim"],
        vocab_size=len(vocab) if (cfg["embedding"] == "trainable" and vocab) else None,
        intra_layers=cfg["intra_layers"],
        intra_hidden=cfg["intra_hidden"],
        inter_layers=cfg["inter_layers"],
        inter_hidden=cfg["inter_hidden"],
        use_inter_aggregator=cfg["use_inter_aggregator"],
        cls_only=cfg["cls_only"],
    )


def train_config_from(cfg: dict) -> TrainConfig:
    return TrainConfig(
        lr=cfg["lr"],
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        seed=cfg["seed"],
        anneal_factor=cfg["anneal_factor"],
        plateau_patience=cfg["plateau_patience"],
        early_stop_patience=cfg["early_stop_patience"],
    )


def load_vocab(path, mode: str) -> Vocabulary:
    return Vocabulary.from_file(path, mode)


def _load_store_arg(args):
    path = getattr(args, "store", None)
    return load_store(path) if path else None


def _emit(payload) -> None:
    print(json.dumps(payload, sort_keys=True))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_preprocess(args) -> int:
    cfg = resolve_config(args)
    if args.raw:
        text = Path(args.input).read_text(encoding="utf-8")
        cleaned, _ = replace_urls_emails(repair_mojibake(text))
        split = split_sentences(cleaned)
        docs = [corpus_mod.LabeledDocument(
            id=Path(args.input).stem, sentences=split.sentences,
            labels=[0] * len(split.sentences),
        )]
        labeled = False
    else:
        docs = corpus_mod.load_jsonl_corpus(args.input)
        labeled = True
    if args.build_vocab:
        sentences = (s for d in docs for s in d.sentences)
        builder = build_word_vocab if cfg["vocab_mode"] == "word" else build_wordpiece_vocab
        vocab = builder(sentences, size=cfg["vocab_size"])
        vocab.save(args.vocab)
        log.info("built %d-token %s vocabulary at %s", len(vocab), vocab.mode, args.vocab)
    else:
        vocab = load_vocab(args.vocab, cfg["vocab_mode"])
    with open(args.out, "w", encoding="utf-8") as f:
        for doc in docs:
            tok = tokenize_document(doc.id, doc.sentences, vocab, cfg["max_tokens"])
            record = {
                "id": doc.id,
                "sentences": doc.sentences,
                "tokens": tok.sentence_tokens,
                "lengths": tok.sentence_lengths,
                "truncated": tok.truncated,
                "vocab_id": tok.vocab_id,
            }
            if labeled:
                record["labels"] = doc.labels
            f.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
    log.info("wrote %d tokenized documents to %s", len(docs), args.out)
    return 0


def cmd_augment(args) -> int:
    docs = corpus_mod.load_jsonl_corpus(args.input)
    out = list(docs)
    if args.negatives:
        candidates = corpus_mod.load_jsonl_corpus(args.negatives)
        accepted = aug.filter_negatives(candidates)
        log.info("accepted %d of %d negative candidates", len(accepted), len(candidates))
        out.extend(accepted)
    if args.shuffle:
        rng = np.random.default_rng(args.seed)
        eligible = [d for d in docs if d.passages is not None
                    and len(set(d.passages)) > 3]
        if not eligible:
            raise aug.SpecError("no documents with more than 3 passages to shuffle")
        for i in range(args.shuffle):
            base = eligible[int(rng.integers(len(eligible)))]
            shuffled = aug.shuffle_passages(base, seed=int(rng.integers(2**31)))
            shuffled.id = f"{base.id}-shuffled-{i:04d}"
            out.append(shuffled)
    if args.template:
        template = aug.load_template(args.template)
        out.extend(aug.instantiate_template(template, seed=args.seed, n=args.instances))
    corpus_mod.save_jsonl_corpus(args.out, out)
    log.info("wrote %d documents (was %d)", len(out), len(docs))
    return 0


def cmd_gen_corpus(args) -> int:
    spec = aug.GenSpec.from_json(args.spec)
    corpus = aug.build_synthetic_corpus(spec, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, docs in corpus.split.parts().items():
        corpus_mod.save_jsonl_corpus(out / f"{name}.jsonl", docs)
    (out / "gold.json").write_text(
        json.dumps(corpus.gold, sort_keys=True) + "\n", encoding="utf-8")
    stats = {"expected": corpus.expected, "splits": corpus_mod.corpus_stats(corpus.split)}
    (out / "stats.json").write_text(
        json.dumps(stats, sort_keys=True) + "\n", encoding="utf-8")
    _emit(stats)
    return 0


def _load_labeled_and_vocab(args, cfg):
    train_docs = corpus_mod.load_jsonl_corpus(args.train)
    val_docs = corpus_mod.load_jsonl_corpus(args.val)
    if args.build_vocab:
        sentences = (s for d in train_docs for s in d.sentences)
        builder = build_word_vocab if cfg["vocab_mode"] == "word" else build_wordpiece_vocab
        vocab = builder(sentences, size=cfg["vocab_size"])
        vocab.save(args.vocab)
    else:
        vocab = load_vocab(args.vocab, cfg["vocab_mode"])
    return train_docs, val_docs, vocab


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    train_docs, val_docs, vocab = _load_labeled_and_vocab(args, cfg)
    store = _load_store_arg(args)
    train_set = corpus_mod.tokenize_docs(train_docs, vocab, cfg["max_tokens"])
    val_set = corpus_mod.tokenize_docs(val_docs, vocab, cfg["max_tokens"])
    mcfg = model_config_from(cfg, vocab)
    tcfg = train_config_from(cfg)

    def progress(record):
        log.info("epoch %d: train %.4f val %.4f lr %.2e f1 %.3f",
                 record.epoch, record.train_loss, record.val_loss,
                 record.lr, record.val_f1)

    model, train_log = train(train_set, val_set, mcfg, tcfg, store=store,
                             vocab_id=vocab.vocab_id, log_hook=progress)
    save_checkpoint(args.out, model)
    report_dir = args.report_dir or str(Path(args.out).parent / "report")
    paths = render_training_report(train_log, report_dir)
    log.info("checkpoint at %s; report files: %s", args.out,
             ", ".join(str(p) for p in paths))
    best = min(train_log, key=lambda r: r.val_loss)
    _emit({"epochs_run": len(train_log), "best_val_loss": round(best.val_loss, 6),
           "best_val_f1": round(best.val_f1, 4), "checkpoint": str(args.out)})
    return 0


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    model = load_checkpoint(args.model)
    vocab = load_vocab(args.vocab, cfg["vocab_mode"])
    docs = corpus_mod.load_jsonl_corpus(args.corpus)
    dataset = corpus_mod.tokenize_docs(docs, vocab, cfg["max_tokens"])
    metrics = evaluate(model, dataset, threshold=cfg["classify_threshold"],
                       store=_load_store_arg(args))
    _emit({"precision": round(metrics.precision, 6),
           "recall": round(metrics.recall, 6),
           "f1": round(metrics.f1, 6)})
    return 0


def _read_text_arg(args) -> str:
    if args.text is not None:
        return args.text
    return Path(args.input).read_text(encoding="utf-8")


def cmd_score(args) -> int:
    cfg = resolve_config(args)
    model = load_checkpoint(args.model)
    vocab = load_vocab(args.vocab, cfg["vocab_mode"])
    result = score_raw_text(model, vocab, _read_text_arg(args),
                            store=_load_store_arg(args),
                            scope_threshold=cfg["scope_threshold"])
    _emit(result)
    return 0


def cmd_scope(args) -> int:
    cfg = resolve_config(args)
    model = load_checkpoint(args.model)
    vocab = load_vocab(args.vocab, cfg["vocab_mode"])
    text = _read_text_arg(args)
    cleaned, rmap = replace_urls_emails(repair_mojibake(text))
    split = split_sentences(cleaned)
    if not split.sentences:
        _emit({"indices": [], "text": "", "threshold": cfg["scope_threshold"],
               "actionable": False})
        return 0
    from .model import score_document

    tok = tokenize_document("input", split.sentences, vocab, cfg["max_tokens"])
    scores = score_document(tok, model, store=_load_store_arg(args))
    message = scope(split, scores, rmap, cfg["scope_threshold"])
    print(message.to_json())
    return 0


def cmd_nn(args) -> int:
    cfg = resolve_config(args)
    model = load_checkpoint(args.model)
    vocab = load_vocab(args.vocab, cfg["vocab_mode"])
    if args.nn_command == "build":
        docs = corpus_mod.load_jsonl_corpus(args.corpus)
        index = nnprobe.build_index(
            docs, model, vocab, sample_size=args.sample, seed=args.seed,
            metric=args.metric, store=_load_store_arg(args),
            embedding_source=args.source,
        )
        nnprobe.save_index(args.out, index)
        _emit({"rows": len(index), "dim": int(index.vectors.shape[1]),
               "metric": index.metric, "path": str(args.out)})
        return 0
    index = nnprobe.load_index(args.index)
    text = args.text if args.text is not None else Path(args.input).read_text(encoding="utf-8")
    cleaned, _ = replace_urls_emails(repair_mojibake(text))
    split = split_sentences(cleaned)
    if not split.sentences:
        raise corpus_mod.EmptyCorpus("query text has no sentences")
    sentence_index = args.sentence if args.sentence is not None else 0
    if not 0 <= sentence_index < len(split.sentences):
        raise CliError(f"--sentence {sentence_index} out of range")
    from .model import score_document

    tok = tokenize_document("query", split.sentences, vocab, cfg["max_tokens"])
    res = score_document(tok, model, store=_load_store_arg(args),
                         collect_embeddings=True, embedding_source=args.source)
    hits = nnprobe.query(index, res.embeddings[sentence_index], k=args.k)
    _emit({
        "query": split.sentences[sentence_index],
        "neighbors": [
            {"rank": h.rank, "distance": round(h.distance, 6), "doc_id": h.doc_id,
             "sentence_index": h.sentence_index, "text": h.text, "context": h.context}
            for h in hits
        ],
    })
    return 0


def cmd_extract_eval(args) -> int:
    cfg = resolve_config(args)
    model = load_checkpoint(args.model)
    vocab = load_vocab(args.vocab, cfg["vocab_mode"])
    docs = corpus_mod.load_jsonl_corpus(args.corpus)
    gold = {}
    if args.gold:
        gold = json.loads(Path(args.gold).read_text(encoding="utf-8"))
    report = compare_before_after(docs, gold, model, vocab,
                                  threshold=cfg["scope_threshold"],
                                  store=_load_store_arg(args))
    paths = render_extraction_report(report, args.out)
    log.info("report files: %s", ", ".join(str(p) for p in paths))
    _emit(report.rows())
    return 0


def cmd_serve(args) -> int:
    cfg = resolve_config(args)
    model = load_checkpoint(args.model)
    vocab = load_vocab(args.vocab, cfg["vocab_mode"])
    server = make_server(model, vocab, port=args.port, host=args.host,
                         store=_load_store_arg(args),
                         threshold=cfg["scope_threshold"])
    host, port = server.server_address[:2]
    log.info("scoring endpoint at http://%s:%s/score", host, port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_config_flags(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--embed-dim", dest="embed_dim", type=int, default=None)
    p.add_argument("--intra-hidden", dest="intra_hidden", type=int, default=None)
    p.add_argument("--inter-hidden", dest="inter_hidden", type=int, default=None)
    p.add_argument("--intra-layers", dest="intra_layers", type=int, default=None)
    p.add_argument("--inter-layers", dest="inter_layers", type=int, default=None)
    p.add_argument("--vocab-mode", dest="vocab_mode", choices=["word", "wordpiece"],
                   default=None)
    p.add_argument("--vocab-size", dest="vocab_size", type=int, default=None)
    p.add_argument("--classify-threshold", dest="classify_threshold", type=float,
                   default=None)
    p.add_argument("--scope-threshold", dest="scope_threshold", type=float,
                   default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="scopeit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="clean and tokenize a corpus or raw email")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--raw", action="store_true", help="input is raw email text")
    p.add_argument("--build-vocab", action="store_true",
                   help="build the vocabulary from the input and save it to --vocab")
    _add_config_flags(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("augment", help="extend a labeled corpus with augmented documents")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--negatives", help="candidate negatives to filter and add")
    p.add_argument("--shuffle", type=int, default=0, help="number of shuffled variants")
    p.add_argument("--template", help="template JSON to instantiate")
    p.add_argument("--instances", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_augment, config=None)

    p = sub.add_parser("gen-corpus", help="generate a synthetic corpus from a spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_corpus, config=None)

    p = sub.add_parser("train", help="train a scoping model")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--build-vocab", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--store", help="precomputed embedding store")
    p.add_argument("--report-dir", dest="report_dir")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="precision/recall/F1 on a labeled corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--store")
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("score", help="score raw text, print sentence scores")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--in", dest="input")
    p.add_argument("--text")
    p.add_argument("--store")
    _add_config_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("scope", help="filter raw text to relevant sentences")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--in", dest="input")
    p.add_argument("--text")
    p.add_argument("--store")
    _add_config_flags(p)
    p.set_defaults(func=cmd_scope)

    p = sub.add_parser("nn", help="embedding-space nearest-neighbor probe")
    nn_sub = p.add_subparsers(dest="nn_command", required=True)
    b = nn_sub.add_parser("build")
    b.add_argument("--model", required=True)
    b.add_argument("--vocab", required=True)
    b.add_argument("--corpus", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--sample", type=int)
    b.add_argument("--metric", choices=["euclidean", "cosine"], default="euclidean")
    b.add_argument("--source", choices=["inter", "intra"], default="inter")
    b.add_argument("--store")
    _add_config_flags(b)
    b.set_defaults(func=cmd_nn)
    q = nn_sub.add_parser("query")
    q.add_argument("--model", required=True)
    q.add_argument("--vocab", required=True)
    q.add_argument("--index", required=True)
    q.add_argument("--in", dest="input")
    q.add_argument("--text")
    q.add_argument("--sentence", type=int)
    q.add_argument("-k", type=int, default=3)
    q.add_argument("--source", choices=["inter", "intra"], default="inter")
    q.add_argument("--store")
    _add_config_flags(q)
    q.set_defaults(func=cmd_nn)

    p = sub.add_parser("extract-eval",
                       help="before/after-scoping extraction study with report files")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--gold", help="gold entity JSON (default: entities in the corpus)")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--store")
    _add_config_flags(p)
    p.set_defaults(func=cmd_extract_eval)

    p = sub.add_parser("serve", help="HTTP scoring endpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--store")
    _add_config_flags(p)
    p.set_defaults(func=cmd_serve)

    return parser


def _setup_logging() -> None:
    level = os.environ.get("SCOPEIT_LOG", "info").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(
        level=levels.get(level, logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except CliError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
