"""Dataset schemas, loaders, splits and statistics.

Labeled corpora are JSON-lines, one document per line:

    {"id": str, "sentences": [str], "labels": [0|1], "source": str?}

Two optional keys extend the schema without breaking it: "passages" (one
passage index per sentence, non-decreasing) preserves blank-line structure
for the shuffle augmentation, and "entities" ([{"kind", "value"}]) carries
gold annotations for the extraction study.

Line-labeled signature corpora are plain-text emails, either with a
sentinel line ``#SIG#`` before the signature block or with a sidecar
``<name>.tags`` file holding one ``body``/``signature`` tag per line.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .textprep import (
    MAX_TOKENS_PER_SENTENCE,
    Vocabulary,
    repair_mojibake,
    replace_urls_emails,
    tokenize_document,
)

SIG_SENTINEL = "#SIG#"
VALID_TAGS = ("body", "signature")


class SchemaError(ValueError):
    pass


class LabelMisalignment(ValueError):
    pass


class UnknownTag(ValueError):
    pass


class EmptyCorpus(ValueError):
    pass


@dataclass
class LabeledDocument:
    """A sentence-segmented document with per-sentence binary labels."""

    id: str
    sentences: list[str]
    labels: list[int]
    source: str = "internal-style"
    passages: list[int] | None = None
    entities: list[dict] | None = None

    def body(self) -> str:
        return "\n".join(self.sentences)

    def to_record(self) -> dict:
        record = {"id": self.id, "sentences": self.sentences,
                  "labels": self.labels, "source": self.source}
        if self.passages is not None:
            record["passages"] = self.passages
        if self.entities is not None:
            record["entities"] = self.entities
        return record


@dataclass
class LineLabeledEmail:
    """Line-granular annotation used by the signature detection task."""

    id: str
    lines: list[str]
    tags: list[str]


@dataclass
class CorpusSplit:
    train: list[LabeledDocument] = field(default_factory=list)
    validation: list[LabeledDocument] = field(default_factory=list)
    test: list[LabeledDocument] = field(default_factory=list)

    def parts(self) -> dict[str, list[LabeledDocument]]:
        return {"train": self.train, "validation": self.validation, "test": self.test}


def _clean_sentence(text: str) -> str:
    cleaned, _ = replace_urls_emails(repair_mojibake(text))
    return cleaned


def _validate_record(record: dict, line_no: int) -> LabeledDocument:
    if not isinstance(record, dict):
        raise SchemaError(f"line {line_no}: expected an object")
    for key in ("id", "sentences", "labels"):
        if key not in record:
            raise SchemaError(f"line {line_no}: missing required key {key!r}")
    if not isinstance(record["id"], str) or not record["id"]:
        raise SchemaError(f"line {line_no}: id must be a non-empty string")
    sentences = record["sentences"]
    labels = record["labels"]
    if not isinstance(sentences, list) or not all(isinstance(s, str) for s in sentences):
        raise SchemaError(f"line {line_no}: sentences must be a list of strings")
    if not sentences:
        raise SchemaError(f"line {line_no}: document has no sentences")
    if not isinstance(labels, list) or not all(l in (0, 1) for l in labels):
        raise SchemaError(f"line {line_no}: labels must be 0/1")
    if len(labels) != len(sentences):
        raise LabelMisalignment(
            f"line {line_no}: {len(labels)} labels for {len(sentences)} sentences"
        )
    passages = record.get("passages")
    if passages is not None:
        ok = (
            isinstance(passages, list)
            and len(passages) == len(sentences)
            and all(isinstance(p, int) for p in passages)
            and all(b - a in (0, 1) for a, b in zip(passages, passages[1:]))
            and (passages[0] == 0)
        )
        if not ok:
            raise SchemaError(f"line {line_no}: malformed passages index")
    entities = record.get("entities")
    if entities is not None and not isinstance(entities, list):
        raise SchemaError(f"line {line_no}: entities must be a list")
    return LabeledDocument(
        id=record["id"],
        sentences=[_clean_sentence(s) for s in sentences],
        labels=list(labels),
        source=record.get("source", "internal-style"),
        passages=list(passages) if passages is not None else None,
        entities=entities,
    )


def load_jsonl_corpus(path) -> list[LabeledDocument]:
    """Load and validate a labeled corpus, cleaning each sentence."""
    docs: list[LabeledDocument] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {line_no}: invalid JSON ({exc})") from exc
            doc = _validate_record(record, line_no)
            if doc.id in seen:
                raise SchemaError(f"line {line_no}: duplicate document id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    return docs


def save_jsonl_corpus(path, docs: list[LabeledDocument]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for doc in docs:
            f.write(json.dumps(doc.to_record(), sort_keys=True, ensure_ascii=False))
            f.write("\n")


def split_corpus(docs: list[LabeledDocument],
                 fractions: tuple[float, float, float] = (0.81, 0.09, 0.10),
                 seed: int = 0) -> CorpusSplit:
    """Deterministic seeded shuffle into train/validation/test."""
    if not docs:
        raise EmptyCorpus("cannot split an empty corpus")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    order = np.random.default_rng(seed).permutation(len(docs))
    n = len(docs)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    n_train = min(n_train, n)
    n_val = min(n_val, n - n_train)
    shuffled = [docs[i] for i in order]
    return CorpusSplit(
        train=shuffled[:n_train],
        validation=shuffled[n_train : n_train + n_val],
        test=shuffled[n_train + n_val :],
    )


def corpus_stats(split: CorpusSplit) -> dict[str, dict[str, int]]:
    """Exact recount of documents, sentences and labels per split."""
    out: dict[str, dict[str, int]] = {}
    for name, docs in split.parts().items():
        n_sent = sum(len(d.sentences) for d in docs)
        n_pos = sum(sum(d.labels) for d in docs)
        out[name] = {
            "n_docs": len(docs),
            "n_sent": n_sent,
            "n_pos": n_pos,
            "n_neg": n_sent - n_pos,
        }
    return out


# ---------------------------------------------------------------------------
# Line-labeled signature corpora
# ---------------------------------------------------------------------------


def _email_from_text(doc_id: str, text: str) -> LineLabeledEmail:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if SIG_SENTINEL in lines:
        cut = lines.index(SIG_SENTINEL)
        body = lines[:cut]
        sig = lines[cut + 1 :]
        return LineLabeledEmail(doc_id, body + sig,
                                ["body"] * len(body) + ["signature"] * len(sig))
    return LineLabeledEmail(doc_id, lines, ["body"] * len(lines))


def _email_from_sidecar(doc_id: str, text: str, tag_text: str) -> LineLabeledEmail:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    tags = [t.strip() for t in tag_text.split("\n") if t.strip()]
    for t in tags:
        if t not in VALID_TAGS:
            raise UnknownTag(f"{doc_id}: unknown line tag {t!r}")
    if len(tags) != len(lines):
        raise LabelMisalignment(f"{doc_id}: {len(tags)} tags for {len(lines)} lines")
    return LineLabeledEmail(doc_id, lines, tags)


def load_line_labeled(path) -> list[LineLabeledEmail]:
    """Load one file or a directory of ``*.txt`` emails with line tags."""
    path = Path(path)
    files = sorted(path.glob("*.txt")) if path.is_dir() else [path]
    if not files:
        raise EmptyCorpus(f"no .txt emails under {path}")
    emails = []
    for fp in files:
        text = fp.read_text(encoding="utf-8")
        sidecar = fp.with_suffix(".tags")
        if sidecar.exists():
            emails.append(_email_from_sidecar(fp.stem, text, sidecar.read_text(encoding="utf-8")))
        else:
            emails.append(_email_from_text(fp.stem, text))
    return emails


def adapt_signature(email: LineLabeledEmail) -> LabeledDocument:
    """Signature mode: every line is a sentence, signature lines are positive."""
    return LabeledDocument(
        id=email.id,
        sentences=[_clean_sentence(line) for line in email.lines],
        labels=[1 if t == "signature" else 0 for t in email.tags],
        source="signature-corpus",
    )


# ---------------------------------------------------------------------------
# Tokenization bridge
# ---------------------------------------------------------------------------


def tokenize_docs(docs: list[LabeledDocument], vocab: Vocabulary,
                  max_tokens: int = MAX_TOKENS_PER_SENTENCE):
    """Pair each document's token ids with its label vector."""
    out = []
    for doc in docs:
        tok = tokenize_document(doc.id, doc.sentences, vocab, max_tokens)
        out.append((tok, list(doc.labels)))
    return out
