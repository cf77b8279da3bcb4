"""Context-independent entity extractors and the before/after-scoping harness.

The extractors are deliberately recall-heavy regexes, the kind that pick up
phone numbers in signature blocks; the harness quantifies how much precision
scoping buys them.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .corpus import EmptyCorpus, LabeledDocument
from .model import Model, score_document
from .scoper import SCOPE_THRESHOLD, scope
from .textprep import SentenceSplitDocument, Vocabulary, tokenize_document

ENTITY_KINDS = ("phone", "duration", "timezone")

PHONE_PATTERN = re.compile(
    r"(?<!\d)(?:\+\d{1,3}[-. ]?)?(?:\(\d{3}\)|\d{3})[-. ]?\d{3}[-. ]?\d{4}(?!\d)"
)

_DURATION_UNITS = r"(?:minutes|mins|min|hours|hrs|hour|hr)"
DURATION_PATTERN = re.compile(
    rf"(?<!\d)(\d+)\s*({_DURATION_UNITS})\b|(half an hour)", re.IGNORECASE
)

TIMEZONE_ABBREVIATIONS = (
    "EST", "EDT", "CST", "CDT", "MST", "MDT", "PST", "PDT",
    "UTC", "GMT", "IST", "CET", "CEST", "BST", "JST", "AEST",
)
TIMEZONE_PATTERN = re.compile(
    r"\b(" + "|".join(sorted(TIMEZONE_ABBREVIATIONS, key=len, reverse=True)) + r")\b"
)


@dataclass
class EntitySpan:
    kind: str
    text: str
    start: int
    end: int
    normalized: str | int


def extract_phone(text: str) -> list[EntitySpan]:
    """Optional country code plus ten grouped digits; normalized to a digit string."""
    spans = []
    for m in PHONE_PATTERN.finditer(text):
        digits = re.sub(r"\D", "", m.group(0))
        spans.append(EntitySpan("phone", m.group(0), m.start(), m.end(), digits))
    return spans


def extract_duration(text: str) -> list[EntitySpan]:
    """Integer + unit mentions and "half an hour"; normalized to minutes."""
    spans = []
    for m in DURATION_PATTERN.finditer(text):
        if m.group(3) is not None:
            minutes = 30
        else:
            value = int(m.group(1))
            unit = m.group(2).lower()
            minutes = value * 60 if unit.startswith("h") else value
        spans.append(EntitySpan("duration", m.group(0), m.start(), m.end(), minutes))
    return spans


def extract_timezone(text: str) -> list[EntitySpan]:
    """Word-boundary matches of a fixed abbreviation table, in order."""
    return [
        EntitySpan("timezone", m.group(0), m.start(), m.end(), m.group(0))
        for m in TIMEZONE_PATTERN.finditer(text)
    ]


EXTRACTORS = {
    "phone": extract_phone,
    "duration": extract_duration,
    "timezone": extract_timezone,
}


@dataclass
class ConditionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0


@dataclass
class ExtractionReport:
    """Per-kind precision/recall on full and scoped text, with deltas."""

    counts: dict[str, dict[str, ConditionCounts]] = field(default_factory=dict)

    def rows(self) -> list[dict]:
        out = []
        for kind in ENTITY_KINDS:
            if kind not in self.counts:
                continue
            full = self.counts[kind]["full"]
            scoped = self.counts[kind]["scoped"]
            for metric, fn in (("precision", lambda c: c.precision()),
                               ("recall", lambda c: c.recall())):
                before, after = fn(full), fn(scoped)
                out.append({
                    "task": kind,
                    "metric": metric,
                    "before": round(before, 6),
                    "after": round(after, 6),
                    "delta": round(after - before, 6),
                })
        return out

    def to_json(self) -> str:
        return json.dumps(self.rows(), sort_keys=True)


def _gold_values(gold_entities, kind: str) -> set:
    return {e["value"] for e in gold_entities if e["kind"] == kind}


def compare_before_after(docs: list[LabeledDocument], gold: dict[str, list[dict]],
                         model: Model, vocab: Vocabulary,
                         threshold: float = SCOPE_THRESHOLD,
                         store=None) -> ExtractionReport:
    """Run each extractor on the full and the scoped text of every document.

    Gold matching is by normalized value per document and kind, so the
    comparison is insensitive to the character offsets scoping shifts.
    """
    if not docs:
        raise EmptyCorpus("extraction corpus is empty")
    report = ExtractionReport(
        counts={k: {"full": ConditionCounts(), "scoped": ConditionCounts()}
                for k in ENTITY_KINDS}
    )
    for doc in docs:
        full_text = " ".join(doc.sentences)
        tok = tokenize_document(doc.id, doc.sentences, vocab)
        scores = score_document(tok, model, store=store)
        sdoc = SentenceSplitDocument.from_sentences(doc.sentences)
        scoped_text = scope(sdoc, scores, threshold=threshold).text
        gold_entities = gold.get(doc.id, doc.entities or [])
        for kind in ENTITY_KINDS:
            gold_set = _gold_values(gold_entities, kind)
            for condition, text in (("full", full_text), ("scoped", scoped_text)):
                predicted = {s.normalized for s in EXTRACTORS[kind](text)}
                c = report.counts[kind][condition]
                c.tp += len(predicted & gold_set)
                c.fp += len(predicted - gold_set)
                c.fn += len(gold_set - predicted)
    return report
