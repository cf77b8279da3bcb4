"""Data augmentation and the synthetic corpus generator.

The generator produces four document families with exact bookkeeping:
scheduling emails (relevant sentences all contain the token "schedule",
optionally carrying gold phone/duration/timezone entities with distractors
planted in signatures and filler), negative emails in office and review
style, shuffled variants of scheduling emails, and a context-dependent
family where a sentence is relevant iff it contains a trigger token and the
previous sentence contains a cue token.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import CorpusSplit, LabeledDocument, split_corpus
from .textprep import split_sentences

#: Phrases that disqualify a candidate negative document (case-insensitive
#: substring match over the whole body).
DISQUALIFICATION_PHRASES = (
    "book a room",
    "let's meet",
    "meeting",
    "conference room",
    "meet",
    "invitation",
    "location",
    "half an hour",
    "30 mins",
    "30 minutes",
    "45 mins",
    "schedule",
    "reserve",
)


class SpecError(ValueError):
    pass


class EmptyCandidateList(ValueError):
    pass


@dataclass
class DisqualificationList:
    phrases: tuple[str, ...] = DISQUALIFICATION_PHRASES

    def disqualifies(self, body: str) -> bool:
        lowered = body.lower()
        return any(p in lowered for p in self.phrases)


def filter_negatives(docs: list[LabeledDocument],
                     dq: DisqualificationList | None = None,
                     source: str = "negative-enron-style") -> list[LabeledDocument]:
    """Keep only documents free of disqualification phrases, labeled all-zero."""
    dq = dq or DisqualificationList()
    accepted = []
    for doc in docs:
        if dq.disqualifies(doc.body()):
            continue
        accepted.append(LabeledDocument(
            id=doc.id,
            sentences=list(doc.sentences),
            labels=[0] * len(doc.sentences),
            source=source,
            passages=list(doc.passages) if doc.passages is not None else None,
        ))
    return accepted


# ---------------------------------------------------------------------------
# Passage shuffling
# ---------------------------------------------------------------------------


def _passage_groups(doc: LabeledDocument) -> list[list[int]]:
    if doc.passages is None:
        return [list(range(len(doc.sentences)))]
    groups: list[list[int]] = []
    for i, p in enumerate(doc.passages):
        if not groups or doc.passages[i - 1] != p:
            groups.append([])
        groups[-1].append(i)
    return groups


def shuffle_passages(doc: LabeledDocument, seed: int) -> LabeledDocument:
    """Permute interior passages, pinning the first and last in place.

    Documents with three or fewer passages are returned unchanged. The
    identity permutation is resampled once when at least two interior
    passages exist; labels and entities travel with their sentences.
    """
    groups = _passage_groups(doc)
    if len(groups) <= 3:
        return doc
    rng = np.random.default_rng(seed)
    interior = groups[1:-1]
    perm = rng.permutation(len(interior))
    if len(interior) >= 2 and np.array_equal(perm, np.arange(len(interior))):
        perm = rng.permutation(len(interior))
    order = groups[0] + [i for k in perm for i in interior[k]] + groups[-1]
    passages = []
    group_of = {}
    for g, members in enumerate(
        [groups[0]] + [interior[k] for k in perm] + [groups[-1]]
    ):
        for i in members:
            group_of[i] = g
    for i in order:
        passages.append(group_of[i])
    return LabeledDocument(
        id=doc.id + "-shuffled",
        sentences=[doc.sentences[i] for i in order],
        labels=[doc.labels[i] for i in order],
        source="augmented-shuffle",
        passages=passages,
        entities=list(doc.entities) if doc.entities is not None else None,
    )


# ---------------------------------------------------------------------------
# Templates
# ---------------------------------------------------------------------------


@dataclass
class EmailTemplate:
    template_id: str
    sentences: list[str]
    labels: list[int]
    slots: dict[str, list[str]]
    passages: list[int] | None = None


def load_template(path) -> EmailTemplate:
    with open(path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    text = raw.get("text")
    if isinstance(text, str):
        sentences = split_sentences(text).sentences
    elif isinstance(text, list):
        sentences = list(text)
    else:
        raise SpecError("template 'text' must be a string or list of sentences")
    labels = raw.get("labels")
    if not isinstance(labels, list) or len(labels) != len(sentences):
        raise SpecError(f"template needs {len(sentences)} labels, got {labels!r}")
    slots = raw.get("slots", {})
    if not isinstance(slots, dict):
        raise SpecError("template 'slots' must be a map of name -> candidates")
    return EmailTemplate(
        template_id=raw.get("id", "template"),
        sentences=sentences,
        labels=[int(l) for l in labels],
        slots={k: list(v) for k, v in slots.items()},
        passages=raw.get("passages"),
    )


def instantiate_template(template: EmailTemplate, seed: int, n: int,
                         id_prefix: str | None = None) -> list[LabeledDocument]:
    """Fill every slot with one seeded-random candidate per instance."""
    for name, candidates in template.slots.items():
        if not candidates:
            raise EmptyCandidateList(f"slot {name!r} has no candidates")
    rng = np.random.default_rng(seed)
    prefix = id_prefix or template.template_id
    docs = []
    for i in range(n):
        values = {
            name: template.slots[name][int(rng.integers(len(template.slots[name])))]
            for name in sorted(template.slots)
        }
        sentences = []
        for s in template.sentences:
            for name, value in values.items():
                s = s.replace("{" + name + "}", value)
            sentences.append(s)
        docs.append(LabeledDocument(
            id=f"{prefix}-{i:04d}",
            sentences=sentences,
            labels=list(template.labels),
            source="augmented-template",
            passages=list(template.passages) if template.passages is not None else None,
        ))
    return docs


# ---------------------------------------------------------------------------
# Synthetic corpus generator
# ---------------------------------------------------------------------------

PERSONS = ("Anna", "Marco", "Priya", "Tomas", "Yuki", "Elena", "Noah", "Farah")
SURNAMES = ("Keller", "Okafor", "Lindqvist", "Moreau", "Tanaka", "Alvarez")
ORGS = ("Northwind", "Contoso", "Fabrikam", "Acme Group", "Initech")
PLACES = ("the east lounge", "room 4B", "the main office", "the cafe downstairs")
DAYS = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday")
TIMES = ("9am", "10:30", "noon", "2pm", "4:15")
TITLES = ("Director", "Analyst", "Program Lead", "Engineer")
CITIES = ("Seattle", "Lisbon", "Osaka", "Toronto")

SALUTATIONS = ("Hi {P},", "Hello {P},", "Hey {P},", "Dear {P},")

SCHEDULING_SENTENCES = (
    "Please schedule a meeting with {P} on {D}.",
    "Could you schedule a call with {O} for {D} morning?",
    "Let's schedule a quick sync at {L}.",
    "Please schedule time with {P} at {L} next {D}.",
    "We should schedule the kickoff for {T} on {D}.",
)

GOLD_DURATIONS = ("30 minutes", "45 minutes", "60 minutes", "half an hour")
GOLD_DURATION_VALUES = {"30 minutes": 30, "45 minutes": 45, "60 minutes": 60,
                        "half an hour": 30}
DISTRACTOR_DURATIONS = ("90 minutes", "2 hours", "15 mins")
DISTRACTOR_DURATION_VALUES = {"90 minutes": 90, "2 hours": 120, "15 mins": 15}

GOLD_TIMEZONES = ("EST", "CST", "MST")
DISTRACTOR_TIMEZONES = ("PST", "GMT", "CET")

FILLER_SENTENCES = (
    "Hope you are doing well.",
    "Thanks for setting this up.",
    "Look forward to meeting you.",
    "The slides from last week are attached.",
    "No other updates from my side.",
    "Let me know if anything changes.",
)

CLOSINGS = ("Thanks,", "Best,", "Cheers,", "Regards,")

NEGATIVE_OFFICE_SENTENCES = (
    "The quarterly numbers look strong.",
    "Please review the attached contract before Friday.",
    "The server migration finished overnight.",
    "Legal signed off on the revised terms.",
    "Our vendor shipped the replacement parts.",
    "Headcount planning closes at the end of the month.",
    "The audit committee published its findings.",
    "Payroll processed without any issues this cycle.",
    "The draft policy is circulating for comments.",
    "Finance flagged two line items in the forecast.",
    "The warehouse inventory matched the ledger.",
    "Training materials were uploaded to the shared drive.",
)

NEGATIVE_REVIEW_SENTENCES = (
    "The pasta was absolutely delicious.",
    "Terrible acting ruined an otherwise decent film.",
    "Service was slow but the staff were friendly.",
    "Would not recommend this place to anyone.",
    "The plot dragged on forever without payoff.",
    "Best burger I have had in years.",
    "The soundtrack carried the entire movie.",
    "Portions were tiny for the price.",
    "A predictable ending spoiled the suspense.",
    "The patio seating was cramped and noisy.",
)

CONTEXT_TRIGGER_SENTENCES = (
    "the {X} starts soon",
    "please confirm the {X}",
    "{X} notes are ready",
    "we owe them a {X}",
    "finalize the {X} checklist",
)

CONTEXT_CUE_SENTENCES = (
    "the {Y} is green",
    "{Y} checks passed",
    "our {Y} needs another pass",
    "watch the {Y} dashboard",
)

CONTEXT_FILLER_SENTENCES = (
    "the weather is mild today",
    "lunch options were limited",
    "the printer jammed again",
    "someone left a jacket here",
    "the elevator music changed",
    "new carpets arrived upstairs",
)


@dataclass
class GenSpec:
    """Counts and knobs for :func:`build_synthetic_corpus`."""

    scheduling: int = 0
    negatives: int = 0
    review_negatives: int = 0
    shuffled: int = 0
    context_docs: int = 0
    context_cue_rate: float = 0.5
    context_trigger: str = "handoff"
    context_cue: str = "pipeline"
    plant_entities: bool = False
    with_signatures: bool = True
    fractions: tuple[float, float, float] = (0.81, 0.09, 0.10)
    id_prefix: str = "syn"

    @classmethod
    def from_json(cls, path) -> "GenSpec":
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise SpecError(f"unknown generator spec keys: {sorted(unknown)}")
        if "fractions" in raw:
            raw["fractions"] = tuple(raw["fractions"])
        try:
            return cls(**raw)
        except TypeError as exc:
            raise SpecError(str(exc)) from exc


@dataclass
class SyntheticCorpus:
    split: CorpusSplit
    docs: list[LabeledDocument]
    expected: dict
    gold: dict[str, list[dict]] = field(default_factory=dict)
    distractors: dict[str, list[dict]] = field(default_factory=dict)


def _phone(rng: np.random.Generator, gold: bool) -> tuple[str, str]:
    area = rng.integers(200, 990)
    mid = rng.integers(100, 999)
    last = rng.integers(1000, 9999)
    if gold:
        return f"+1 {area}-{mid}-{last}", f"1{area}{mid}{last}"
    return f"({area}) {mid}-{last}", f"{area}{mid}{last}"


def _choice(rng: np.random.Generator, pool):
    return pool[int(rng.integers(len(pool)))]


def _scheduling_doc(rng: np.random.Generator, doc_id: str, plant: bool,
                    with_signature: bool) -> tuple[LabeledDocument, list[dict], list[dict]]:
    person = _choice(rng, PERSONS)
    sentences: list[str] = []
    labels: list[int] = []
    passages: list[int] = []
    gold: list[dict] = []
    distractors: list[dict] = []

    def emit(text: str, label: int, passage: int):
        sentences.append(text)
        labels.append(label)
        passages.append(passage)

    emit(_choice(rng, SALUTATIONS).replace("{P}", person), 0, 0)

    def fill(t: str) -> str:
        return (t.replace("{P}", _choice(rng, PERSONS))
                 .replace("{O}", _choice(rng, ORGS))
                 .replace("{L}", _choice(rng, PLACES))
                 .replace("{D}", _choice(rng, DAYS))
                 .replace("{T}", _choice(rng, TIMES)))

    body_parts: list[list[tuple[str, int]]] = []
    n_body = int(rng.integers(2, 4))
    for _ in range(n_body):
        part = [(fill(_choice(rng, SCHEDULING_SENTENCES)), 1)]
        for _ in range(int(rng.integers(0, 3))):
            part.append((_choice(rng, FILLER_SENTENCES), 0))
        body_parts.append(part)

    if plant:
        dur = _choice(rng, GOLD_DURATIONS)
        gold.append({"kind": "duration", "value": GOLD_DURATION_VALUES[dur]})
        body_parts[0].append(
            (f"Can we schedule the discussion for {dur}?", 1))
        phone_text, phone_norm = _phone(rng, gold=True)
        gold.append({"kind": "phone", "value": phone_norm})
        body_parts[int(rng.integers(n_body))].append(
            (f"When you schedule the call, use my number {phone_text}.", 1))
        tz = _choice(rng, GOLD_TIMEZONES)
        gold.append({"kind": "timezone", "value": tz})
        body_parts[int(rng.integers(n_body))].append(
            (f"If you schedule it for {_choice(rng, DAYS)}, note that I am in {tz}.", 1))
        d_dur = _choice(rng, DISTRACTOR_DURATIONS)
        distractors.append({"kind": "duration",
                            "value": DISTRACTOR_DURATION_VALUES[d_dur]})
        body_parts[int(rng.integers(n_body))].append(
            (f"The demo ran for {d_dur} yesterday.", 0))

    passage_no = 1
    for part in body_parts:
        for text, label in part:
            emit(text, label, passage_no)
        passage_no += 1

    emit(_choice(rng, CLOSINGS), 0, passage_no)
    if with_signature:
        full_name = f"{person} {_choice(rng, SURNAMES)}"
        emit(full_name, 0, passage_no)
        emit(f"{_choice(rng, TITLES)}, {_choice(rng, ORGS)}", 0, passage_no)
        d_phone_text, d_phone_norm = _phone(rng, gold=False)
        emit(f"Ph: {d_phone_text}", 0, passage_no)
        d_tz = _choice(rng, DISTRACTOR_TIMEZONES)
        emit(f"Based in {_choice(rng, CITIES)} ({d_tz})", 0, passage_no)
        if plant:
            distractors.append({"kind": "phone", "value": d_phone_norm})
            distractors.append({"kind": "timezone", "value": d_tz})

    doc = LabeledDocument(
        id=doc_id, sentences=sentences, labels=labels,
        source="internal-style", passages=passages,
        entities=gold if gold else None,
    )
    return doc, gold, distractors


def _negative_doc(rng: np.random.Generator, doc_id: str, pool, source: str) -> LabeledDocument:
    m = int(rng.integers(2, 6))
    sentences = [_choice(rng, pool) for _ in range(m)]
    return LabeledDocument(
        id=doc_id, sentences=sentences, labels=[0] * m,
        source=source, passages=[0] * m,
    )


def _context_doc(rng: np.random.Generator, doc_id: str, spec: GenSpec) -> LabeledDocument:
    trigger, cue = spec.context_trigger, spec.context_cue
    m = int(rng.integers(3, 7))
    slots: list[str | None] = [None] * m
    n_x = 1 if rng.random() >= 0.35 else 2
    positions = sorted(rng.choice(m, size=min(n_x, m), replace=False).tolist())
    for pos in positions:
        slots[pos] = _choice(rng, CONTEXT_TRIGGER_SENTENCES).replace("{X}", trigger)
        cued = rng.random() < spec.context_cue_rate
        if cued and pos >= 1 and slots[pos - 1] is None:
            slots[pos - 1] = _choice(rng, CONTEXT_CUE_SENTENCES).replace("{Y}", cue)
    for i in range(m):
        if slots[i] is None:
            nxt_is_trigger = i + 1 < m and slots[i + 1] is not None and trigger in slots[i + 1]
            if rng.random() < 0.15 and not nxt_is_trigger:
                slots[i] = _choice(rng, CONTEXT_CUE_SENTENCES).replace("{Y}", cue)
            else:
                slots[i] = _choice(rng, CONTEXT_FILLER_SENTENCES)
    labels = []
    for i, text in enumerate(slots):
        relevant = trigger in text and i > 0 and cue in slots[i - 1]
        labels.append(1 if relevant else 0)
    return LabeledDocument(
        id=doc_id, sentences=list(slots), labels=labels,
        source="internal-style", passages=[0] * m,
    )


def build_synthetic_corpus(spec: GenSpec, seed: int) -> SyntheticCorpus:
    """Deterministic corpus with exact bookkeeping of its expected statistics."""
    if spec.shuffled and not spec.scheduling:
        raise SpecError("shuffled variants require scheduling documents")
    if min(spec.scheduling, spec.negatives, spec.review_negatives,
           spec.shuffled, spec.context_docs) < 0:
        raise SpecError("document counts must be non-negative")
    rng = np.random.default_rng(seed)
    prefix = spec.id_prefix
    docs: list[LabeledDocument] = []
    gold: dict[str, list[dict]] = {}
    distractors: dict[str, list[dict]] = {}

    scheduling_docs = []
    for i in range(spec.scheduling):
        doc, g, d = _scheduling_doc(rng, f"{prefix}-sched-{i:05d}",
                                    spec.plant_entities, spec.with_signatures)
        scheduling_docs.append(doc)
        docs.append(doc)
        if g:
            gold[doc.id] = g
        if d:
            distractors[doc.id] = d

    dq = DisqualificationList()
    for i in range(spec.negatives):
        doc = _negative_doc(rng, f"{prefix}-neg-{i:05d}",
                            NEGATIVE_OFFICE_SENTENCES, "negative-enron-style")
        assert not dq.disqualifies(doc.body())
        docs.append(doc)
    for i in range(spec.review_negatives):
        doc = _negative_doc(rng, f"{prefix}-rev-{i:05d}",
                            NEGATIVE_REVIEW_SENTENCES, "negative-review-style")
        assert not dq.disqualifies(doc.body())
        docs.append(doc)

    for i in range(spec.shuffled):
        base = scheduling_docs[int(rng.integers(len(scheduling_docs)))]
        shuffled = shuffle_passages(base, seed=int(rng.integers(2**31)))
        shuffled.id = f"{prefix}-shuf-{i:05d}"
        docs.append(shuffled)
        if base.id in gold:
            gold[shuffled.id] = list(gold[base.id])
            distractors[shuffled.id] = list(distractors[base.id])

    for i in range(spec.context_docs):
        docs.append(_context_doc(rng, f"{prefix}-ctx-{i:05d}", spec))

    n_sent = sum(len(d.sentences) for d in docs)
    n_pos = sum(sum(d.labels) for d in docs)
    expected = {
        "n_docs": len(docs),
        "n_sent": n_sent,
        "n_pos": n_pos,
        "n_neg": n_sent - n_pos,
        "by_source": {},
        "gold_entities": sum(len(v) for v in gold.values()),
    }
    for d in docs:
        expected["by_source"][d.source] = expected["by_source"].get(d.source, 0) + 1

    split = split_corpus(docs, spec.fractions, seed=seed)
    return SyntheticCorpus(split=split, docs=docs, expected=expected,
                           gold=gold, distractors=distractors)


def per_sentence_bayes_ceiling(docs: list[LabeledDocument]) -> float:
    """Best F1 any per-sentence-content rule can reach on these documents.

    Sentences with identical text form one equivalence class; a rule labels
    whole classes. Classes are ranked by positive rate and every prefix
    cutoff is evaluated, which realizes the F1-optimal class assignment.
    """
    classes: dict[str, list[int]] = {}
    for doc in docs:
        for text, label in zip(doc.sentences, doc.labels):
            c = classes.setdefault(text, [0, 0])
            c[0] += label
            c[1] += 1
    ranked = sorted(classes.values(), key=lambda c: (-(c[0] / c[1]), -c[0]))
    total_pos = sum(c[0] for c in ranked)
    best = 0.0
    tp = fp = 0
    for pos, tot in ranked:
        tp += pos
        fp += tot - pos
        fn = total_pos - tp
        if tp:
            f1 = 2 * tp / (2 * tp + fp + fn)
            best = max(best, f1)
    return best
