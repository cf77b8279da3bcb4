"""Deterministic, invertible text normalization, sentence splitting and tokenization.

Everything in this module is a pure function: no global state, no external
NLP toolkits, identical output across runs and platforms.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field, replace as dc_replace

PAD_TOKEN = "PAD"
UNK_TOKEN = "UNK"
URL_TOKEN = "URLTOKEN"
EMAIL_TOKEN = "EMAILTOKEN"
RESERVED_TOKENS = (PAD_TOKEN, UNK_TOKEN, URL_TOKEN, EMAIL_TOKEN)

CONTINUATION_PREFIX = "##"

#: Exact substitution patterns. Trailing sentence punctuation is stripped from
#: URL matches after the fact.
URL_PATTERN = re.compile(r"(https?://[^\s]+|www\.[^\s]+)")
EMAIL_PATTERN = re.compile(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}")
_URL_TRAILING = ".,;:!?)"

_PLACEHOLDER_PATTERN = re.compile(r"\b(URLTOKEN|EMAILTOKEN)\b")

MAX_TOKENS_PER_SENTENCE = 128

#: Lines at most this long (stripped) form their own sentence when newline
#: terminated; longer lines are treated as hard-wrapped continuations.
SHORT_LINE_MAX = 45

ABBREVIATIONS = ("mr.", "dr.", "e.g.", "i.e.", "etc.", "vs.")


class MalformedPlaceholder(ValueError):
    """A placeholder token in the text has no remaining replacement entry."""


# ---------------------------------------------------------------------------
# Mojibake repair
# ---------------------------------------------------------------------------

MOJIBAKE_TABLE_VERSION = 1

# Characters whose UTF-8 byte sequences commonly get re-decoded with a
# single-byte codec. Both the Latin-1 and the Windows-1252 renderings of each
# are mapped back to the intended character.
_MOJIBAKE_INTENDED = (
    "‘’“”"  # curly quotes
    "–—…•™"  # dashes, ellipsis, bullet, trademark
    "€£°©® "  # currency/symbols, nbsp
    "àáâãäåç"
    "èéêëìíîï"
    "ñòóôõö"
    "ùúûüýÿ"
    "ÀÁÄÇÉÍÑÖÓÜÚß"
)


def _build_mojibake_table() -> dict[str, str]:
    table: dict[str, str] = {}
    for ch in _MOJIBAKE_INTENDED:
        raw = ch.encode("utf-8")
        for codec in ("latin-1", "cp1252"):
            try:
                corrupted = raw.decode(codec)
            except UnicodeDecodeError:
                continue
            if corrupted != ch:
                table[corrupted] = ch
    return table


MOJIBAKE_TABLE = _build_mojibake_table()

_MOJIBAKE_PATTERN = re.compile(
    "|".join(re.escape(k) for k in sorted(MOJIBAKE_TABLE, key=len, reverse=True))
)


def repair_mojibake(text: str) -> str:
    """Replace known UTF-8-decoded-as-Latin-1/cp1252 artifacts in one pass."""
    return _MOJIBAKE_PATTERN.sub(lambda m: MOJIBAKE_TABLE[m.group(0)], text)


# ---------------------------------------------------------------------------
# URL / email placeholder substitution
# ---------------------------------------------------------------------------


@dataclass
class Replacement:
    """One placeholder substitution, with its span in the cleaned text."""

    token: str
    original: str
    start: int
    end: int
    sentence_index: int | None = None
    occurrence_in_sentence: int | None = None


@dataclass
class ReplacementMap:
    """Ordered substitutions made by :func:`replace_urls_emails`.

    Spans are character offsets into the cleaned text, non-overlapping and
    strictly increasing. Pre-existing literal placeholder tokens are recorded
    as identity entries so that inversion is total on every input.
    """

    entries: list[Replacement] = field(default_factory=list)

    def count(self, token: str) -> int:
        return sum(1 for e in self.entries if e.token == token)

    def assign_sentences(self, doc: "SentenceSplitDocument") -> None:
        """Attach (sentence index, per-sentence occurrence index) to each entry."""
        per_sentence: dict[int, int] = {}
        for entry in self.entries:
            idx = None
            for i, (s, e) in enumerate(doc.offsets):
                if s <= entry.start and entry.end <= e:
                    idx = i
                    break
            if idx is None:
                # Placeholder fell into inter-sentence whitespace; should not
                # happen for splitter output, but keep the map usable.
                continue
            entry.sentence_index = idx
            entry.occurrence_in_sentence = per_sentence.get(idx, 0)
            per_sentence[idx] = entry.occurrence_in_sentence + 1

    def for_sentences(self, indices) -> "ReplacementMap":
        """Sub-map with only the entries of the surviving sentences, in order.

        Requires :meth:`assign_sentences` to have run. Pairing of survivors is
        preserved because entries keep their per-sentence occurrence order.
        """
        keep = set(indices)
        kept = [
            dc_replace(e)
            for e in self.entries
            if e.sentence_index is not None and e.sentence_index in keep
        ]
        return ReplacementMap(kept)


def replace_urls_emails(text: str) -> tuple[str, ReplacementMap]:
    """Substitute URLs and email addresses with placeholder tokens.

    Returns the cleaned text and a map recording the originals in order of
    occurrence. Literal URLTOKEN/EMAILTOKEN words already present in the
    input map to themselves, keeping inversion byte-exact for any input.
    """
    matches: list[tuple[int, int, str, str]] = []  # (start, end, token, original)
    taken: list[tuple[int, int]] = []

    for m in URL_PATTERN.finditer(text):
        start, end = m.span()
        while end > start and text[end - 1] in _URL_TRAILING:
            end -= 1
        if end > start:
            matches.append((start, end, URL_TOKEN, text[start:end]))
            taken.append((start, end))

    def overlaps(s: int, e: int) -> bool:
        return any(s < te and ts < e for ts, te in taken)

    for m in EMAIL_PATTERN.finditer(text):
        s, e = m.span()
        if not overlaps(s, e):
            matches.append((s, e, EMAIL_TOKEN, m.group(0)))
            taken.append((s, e))

    for m in _PLACEHOLDER_PATTERN.finditer(text):
        s, e = m.span()
        if not overlaps(s, e):
            matches.append((s, e, m.group(0), m.group(0)))
            taken.append((s, e))

    matches.sort(key=lambda t: t[0])

    out: list[str] = []
    entries: list[Replacement] = []
    cursor = 0
    out_len = 0
    for start, end, token, original in matches:
        out.append(text[cursor:start])
        out_len += start - cursor
        entries.append(Replacement(token, original, out_len, out_len + len(token)))
        out.append(token)
        out_len += len(token)
        cursor = end
    out.append(text[cursor:])
    return "".join(out), ReplacementMap(entries)


def invert_replacements(text: str, rmap: ReplacementMap) -> str:
    """Restore originals for every placeholder occurrence in ``text``.

    Placeholders are paired with map entries left to right per token kind;
    unused entries are ignored, so a map restricted via
    :meth:`ReplacementMap.for_sentences` inverts a scoped subset correctly.

    Raises:
        MalformedPlaceholder: a placeholder occurs with no remaining entry.
    """
    queues: dict[str, list[Replacement]] = {URL_TOKEN: [], EMAIL_TOKEN: []}
    for e in rmap.entries:
        queues[e.token].append(e)
    positions = {URL_TOKEN: 0, EMAIL_TOKEN: 0}

    def restore(m: re.Match) -> str:
        token = m.group(0)
        q = queues[token]
        i = positions[token]
        if i >= len(q):
            raise MalformedPlaceholder(
                f"no replacement entry left for occurrence {i + 1} of {token}"
            )
        positions[token] = i + 1
        return q[i].original

    return _PLACEHOLDER_PATTERN.sub(restore, text)


# ---------------------------------------------------------------------------
# Sentence splitting
# ---------------------------------------------------------------------------


@dataclass
class SentenceSplitDocument:
    """Ordered sentences plus their character spans in the source text."""

    text: str
    sentences: list[str]
    offsets: list[tuple[int, int]]

    @classmethod
    def from_sentences(cls, sentences: list[str]) -> "SentenceSplitDocument":
        """Wrap pre-segmented sentences, synthesizing single-space joins."""
        offsets = []
        pos = 0
        for i, s in enumerate(sentences):
            if i:
                pos += 1
            offsets.append((pos, pos + len(s)))
            pos += len(s)
        return cls(" ".join(sentences), list(sentences), offsets)

    def reconstruct(self) -> str:
        """Reassemble the source text from sentences and recorded gaps."""
        parts = []
        pos = 0
        for (s, e), sent in zip(self.offsets, self.sentences):
            parts.append(self.text[pos:s])
            parts.append(sent)
            pos = e
        parts.append(self.text[pos:])
        return "".join(parts)


def _abbreviation_before(text: str, punct_index: int) -> bool:
    w = punct_index
    while w > 0 and not text[w - 1].isspace():
        w -= 1
    word = text[w : punct_index + 1].lstrip("\"'([{")
    return word.lower() in ABBREVIATIONS


def split_sentences(text: str) -> SentenceSplitDocument:
    """Deterministic rule-based sentence segmentation.

    Splits after terminal punctuation followed by whitespace and a capital
    (subject to the abbreviation stop-list), at the end of short
    newline-terminated lines, and at blank lines.
    """
    n = len(text)
    cuts: set[int] = set()
    line_start = 0
    for i, c in enumerate(text):
        if c in ".!?":
            if _abbreviation_before(text, i):
                continue
            j = i + 1
            while j < n and text[j] in "\"')]":
                j += 1
            if j < n and text[j].isspace():
                k = j
                while k < n and text[k].isspace():
                    k += 1
                if k < n and text[k].isupper():
                    cuts.add(j)
        elif c == "\n":
            line = text[line_start:i].strip()
            if line and len(line) <= SHORT_LINE_MAX:
                cuts.add(i)
            else:
                # A blank line always closes the sentence before it.
                nl = text.find("\n", i + 1)
                nxt = text[i + 1 : nl if nl != -1 else n]
                if line and not nxt.strip():
                    cuts.add(i)
            line_start = i + 1

    sentences: list[str] = []
    offsets: list[tuple[int, int]] = []
    prev = 0
    for cut in sorted(cuts | {n}):
        segment = text[prev:cut]
        stripped = segment.strip()
        if stripped:
            start = prev + (len(segment) - len(segment.lstrip()))
            offsets.append((start, start + len(stripped)))
            sentences.append(stripped)
        prev = cut
    return SentenceSplitDocument(text, sentences, offsets)


# ---------------------------------------------------------------------------
# Vocabularies and tokenization
# ---------------------------------------------------------------------------


class Vocabulary:
    """Immutable token-to-id map with reserved tokens on ids 0..3.

    ``mode`` is ``"wordpiece"`` (greedy longest-match subwords, case kept) or
    ``"word"`` (lowercased whole-word lookup).
    """

    def __init__(self, tokens: list[str], mode: str):
        if mode not in ("wordpiece", "word"):
            raise ValueError(f"unknown vocabulary mode: {mode!r}")
        if tuple(tokens[:4]) != RESERVED_TOKENS:
            raise ValueError("vocabulary must start with PAD, UNK, URLTOKEN, EMAILTOKEN")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary contains duplicate tokens")
        self.tokens = list(tokens)
        self.index = {t: i for i, t in enumerate(tokens)}
        self.mode = mode
        self.vocab_id = hashlib.sha256(self.to_bytes()).hexdigest()

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def unk_id(self) -> int:
        return 1

    def to_bytes(self) -> bytes:
        return ("\n".join(self.tokens) + "\n").encode("utf-8")

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @classmethod
    def from_file(cls, path, mode: str) -> "Vocabulary":
        with open(path, "r", encoding="utf-8") as f:
            tokens = [line.rstrip("\n") for line in f]
        while tokens and tokens[-1] == "":
            tokens.pop()
        return cls(tokens, mode)


def _split_words(text: str) -> list[str]:
    """Whitespace split, then peel punctuation into single-char tokens."""
    words: list[str] = []
    for chunk in text.split():
        current = []
        for ch in chunk:
            if ch.isalnum() or ch == "_":
                current.append(ch)
            else:
                if current:
                    words.append("".join(current))
                    current = []
                words.append(ch)
        if current:
            words.append("".join(current))
    return words


def build_word_vocab(sentences, size: int = 10000) -> Vocabulary:
    """Word-level vocabulary of the ``size`` most frequent lowercased tokens."""
    counts: dict[str, int] = {}
    for sent in sentences:
        for w in _split_words(sent):
            if w in RESERVED_TOKENS:
                continue
            w = w.lower()
            counts[w] = counts.get(w, 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    tokens = list(RESERVED_TOKENS) + [w for w, _ in ranked[:size]]
    return Vocabulary(tokens, "word")


def build_wordpiece_vocab(sentences, size: int = 4000) -> Vocabulary:
    """Small wordpiece vocabulary: frequent whole words plus character pieces.

    Single characters (and their continuation forms) guarantee that every
    word seen in training decomposes without UNK.
    """
    word_counts: dict[str, int] = {}
    chars: set[str] = set()
    for sent in sentences:
        for w in _split_words(sent):
            if w in RESERVED_TOKENS:
                continue
            word_counts[w] = word_counts.get(w, 0) + 1
            chars.update(w)
    pieces: list[str] = []
    for ch in sorted(chars):
        pieces.append(ch)
        pieces.append(CONTINUATION_PREFIX + ch)
    ranked = sorted(word_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    budget = max(0, size - len(pieces))
    whole = [w for w, _ in ranked[:budget] if len(w) > 1]
    tokens = list(RESERVED_TOKENS) + whole + [p for p in pieces if p not in RESERVED_TOKENS]
    return Vocabulary(tokens, "wordpiece")


def tokenize_wordpiece(sentence: str, vocab: Vocabulary) -> list[int]:
    """Greedy longest-match-first wordpiece decomposition of each word."""
    if vocab.mode != "wordpiece":
        raise ValueError("vocabulary is not in wordpiece mode")
    ids: list[int] = []
    for word in _split_words(sentence):
        chars = word
        start = 0
        pieces: list[int] = []
        bad = False
        while start < len(chars):
            end = len(chars)
            found = None
            while start < end:
                sub = chars[start:end]
                if start > 0:
                    sub = CONTINUATION_PREFIX + sub
                if sub in vocab.index:
                    found = vocab.index[sub]
                    break
                end -= 1
            if found is None:
                bad = True
                break
            pieces.append(found)
            start = end
        if bad:
            ids.append(vocab.unk_id)
        else:
            ids.extend(pieces)
    return ids


def tokenize_words(sentence: str, vocab: Vocabulary) -> list[int]:
    """Lowercased word-level lookup; out-of-vocabulary words map to UNK."""
    if vocab.mode != "word":
        raise ValueError("vocabulary is not in word mode")
    ids = []
    for w in _split_words(sentence):
        if w in RESERVED_TOKENS:
            ids.append(vocab.index[w])
            continue
        ids.append(vocab.index.get(w.lower(), vocab.unk_id))
    return ids


def detokenize_wordpieces(pieces: list[str]) -> str:
    """Reference reassembly: strip continuation prefixes, concatenate."""
    out = []
    for p in pieces:
        out.append(p[len(CONTINUATION_PREFIX):] if p.startswith(CONTINUATION_PREFIX) else p)
    return "".join(out)


@dataclass
class TokenizedDocument:
    """Per-sentence token ids, lengths, and truncation flags."""

    doc_id: str
    sentence_tokens: list[list[int]]
    sentence_lengths: list[int]
    vocab_id: str
    truncated: list[bool]

    @property
    def num_sentences(self) -> int:
        return len(self.sentence_tokens)


def tokenize_document(
    doc_id: str,
    sentences: list[str],
    vocab: Vocabulary,
    max_tokens: int = MAX_TOKENS_PER_SENTENCE,
) -> TokenizedDocument:
    """Tokenize each sentence with the vocabulary's mode, truncating with a flag."""
    tokenize = tokenize_wordpiece if vocab.mode == "wordpiece" else tokenize_words
    all_tokens: list[list[int]] = []
    truncated: list[bool] = []
    for sent in sentences:
        ids = tokenize(sent, vocab)
        if not ids:
            ids = [vocab.unk_id]
        flag = len(ids) > max_tokens
        if flag:
            ids = ids[:max_tokens]
        all_tokens.append(ids)
        truncated.append(flag)
    return TokenizedDocument(
        doc_id=doc_id,
        sentence_tokens=all_tokens,
        sentence_lengths=[len(t) for t in all_tokens],
        vocab_id=vocab.vocab_id,
        truncated=truncated,
    )
