"""Deployment-side filter: relevance scores in, scoped message out.

Two operating points exist and are never hard-coded at call sites: the
classification threshold (0.5, metrics) and the scoping threshold (0.01,
downstream filtering). Both comparisons are strict.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .textprep import ReplacementMap, SentenceSplitDocument, invert_replacements

CLASSIFY_THRESHOLD = 0.5
SCOPE_THRESHOLD = 0.01


class AlignmentError(ValueError):
    pass


@dataclass
class ScopedMessage:
    indices: list[int]
    text: str
    threshold: float
    actionable: bool

    def to_json(self) -> str:
        return json.dumps({
            "indices": self.indices,
            "text": self.text,
            "threshold": self.threshold,
            "actionable": self.actionable,
        }, sort_keys=True)


def _score_list(scores) -> list[float]:
    return list(getattr(scores, "scores", scores))


def is_actionable(scores, threshold: float = SCOPE_THRESHOLD) -> bool:
    """True iff any sentence scores strictly above the threshold."""
    return any(s > threshold for s in _score_list(scores))


def scope(doc: SentenceSplitDocument, scores,
          rmap: ReplacementMap | None = None,
          threshold: float = SCOPE_THRESHOLD) -> ScopedMessage:
    """Select sentences scoring above the threshold and join them.

    Surviving sentences are joined with single spaces, in document order,
    and their URL/email placeholders are inverted using the entries of the
    surviving sentences only.
    """
    values = _score_list(scores)
    if len(values) != len(doc.sentences):
        raise AlignmentError(
            f"{len(values)} scores for {len(doc.sentences)} sentences"
        )
    indices = [i for i, s in enumerate(values) if s > threshold]
    text = " ".join(doc.sentences[i] for i in indices)
    if rmap is not None and text:
        rmap.assign_sentences(doc)
        text = invert_replacements(text, rmap.for_sentences(indices))
    return ScopedMessage(
        indices=indices,
        text=text,
        threshold=threshold,
        actionable=bool(indices),
    )
