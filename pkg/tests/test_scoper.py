import json

import numpy as np
import pytest

from scopeit.scoper import (
    CLASSIFY_THRESHOLD,
    SCOPE_THRESHOLD,
    AlignmentError,
    ScopedMessage,
    is_actionable,
    scope,
)
from scopeit.textprep import SentenceSplitDocument, replace_urls_emails, split_sentences


class TestScope:
    def doc(self, sentences):
        return SentenceSplitDocument.from_sentences(sentences)

    def test_threshold_selection(self):
        msg = scope(self.doc(["a", "b", "c"]), [0.9, 0.005, 0.02])
        assert msg.indices == [0, 2]
        assert msg.text == "a c"
        assert msg.actionable

    def test_all_below_threshold(self):
        msg = scope(self.doc(["a", "b"]), [0.001, 0.01])
        assert msg.indices == []
        assert msg.text == ""
        assert not msg.actionable

    def test_strict_inequality(self):
        msg = scope(self.doc(["a"]), [SCOPE_THRESHOLD])
        assert msg.indices == []

    def test_alignment_error(self):
        with pytest.raises(AlignmentError):
            scope(self.doc(["a", "b"]), [0.5])

    def test_filter_then_join_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            m = int(rng.integers(1, 8))
            sentences = [f"s{i}" for i in range(m)]
            scores = rng.uniform(0, 0.05, size=m).tolist()
            threshold = float(rng.uniform(0, 0.05))
            msg = scope(self.doc(sentences), scores, threshold=threshold)
            want = " ".join(s for s, v in zip(sentences, scores) if v > threshold)
            assert msg.text == want

    def test_placeholder_inversion_of_survivors(self):
        raw = "Mail a@b.co now.\nPing c@d.org later."
        cleaned, rmap = replace_urls_emails(raw)
        doc = split_sentences(cleaned)
        assert len(doc.sentences) == 2
        msg = scope(doc, [0.0, 0.9], rmap)
        assert msg.text == "Ping c@d.org later."

    def test_monotonic_in_threshold(self):
        rng = np.random.default_rng(5)
        sentences = [f"s{i}" for i in range(10)]
        scores = rng.uniform(0, 1, size=10).tolist()
        prev = None
        for threshold in np.linspace(0, 1, 100):
            selected = set(scope(self.doc(sentences), scores, threshold=float(threshold)).indices)
            if prev is not None:
                assert selected.issubset(prev)
            prev = selected

    def test_idempotence(self):
        rng = np.random.default_rng(6)
        sentences = [f"s{i}" for i in range(6)]
        scores = rng.uniform(0, 1, size=6).tolist()
        first = scope(self.doc(sentences), scores, threshold=0.3)
        survivors = [sentences[i] for i in first.indices]
        again = scope(self.doc(survivors), [scores[i] for i in first.indices], threshold=0.3)
        assert [survivors[i] for i in again.indices] == survivors

    def test_json_serialization(self):
        msg = ScopedMessage(indices=[1], text="x", threshold=0.01, actionable=True)
        raw = json.loads(msg.to_json())
        assert raw == {"indices": [1], "text": "x", "threshold": 0.01, "actionable": True}


class TestIsActionable:
    def test_single_positive(self):
        assert is_actionable([0.5])

    def test_empty(self):
        assert not is_actionable([])

    def test_agreement_with_any_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            scores = rng.uniform(0, 0.03, size=rng.integers(0, 6)).tolist()
            assert is_actionable(scores) == any(s > SCOPE_THRESHOLD for s in scores)

    def test_actionable_iff_selection_nonempty(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            m = int(rng.integers(1, 6))
            scores = rng.uniform(0, 0.05, size=m).tolist()
            doc = SentenceSplitDocument.from_sentences([f"s{i}" for i in range(m)])
            msg = scope(doc, scores)
            assert msg.actionable == bool(msg.indices) == is_actionable(scores)


def test_thresholds_are_named_constants():
    assert CLASSIFY_THRESHOLD == 0.5
    assert SCOPE_THRESHOLD == 0.01
