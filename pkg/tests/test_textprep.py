import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scopeit.textprep import (
    EMAIL_TOKEN,
    MOJIBAKE_TABLE,
    URL_TOKEN,
    MalformedPlaceholder,
    SentenceSplitDocument,
    Vocabulary,
    build_word_vocab,
    build_wordpiece_vocab,
    detokenize_wordpieces,
    invert_replacements,
    repair_mojibake,
    replace_urls_emails,
    split_sentences,
    tokenize_document,
    tokenize_wordpiece,
    tokenize_words,
)


class TestMojibake:
    def test_curly_apostrophe(self):
        assert repair_mojibake("donâ€™t") == "don’t"

    def test_identity_on_clean_text(self):
        assert repair_mojibake("hello") == "hello"

    def test_seeded_corruptions_invert(self):
        # Corrupt by encoding UTF-8 and decoding Latin-1; repair must invert.
        originals = [
            "café au lait",
            "“scare quotes”",
            "it’s 5° outside",
            "naïve résumé",
            "wait… what—now?",
            "€100 or £80",
            "señor García",
            "Zürich – Genève",
            "‘ok’",
            "für Übung",
            "crème brûlée",
            "École",
            "niño y niña",
            "à bientôt",
            "smörgåsbord",
            "touché!",
            "© 2020 ®",
            "bullet • point",
            "piñata óptima",
            "façade île",
        ]
        assert len(originals) == 20
        for text in originals:
            corrupted = text.encode("utf-8").decode("latin-1")
            assert corrupted != text
            assert repair_mojibake(corrupted) == text

    def test_table_covers_both_codecs(self):
        latin1 = "’".encode("utf-8").decode("latin-1")
        cp1252 = "’".encode("utf-8").decode("cp1252")
        assert MOJIBAKE_TABLE[latin1] == "’"
        assert MOJIBAKE_TABLE[cp1252] == "’"


class TestReplaceUrlsEmails:
    def test_paper_example_url(self):
        text = "see https://coling2020.org/pages/call_for_papers.html now"
        cleaned, rmap = replace_urls_emails(text)
        assert cleaned == "see URLTOKEN now"
        assert len(rmap.entries) == 1
        assert rmap.entries[0].token == URL_TOKEN
        assert rmap.entries[0].original == "https://coling2020.org/pages/call_for_papers.html"

    def test_empty(self):
        cleaned, rmap = replace_urls_emails("")
        assert cleaned == ""
        assert rmap.entries == []

    def test_trailing_punctuation_stripped(self):
        cleaned, rmap = replace_urls_emails("go to www.example.com.")
        assert cleaned == "go to URLTOKEN."
        assert rmap.entries[0].original == "www.example.com"

    def test_planted_counts(self):
        import random

        rng = random.Random(7)
        words = ["alpha", "beta", "gamma", "delta"]
        for _ in range(25):
            k = rng.randint(0, 4)
            j = rng.randint(0, 4)
            parts = [rng.choice(words) for _ in range(rng.randint(3, 10))]
            for i in range(k):
                parts.insert(rng.randint(0, len(parts)), f"https://site{i}.org/x")
            for i in range(j):
                parts.insert(rng.randint(0, len(parts)), f"user{i}@mail{i}.com")
            cleaned, rmap = replace_urls_emails(" ".join(parts))
            assert cleaned.count(URL_TOKEN) == k
            # EMAILTOKEN contains no URLTOKEN substring, count directly
            assert cleaned.count(EMAIL_TOKEN) == j
            assert rmap.count(URL_TOKEN) == k
            assert rmap.count(EMAIL_TOKEN) == j

    def test_spans_point_at_placeholders(self):
        cleaned, rmap = replace_urls_emails("a@b.co and https://x.yz end")
        for e in rmap.entries:
            assert cleaned[e.start : e.end] == e.token


class TestInvertReplacements:
    def test_round_trip(self):
        text = "Hi, see https://a.b/c?d=1 or mail me@you.org, thanks.\nwww.z.io!"
        cleaned, rmap = replace_urls_emails(text)
        assert invert_replacements(cleaned, rmap) == text

    def test_no_placeholders_identity(self):
        _, rmap = replace_urls_emails("one a@b.co two")
        assert invert_replacements("no placeholders", rmap) == "no placeholders"

    def test_literal_placeholder_round_trip(self):
        text = "the word URLTOKEN appears literally"
        cleaned, rmap = replace_urls_emails(text)
        assert cleaned == text
        assert len(rmap.entries) == 1
        assert invert_replacements(cleaned, rmap) == text

    def test_sentence_filtered_inversion(self):
        text = "Write to first@one.com today.\nCall me at second@two.org"
        cleaned, rmap = replace_urls_emails(text)
        doc = split_sentences(cleaned)
        assert len(doc.sentences) == 2
        rmap.assign_sentences(doc)
        survivor = rmap.for_sentences([1])
        restored = invert_replacements(doc.sentences[1], survivor)
        assert "second@two.org" in restored
        assert "first@one.com" not in restored

    def test_missing_entry_raises(self):
        with pytest.raises(MalformedPlaceholder):
            invert_replacements("x EMAILTOKEN y", replace_urls_emails("plain")[1])

    @given(st.text(alphabet=string.printable, max_size=200))
    @settings(max_examples=200, deadline=None)
    def test_inversion_totality(self, text):
        cleaned, rmap = replace_urls_emails(text)
        assert invert_replacements(cleaned, rmap) == text


class TestSplitSentences:
    def test_email_fixture(self):
        doc = split_sentences("Hi Anna.\nLet's meet Monday. Thanks,\nBob")
        assert doc.sentences == ["Hi Anna.", "Let's meet Monday.", "Thanks,", "Bob"]

    def test_abbreviation_stoplist(self):
        doc = split_sentences("e.g. this stays together.")
        assert doc.sentences == ["e.g. this stays together."]

    def test_honorific(self):
        doc = split_sentences("Dr. Smith will join. Mr. Jones will not.")
        assert doc.sentences == ["Dr. Smith will join.", "Mr. Jones will not."]

    def test_empty(self):
        assert split_sentences("").sentences == []
        assert split_sentences("   \n \n  ").sentences == []

    def test_blank_line_closes_long_line(self):
        text = "this is a very long line without terminal punctuation at all here\n\nNext paragraph."
        doc = split_sentences(text)
        assert doc.sentences[0].endswith("here")
        assert doc.sentences[1] == "Next paragraph."

    def test_hard_wrapped_line_not_split(self):
        text = (
            "I believe the quarterly planning discussion should happen sometime\n"
            "before the end of the month."
        )
        doc = split_sentences(text)
        assert len(doc.sentences) == 1

    def test_reconstruction(self):
        text = "Hi Anna.\nLet's meet Monday. Thanks,\nBob\n\nPS: bring notes."
        doc = split_sentences(text)
        assert doc.reconstruct() == text

    def test_determinism(self):
        text = "One. Two! Three?\nFour"
        assert split_sentences(text).sentences == split_sentences(text).sentences

    def test_from_sentences(self):
        doc = SentenceSplitDocument.from_sentences(["a b", "c"])
        assert doc.text == "a b c"
        assert doc.offsets == [(0, 3), (4, 5)]
        assert doc.reconstruct() == doc.text


def make_vocab(extra, mode="wordpiece"):
    return Vocabulary(["PAD", "UNK", "URLTOKEN", "EMAILTOKEN"] + extra, mode)


class TestWordpiece:
    def test_greedy_decomposition(self):
        vocab = make_vocab(["sched", "##ule", "##d", "##uled"])
        ids = tokenize_wordpiece("scheduled", vocab)
        # longest-match-first: sched + ##uled
        assert [vocab.tokens[i] for i in ids] == ["sched", "##uled"]

    def test_greedy_three_pieces(self):
        vocab = make_vocab(["sched", "##ule", "##d"])
        ids = tokenize_wordpiece("scheduled", vocab)
        assert [vocab.tokens[i] for i in ids] == ["sched", "##ule", "##d"]

    def test_no_decomposition_is_unk(self):
        vocab = make_vocab(["a", "##a"])
        assert tokenize_wordpiece("qqqq", vocab) == [vocab.unk_id]

    def test_placeholder_is_single_token(self):
        vocab = make_vocab(["call", "me"])
        ids = tokenize_wordpiece("call me URLTOKEN", vocab)
        assert vocab.index["URLTOKEN"] in ids

    def test_round_trip_property(self):
        import random

        rng = random.Random(3)
        alphabet = "abcdef"
        pieces = []
        for ch in alphabet:
            pieces.append(ch)
            pieces.append("##" + ch)
        for _ in range(30):
            w = "".join(rng.choice(alphabet) for _ in range(rng.randint(2, 6)))
            pieces.append(w)
        vocab = make_vocab(sorted(set(pieces)))
        for _ in range(100):
            word = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 10)))
            ids = tokenize_wordpiece(word, vocab)
            assert detokenize_wordpieces([vocab.tokens[i] for i in ids]) == word


class TestWordLevel:
    def test_casefold_lookup(self):
        vocab = make_vocab(["schedule", "a", "meeting"], mode="word")
        ids = tokenize_words("Schedule a MEETING", vocab)
        assert ids == [vocab.index["schedule"], vocab.index["a"], vocab.index["meeting"]]

    def test_oov_is_unk(self):
        vocab = make_vocab(["hello"], mode="word")
        assert tokenize_words("zyzzyva", vocab) == [vocab.unk_id]

    def test_top_k_vocab_build(self):
        import random

        rng = random.Random(11)
        types = [f"w{i}" for i in range(300)]
        counts = {t: rng.randint(1, 50) for t in types}
        sentences = []
        for t, c in counts.items():
            sentences.extend([t] * c)
        rng.shuffle(sentences)
        vocab = build_word_vocab(sentences, size=100)
        expected = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:100]
        assert set(vocab.tokens[4:]) == {t for t, _ in expected}
        assert len(vocab) == 104

    def test_reserved_survive_lowercasing(self):
        vocab = make_vocab(["x"], mode="word")
        ids = tokenize_words("URLTOKEN x", vocab)
        assert ids[0] == vocab.index["URLTOKEN"]


class TestVocabulary:
    def test_reserved_required(self):
        with pytest.raises(ValueError):
            Vocabulary(["UNK", "PAD", "URLTOKEN", "EMAILTOKEN"], "word")

    def test_file_round_trip(self, tmp_path):
        vocab = make_vocab(["alpha", "##beta"])
        p = tmp_path / "vocab.txt"
        vocab.save(p)
        loaded = Vocabulary.from_file(p, "wordpiece")
        assert loaded.tokens == vocab.tokens
        assert loaded.vocab_id == vocab.vocab_id

    def test_wordpiece_builder_covers_training_words(self):
        sentences = ["please schedule the sync", "the sync is tomorrow"]
        vocab = build_wordpiece_vocab(sentences, size=500)
        for sent in sentences:
            ids = tokenize_wordpiece(sent, vocab)
            assert vocab.unk_id not in ids


class TestTokenizeDocument:
    def test_truncation_flag(self):
        vocab = make_vocab(["a"], mode="word")
        doc = tokenize_document("d1", ["a " * 40, "a a"], vocab, max_tokens=10)
        assert doc.truncated == [True, False]
        assert doc.sentence_lengths == [10, 2]

    def test_lengths_at_least_one(self):
        vocab = make_vocab(["a"], mode="word")
        doc = tokenize_document("d1", ["zzz"], vocab)
        assert doc.sentence_lengths == [1]

    def test_same_vocab_same_ids(self, tmp_path):
        vocab = make_vocab(["hello", "world"], mode="word")
        p = tmp_path / "v.txt"
        vocab.save(p)
        reloaded = Vocabulary.from_file(p, "word")
        a = tokenize_document("d", ["hello world"], vocab)
        b = tokenize_document("d", ["hello world"], reloaded)
        assert a.sentence_tokens == b.sentence_tokens
        assert a.vocab_id == b.vocab_id


class TestSplitterProperties:
    def test_abbreviation_with_leading_paren(self):
        doc = split_sentences("(e.g. This stays together.)")
        assert len(doc.sentences) == 1

    @given(st.text(alphabet=string.printable + "éü’", max_size=300))
    @settings(max_examples=200, deadline=None)
    def test_reconstruction_is_total(self, text):
        assert split_sentences(text).reconstruct() == text


def test_top_10000_vocab_at_full_size():
    # frequency-count oracle at the actual default cutoff
    import random

    rng = random.Random(2)
    counts = {f"tok{i:05d}": rng.randint(1, 400) for i in range(12000)}
    sentences = (f"{t} " * c for t, c in counts.items())
    vocab = build_word_vocab(sentences, size=10000)
    expected = {t for t, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:10000]}
    assert len(vocab) == 10004
    assert set(vocab.tokens[4:]) == expected
