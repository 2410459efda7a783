from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexst.corpus import UNK_ID, Document
from lexst.lexknowledge import (
    ACTIONS,
    Action,
    AugmentConfig,
    KBError,
    LexicalKB,
    Relation,
    augment_example,
    augment_many,
    load_kb,
    related_words,
)

from conftest import make_doc, vocab_of

KB_TEXT = """# toy knowledge base
good\tsynonym\tfine
dog\thypernym\tanimal
hot\tantonym\tcold
good\tantonym\tbad
bad\tantonym\tpoor
"""


@pytest.fixture
def kb(tmp_path):
    path = tmp_path / "kb.tsv"
    path.write_text(KB_TEXT, encoding="utf-8")
    return load_kb(path)


def test_load_and_materialize(kb):
    assert "fine" in kb.related("good", Relation.SYNONYM)
    assert "good" in kb.related("fine", Relation.SYNONYM)
    assert "dog" in kb.related("animal", Relation.HYPONYM)
    assert "hot" in kb.related("cold", Relation.ANTONYM)


def test_antonym_of_antonym_excludes_self(kb):
    assert related_words(kb, "good", Action.ANTONYM_OF_ANTONYM) == {"poor"}
    assert related_words(kb, "hot", Action.ANTONYM_OF_ANTONYM) == set()


def test_absent_word_and_no_self_synonym(kb):
    assert related_words(kb, "zebra", Action.SYNONYM) == set()
    kb.add("same", Relation.SYNONYM, "same")
    assert "same" not in related_words(kb, "same", Action.SYNONYM)


def test_plain_antonym_is_not_an_action():
    assert {a.value for a in ACTIONS} == {"synonym", "hypernym", "hyponym", "antonym_of_antonym"}


@pytest.mark.parametrize(
    "line, msg",
    [("good\tsynonym", "expected"), ("good\tcousin\tfine", "unknown relation"), ("a\t\tb", "expected")],
)
def test_malformed_kb_lines(tmp_path, line, msg):
    path = tmp_path / "kb.tsv"
    path.write_text("ok\tsynonym\tfine\n" + line + "\n", encoding="utf-8")
    with pytest.raises(KBError, match=f":2: {msg}"):
        load_kb(path)


def test_kb_save_roundtrip(kb, tmp_path):
    kb.save(tmp_path / "out.tsv")
    again = load_kb(tmp_path / "out.tsv")
    assert list(again.edges()) == list(kb.edges())


def test_single_eligible_token_replaced():
    kb = LexicalKB()
    kb.add("great", Relation.SYNONYM, "superb")
    doc = Document.from_words(["great", "film"])
    [(out, label)] = augment_example(kb, doc, 1, AugmentConfig(replace_fraction=1.0))
    assert out.token_strings == ("superb", "film") and label == 1


def test_no_kb_tokens_gives_copies():
    doc = Document.from_words(["plain", "text"])
    out = augment_example(LexicalKB(), doc, 0, AugmentConfig(copies_per_example=3))
    assert out == [(doc, 0)] * 3


def test_ids_follow_vocab():
    kb = LexicalKB()
    kb.add("great", Relation.SYNONYM, "superb")
    vocab = vocab_of(["great", "superb", "film"])
    doc = make_doc(["great", "film"], vocab)
    [(out, _)] = augment_example(kb, doc, 0, AugmentConfig(replace_fraction=1.0), vocab)
    assert out.tokens == (vocab.id("superb"), vocab.id("film"))
    [(out, _)] = augment_example(kb, doc, 0, AugmentConfig(replace_fraction=1.0))
    assert out.tokens[0] == UNK_ID


def test_action_choice_is_uniform_over_available_actions():
    kb = LexicalKB()
    kb.add("great", Relation.SYNONYM, "superb")
    kb.add("great", Relation.SYNONYM, "fine")
    kb.add("great", Relation.ANTONYM, "awful")
    kb.add("awful", Relation.ANTONYM, "grand")
    kb.add("awful", Relation.ANTONYM, "fab")
    doc = Document.from_words(["great"])
    counts = Counter()
    for seed in range(1000):
        [(out, _)] = augment_example(kb, doc, 0, AugmentConfig(replace_fraction=1.0, seed=seed))
        word = out.token_strings[0]
        counts["synonym" if word in ("superb", "fine") else "aoa"] += 1
    assert set(counts) == {"synonym", "aoa"}
    assert all(450 <= v <= 550 for v in counts.values())


def _random_kb(rng, words):
    kb = LexicalKB()
    for _ in range(40):
        a, b = rng.choice(words, 2, replace=False)
        kb.add(str(a), list(Relation)[rng.integers(4)], str(b))
    return kb


@settings(max_examples=100, deadline=None)
@given(
    st.integers(0, 10_000),
    st.lists(st.integers(0, 14), min_size=1, max_size=12),
    st.floats(0.05, 1.0),
    st.integers(0, 3),
)
def test_augmentation_safety(seed, ids, fraction, label):
    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(15)]
    kb = _random_kb(rng, words)
    doc = Document.from_words([words[i] for i in ids])
    cfg = AugmentConfig(replace_fraction=fraction, copies_per_example=2, seed=seed)
    out = augment_example(kb, doc, label, cfg)
    assert out == augment_example(kb, doc, label, cfg)
    for new, y in out:
        assert y == label
        assert len(new.token_strings) == len(doc.token_strings)
        for old_w, new_w in zip(doc.token_strings, new.token_strings):
            if old_w != new_w:
                assert any(new_w in related_words(kb, old_w, a) for a in ACTIONS)
    for w in words:
        assert w not in related_words(kb, w, Action.ANTONYM_OF_ANTONYM)


def test_replacement_count_is_ceil_of_fraction():
    kb = LexicalKB()
    for w in "abcde":
        kb.add(w, Relation.SYNONYM, w + w)
    doc = Document.from_words(list("abcde") + ["x"])
    [(out, _)] = augment_example(kb, doc, 0, AugmentConfig(replace_fraction=0.3))
    changed = sum(a != b for a, b in zip(doc.token_strings, out.token_strings))
    assert changed == 2


def test_augment_many_is_order_stable():
    kb = LexicalKB()
    kb.add("good", Relation.SYNONYM, "fine")
    pairs = [(Document.from_words(["good", "x"]), 0), (Document.from_words(["y"]), 1)]
    cfg = AugmentConfig(replace_fraction=1.0)
    assert augment_many(kb, pairs, cfg, stream=3) == augment_many(kb, pairs, cfg, stream=3)
    assert [y for _, y in augment_many(kb, pairs, cfg)] == [0, 1]


def test_empty_document_rejected():
    with pytest.raises(ValueError):
        augment_example(LexicalKB(), Document.from_words([]), 0, AugmentConfig())
