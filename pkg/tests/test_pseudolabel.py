import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexst.corpus import Document
from lexst.lexicon import Lexicon, LexiconEntry
from lexst.pseudolabel import (
    ZERO,
    PseudoLabel,
    SelectionConfig,
    candidate_class,
    entropy_gate,
    generate_pseudo_labels,
    one_hot,
)


def _lex(*classes):
    entries = tuple(tuple(LexiconEntry(w, 1, 0.5) for w in ws) for ws in classes)
    return Lexicon(tuple(f"c{i}" for i in range(len(classes))), entries)


def _fixed(probs):
    table = np.asarray(probs, dtype=float)
    return lambda docs: table[: len(docs)]


def oracle_select(p, lambdas, matches, tau):
    """Literal energy comparison: E(one-hot) = -log(p/lambda) against E(0) = 0."""
    ratios = [p[c] / lambdas[c] for c in range(len(p))]
    best = max(range(len(p)), key=lambda c: (ratios[c], -c))
    if not p[best] > lambdas[best]:
        return None
    regulated = tau <= 0 or matches[best] >= tau
    energy_one_hot = -math.log(p[best] / lambdas[best]) if regulated else 0.0
    return best if energy_one_hot < 0.0 else None


def test_candidate_class_examples():
    assert candidate_class([0.85, 0.15], [0.8, 0.8]) == 0
    assert candidate_class([0.80, 0.20], [0.8, 0.8]) is None
    assert candidate_class([0.6, 0.4], [0.9, 0.4]) is None


def test_entropy_gate_examples():
    assert -math.log(0.9 / 0.8) == pytest.approx(-0.1178, abs=1e-4)
    assert entropy_gate([0.9, 0.1], 0, [0.8, 0.8], True)
    assert not entropy_gate([0.8, 0.2], 0, [0.8, 0.8], True)
    assert not entropy_gate([0.99, 0.01], 0, [0.8, 0.8], False)


def test_pseudo_label_values():
    assert ZERO.is_zero and not ZERO.vector(3).any()
    assert one_hot(2, 0.9).vector(3).tolist() == [0, 0, 1]
    with pytest.raises(ValueError):
        one_hot(0, 0.0)
    with pytest.raises(ValueError):
        SelectionConfig((0.8, 1.0))


def test_generate_examples():
    lex = _lex(["great", "superb"], ["awful"])
    two = Document.from_words(["great", "superb", "film"])
    one = Document.from_words(["great", "film"])
    cfg = SelectionConfig((0.8, 0.8), tau=2)
    accepted, records = generate_pseudo_labels(
        None, lex, [two, one], cfg, scorer=_fixed([[0.95, 0.05], [0.95, 0.05]])
    )
    assert accepted == [(two, PseudoLabel(0, 0.95))]
    assert [r.reason for r in records] == ["none", "lexicon"]
    assert [r.matches for r in records] == [2, 1]


def _grid(C, step):
    ticks = np.arange(0, 1 + 1e-9, step)
    for combo in itertools.product(ticks, repeat=C - 1):
        last = 1.0 - sum(combo)
        if last >= -1e-12:
            yield [float(x) for x in combo] + [max(last, 0.0)]


def test_selection_matches_oracle_on_grid():
    rng = np.random.default_rng(0)
    vocab_words = [f"k{c}" for c in range(4)]
    checked = 0
    for C, step in ((2, 0.025), (3, 0.05), (4, 0.1)):
        probs = list(_grid(C, step))
        lex = _lex(*[[vocab_words[c]] for c in range(C)])
        docs, matches = [], []
        for _ in probs:
            m = rng.integers(0, 4, C)
            matches.append(m)
            docs.append(Document.from_words([w for c in range(C) for w in [vocab_words[c]] * m[c]] or ["x"]))
        for tau in (0, 1, 2):
            for lambdas in ((0.8,) * C, tuple(rng.uniform(0.3, 0.9, C))):
                cfg = SelectionConfig(tuple(lambdas), tau)
                accepted, records = generate_pseudo_labels(None, lex, docs, cfg, scorer=_fixed(probs))
                got = [r.chosen for r in records]
                want = [oracle_select(p, lambdas, m, tau) for p, m in zip(probs, matches)]
                assert got == want
                assert len(accepted) == sum(w is not None for w in want)
                checked += len(probs)
    assert checked >= 500


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3),
    st.lists(st.integers(0, 3), min_size=3, max_size=3),
    st.integers(0, 2),
    st.integers(0, 2),
    st.floats(0.0, 0.4),
)
def test_raising_lambda_or_tau_never_adds(raw, m, cls, tau, bump):
    p = [x / sum(raw) for x in raw]
    lex = _lex(["a"], ["b"], ["c"])
    doc = Document.from_words(["a"] * m[0] + ["b"] * m[1] + ["c"] * m[2] + ["z"])
    base = SelectionConfig((0.5, 0.5, 0.5), tau)
    pick = lambda cfg: generate_pseudo_labels(None, lex, [doc], cfg, scorer=_fixed([p]))[1][0].chosen
    before = pick(base)
    lambdas = list(base.lambdas)
    lambdas[cls] = min(0.99, lambdas[cls] + bump)
    after = pick(SelectionConfig(tuple(lambdas), tau))
    if after == cls:
        assert before == cls
    assert pick(SelectionConfig(base.lambdas, tau + 1)) in (None, before)


def test_tau_zero_is_plain_confidence_thresholding():
    rng = np.random.default_rng(5)
    probs = rng.dirichlet(np.ones(3) * 0.4, 200)
    docs = [Document.from_words(["w"]) for _ in probs]
    accepted, _ = generate_pseudo_labels(None, _lex([], [], []), docs, SelectionConfig((0.7,) * 3, 0), scorer=_fixed(probs))
    expected = [int(p.argmax()) for p in probs if p.max() > 0.7]
    assert [pl.cls for _, pl in accepted] == expected
    assert all(pl.confidence > 0.7 for _, pl in accepted)


def test_empty_pool():
    assert generate_pseudo_labels(None, _lex([], []), [], SelectionConfig((0.8, 0.8))) == ([], [])
