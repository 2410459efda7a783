"""Lexical knowledge base and label-preserving word-replacement augmentation.

The KB is read from a TSV export, one relation per line::

    # comment
    good<TAB>synonym<TAB>fine
    dog<TAB>hypernym<TAB>animal
    hot<TAB>antonym<TAB>cold

Antonyms are stored symmetrically, every hypernym edge also yields the
inverse hyponym edge (and vice versa), and synonymy is symmetric.
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import UNK_ID, Document, Vocabulary


class KBError(ValueError):
    pass


class Relation(enum.Enum):
    SYNONYM = "synonym"
    HYPERNYM = "hypernym"
    HYPONYM = "hyponym"
    ANTONYM = "antonym"


class Action(enum.Enum):
    SYNONYM = "synonym"
    HYPERNYM = "hypernym"
    HYPONYM = "hyponym"
    ANTONYM_OF_ANTONYM = "antonym_of_antonym"


# Plain antonym swaps can flip the label, so they are not an action.
ACTIONS = tuple(Action)


class LexicalKB:
    def __init__(self):
        self._rel: dict[str, dict[Relation, set[str]]] = defaultdict(lambda: defaultdict(set))
        self._cache: dict[str, dict[Action, tuple[str, ...]]] = {}

    def __contains__(self, word: str) -> bool:
        return word in self._rel

    def __len__(self) -> int:
        return len(self._rel)

    def add(self, a: str, relation: Relation, b: str) -> None:
        a, b = a.strip().casefold(), b.strip().casefold()
        if not a or not b:
            raise KBError("empty word in relation")
        if a == b:
            return
        self._cache.clear()
        self._rel[a][relation].add(b)
        if relation in (Relation.SYNONYM, Relation.ANTONYM):
            self._rel[b][relation].add(a)
        elif relation is Relation.HYPERNYM:
            self._rel[b][Relation.HYPONYM].add(a)
        else:
            self._rel[b][Relation.HYPERNYM].add(a)

    def related(self, word: str, relation: Relation) -> frozenset[str]:
        rels = self._rel.get(word)
        if rels is None:
            return frozenset()
        return frozenset(rels.get(relation, ()))

    def words(self) -> list[str]:
        return sorted(self._rel)

    def edges(self) -> Iterable[tuple[str, Relation, str]]:
        for a in sorted(self._rel):
            for rel in Relation:
                for b in sorted(self._rel[a].get(rel, ())):
                    yield a, rel, b

    def options(self, word: str) -> dict[Action, tuple[str, ...]]:
        """Non-empty replacement candidates per action, sorted for reproducibility."""
        hit = self._cache.get(word)
        if hit is None:
            hit = {}
            for action in ACTIONS:
                found = related_words(self, word, action)
                if found:
                    hit[action] = tuple(sorted(found))
            self._cache[word] = hit
        return hit

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for a, rel, b in self.edges():
                fh.write(f"{a}\t{rel.value}\t{b}\n")


def load_kb(path: str | Path) -> LexicalKB:
    kb = LexicalKB()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(p.strip() for p in parts):
                raise KBError(f"{path}:{lineno}: expected 'word<TAB>relation<TAB>word'")
            a, tag, b = parts
            try:
                relation = Relation(tag.strip().lower())
            except ValueError:
                raise KBError(f"{path}:{lineno}: unknown relation {tag.strip()!r}") from None
            kb.add(a, relation, b)
    return kb


def related_words(kb: LexicalKB, word: str, action: Action) -> set[str]:
    if action is Action.ANTONYM_OF_ANTONYM:
        out: set[str] = set()
        for ant in kb.related(word, Relation.ANTONYM):
            out |= kb.related(ant, Relation.ANTONYM)
    else:
        out = set(kb.related(word, Relation(action.value)))
    out.discard(word)
    return out


@dataclass(frozen=True)
class AugmentConfig:
    replace_fraction: float = 0.3
    copies_per_example: int = 1
    seed: int = 0
    enabled: bool = True

    def __post_init__(self):
        if not 0.0 < self.replace_fraction <= 1.0:
            raise ValueError("replace_fraction must be in (0, 1]")
        if self.copies_per_example < 1:
            raise ValueError("copies_per_example must be >= 1")


def augment_example(
    kb: LexicalKB,
    doc: Document,
    label: int,
    config: AugmentConfig,
    vocab: Optional[Vocabulary] = None,
    rng: Optional[np.random.Generator] = None,
) -> list[tuple[Document, int]]:
    """Make ``copies_per_example`` one-for-one word-replaced copies of ``doc``.

    In each copy a ``replace_fraction`` share (rounded up) of the replaceable
    positions is drawn uniformly; each gets a uniformly chosen action among
    those with candidates and then a uniform candidate. Replacement ids come
    from ``vocab`` (unknown id when absent or when no vocab is given).
    """
    if not doc.token_strings:
        raise ValueError("cannot augment an empty document")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    options = [kb.options(w) for w in doc.token_strings]
    eligible = [i for i, opt in enumerate(options) if opt]
    out = []
    for _ in range(config.copies_per_example):
        if not eligible:
            out.append((doc, label))
            continue
        k = math.ceil(config.replace_fraction * len(eligible))
        picks = sorted(rng.choice(len(eligible), size=k, replace=False))
        words = list(doc.token_strings)
        ids = list(doc.tokens) if doc.tokens is not None else None
        for j in picks:
            pos = eligible[j]
            opt = options[pos]
            actions = [a for a in ACTIONS if a in opt]
            cands = opt[actions[rng.integers(len(actions))]]
            new = cands[rng.integers(len(cands))]
            words[pos] = new
            if ids is not None:
                ids[pos] = vocab.id(new) if vocab is not None else UNK_ID
        out.append(
            (
                replace(
                    doc,
                    raw_text=" ".join(words),
                    token_strings=tuple(words),
                    tokens=tuple(ids) if ids is not None else None,
                ),
                label,
            )
        )
    return out


def augment_many(
    kb: LexicalKB,
    pairs: Sequence[tuple[Document, int]],
    config: AugmentConfig,
    vocab: Optional[Vocabulary] = None,
    stream: int = 0,
) -> list[tuple[Document, int]]:
    """Augment each pair with its own generator seeded by ``(config.seed, stream, index)``."""
    out = []
    for i, (doc, label) in enumerate(pairs):
        rng = np.random.default_rng([config.seed, stream, i])
        out.extend(augment_example(kb, doc, label, config, vocab, rng))
    return out
