"""Per-class lexicons mined from attention and word frequency, and the lexicon gate."""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .classifier import ModelParams, predict, rank_attention_words
from .corpus import UNK_ID, Corpus, Document

log = logging.getLogger(__name__)

# fmt: off
DEFAULT_STOPWORDS = frozenset("""
a about above after again against all am an and any are as at be because been
before being below between both but by can could did do does doing down during
each few for from further had has have having he her here hers herself him
himself his how i if in into is it its itself just me more most my myself no
nor not of off on once only or other our ours ourselves out over own same she
should so some such than that the their theirs them themselves then there these
they this those through to too under until up very was we were what when where
which while who whom why will with would you your yours yourself yourselves s t
""".split())
# fmt: on


@dataclass(frozen=True)
class LexiconConfig:
    n: int = 3
    k_percent: float = 10.0
    tau: int = 2
    stopwords: frozenset[str] = DEFAULT_STOPWORDS
    # count each lexicon word once per document instead of every occurrence
    count_distinct: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 < self.k_percent <= 100.0:
            raise ValueError("k_percent must be in (0, 100]")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")


@dataclass(frozen=True)
class LexiconEntry:
    word: str
    count: int
    mean_attention: float


@dataclass(frozen=True)
class Lexicon:
    class_names: tuple[str, ...]
    entries: tuple[tuple[LexiconEntry, ...], ...]
    count_distinct: bool = False
    _sets: tuple[frozenset[str], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self, "_sets", tuple(frozenset(e.word for e in ents) for ents in self.entries)
        )

    @property
    def num_classes(self) -> int:
        return len(self.entries)

    def words(self, cls: int) -> frozenset[str]:
        return self._sets[cls]

    def sizes(self) -> list[int]:
        return [len(e) for e in self.entries]

    def to_dict(self) -> dict:
        return {
            name: [
                {"word": e.word, "count": e.count, "mean_attention": e.mean_attention}
                for e in ents
            ]
            for name, ents in zip(self.class_names, self.entries)
        }

    @classmethod
    def from_dict(cls, data: dict, count_distinct: bool = False) -> "Lexicon":
        names = tuple(data)
        entries = tuple(
            tuple(LexiconEntry(e["word"], int(e["count"]), float(e["mean_attention"])) for e in data[n])
            for n in names
        )
        return cls(names, entries, count_distinct)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Lexicon":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _lexicon_from_attention(
    docs: Sequence[Document],
    labels: Sequence[int],
    attention: Sequence,
    class_names: Sequence[str],
    config: LexiconConfig,
) -> Lexicon:
    C = len(class_names)
    collected: dict[str, set[int]] = defaultdict(set)
    for doc, y, attn in zip(docs, labels, attention):
        exclude = config.stopwords | {doc.token_strings[i] for i, t in enumerate(doc.tokens) if t == UNK_ID}
        for word in rank_attention_words(doc, attn, config.n, exclude):
            collected[word].add(y)
    owner = {w: next(iter(cs)) for w, cs in collected.items() if len(cs) == 1}

    counts = [defaultdict(int) for _ in range(C)]
    attn_sum = [defaultdict(float) for _ in range(C)]
    for doc, y, attn in zip(docs, labels, attention):
        for word, a in zip(doc.token_strings, attn):
            if owner.get(word) == y:
                counts[y][word] += 1
                attn_sum[y][word] += float(a)

    entries = []
    for c in range(C):
        cands = list(counts[c])
        if not cands:
            log.warning("class %r has no lexicon candidates", class_names[c])
            entries.append(())
            continue
        keep = math.ceil(config.k_percent / 100.0 * len(cands))
        ranked = sorted(
            cands,
            key=lambda w: (-counts[c][w], -attn_sum[c][w] / counts[c][w], w),
        )
        entries.append(
            tuple(LexiconEntry(w, counts[c][w], attn_sum[c][w] / counts[c][w]) for w in ranked[:keep])
        )
    return Lexicon(tuple(class_names), tuple(entries), config.count_distinct)


def lexicon_from_pairs(
    model: ModelParams,
    pairs: Sequence[tuple[Document, int]],
    class_names: Sequence[str],
    config: LexiconConfig,
    leaky_slope: float = 0.1,
) -> Lexicon:
    docs = [d for d, _ in pairs]
    labels = [y for _, y in pairs]
    _, attention = predict(model, docs, leaky_slope)
    return _lexicon_from_attention(docs, labels, attention, class_names, config)


def build_lexicon(model: ModelParams, labeled: Corpus, config: LexiconConfig, leaky_slope: float = 0.1) -> Lexicon:
    """Mine a lexicon from the labeled corpus.

    Every example contributes its top-``n`` attention words (stopwords and
    unknown tokens skipped). Words contributed under more than one class are
    discarded. Within each class the surviving words are ranked by how often
    they occur in that class's examples and the top ``k_percent`` (rounded
    up) are kept.
    """
    if len(labeled) == 0 or not labeled.is_labeled():
        raise ValueError("build_lexicon needs a non-empty labeled corpus")
    pairs = [(ex.doc, ex.label) for ex in labeled.examples]
    return lexicon_from_pairs(model, pairs, labeled.class_names, config, leaky_slope)


def refine_lexicon(
    model: ModelParams,
    labeled: Corpus,
    pseudo_labeled: Iterable[tuple[Document, int]],
    config: LexiconConfig,
    leaky_slope: float = 0.1,
) -> Lexicon:
    """Rebuild the lexicon over gold plus pseudo-labeled examples, weighted equally."""
    pairs = [(ex.doc, ex.label) for ex in labeled.examples]
    for doc, y in pseudo_labeled:
        pairs.append((doc, int(y)))
    return lexicon_from_pairs(model, pairs, labeled.class_names, config, leaky_slope)


def match_count(lexicon: Lexicon, cls: int, doc: Document) -> int:
    words = lexicon.words(cls)
    if lexicon.count_distinct:
        return len(words.intersection(doc.token_strings))
    return sum(1 for w in doc.token_strings if w in words)


def regulate(lexicon: Lexicon, candidate: tuple[Document, int], tau: int) -> bool:
    """True when the document holds at least ``tau`` lexicon words of the candidate class."""
    if tau <= 0:
        return True
    doc, cls = candidate
    return match_count(lexicon, cls, doc) >= tau
