"""Dataset ingestion, tokenization, vocabulary and few-shot splits."""

from __future__ import annotations

import csv
import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

UNK = "<unk>"
UNK_ID = 0

_WORD_RE = re.compile(r"[^\W_]+")


class DatasetError(ValueError):
    """Raised for malformed or inconsistent dataset files."""


def tokenize(text: str) -> list[str]:
    """Casefold ``text`` and split it into word tokens.

    Punctuation and whitespace both act as boundaries. Punctuation-only and
    purely numeric tokens are dropped.

    >>> tokenize("A Great, great film!")
    ['a', 'great', 'great', 'film']
    >>> tokenize("room 101")
    ['room']
    """
    return [tok for tok in _WORD_RE.findall(text.casefold()) if not tok.isnumeric()]


@dataclass(frozen=True)
class Document:
    raw_text: str
    token_strings: tuple[str, ...]
    tokens: Optional[tuple[int, ...]] = None

    @classmethod
    def from_text(cls, text: str) -> "Document":
        return cls(text, tuple(tokenize(text)))

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "Document":
        words = tuple(words)
        return cls(" ".join(words), words)

    def __len__(self) -> int:
        return len(self.token_strings)

    @property
    def encoded(self) -> bool:
        return self.tokens is not None


@dataclass(frozen=True)
class Example:
    doc: Document
    label: Optional[int] = None


@dataclass(frozen=True)
class Corpus:
    examples: tuple[Example, ...]
    num_classes: int
    class_names: tuple[str, ...]
    # Ground truth for label-stripped pools; evaluation only.
    hidden_labels: Optional[tuple[int, ...]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.num_classes < 2:
            raise DatasetError("a corpus needs at least two classes")
        if len(self.class_names) != self.num_classes:
            raise DatasetError("class_names length does not match num_classes")
        for ex in self.examples:
            if ex.label is not None and not 0 <= ex.label < self.num_classes:
                raise DatasetError(f"label {ex.label} out of range for {self.num_classes} classes")
        if self.hidden_labels is not None and len(self.hidden_labels) != len(self.examples):
            raise DatasetError("hidden_labels must have one entry per example")

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    @property
    def docs(self) -> list[Document]:
        return [ex.doc for ex in self.examples]

    @property
    def labels(self) -> list[Optional[int]]:
        return [ex.label for ex in self.examples]

    def is_labeled(self) -> bool:
        return all(ex.label is not None for ex in self.examples)

    def with_examples(self, examples: Iterable[Example], hidden_labels=None) -> "Corpus":
        return Corpus(tuple(examples), self.num_classes, self.class_names, hidden_labels)

    def fingerprint(self) -> str:
        """Stable hash of texts and labels, used to prove identical splits."""
        h = hashlib.sha256()
        for ex in self.examples:
            h.update(ex.doc.raw_text.encode("utf-8"))
            h.update(b"\x00")
            h.update(str(ex.label).encode("ascii"))
            h.update(b"\x01")
        return h.hexdigest()[:16]


class Vocabulary:
    """Word/id bijection with id 0 reserved for the unknown token."""

    def __init__(self, words: Sequence[str], counts: Optional[dict[str, int]] = None):
        if not words or words[0] != UNK:
            words = [UNK] + [w for w in words if w != UNK]
        self.itos: list[str] = list(words)
        self.stoi: dict[str, int] = {w: i for i, w in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate words in vocabulary")
        self.counts: dict[str, int] = dict(counts or {})

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, word: str) -> bool:
        return word in self.stoi

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def id(self, word: str) -> int:
        return self.stoi.get(word, UNK_ID)

    def word(self, idx: int) -> str:
        return self.itos[idx]

    def encode(self, doc: Document) -> Document:
        return replace(doc, tokens=tuple(self.stoi.get(w, UNK_ID) for w in doc.token_strings))

    def encode_corpus(self, corpus: Corpus) -> Corpus:
        examples = [Example(self.encode(ex.doc), ex.label) for ex in corpus.examples]
        return corpus.with_examples(examples, corpus.hidden_labels)


def build_vocabulary(corpora: Iterable[Corpus], min_freq: int = 1) -> Vocabulary:
    """Collect every word seen at least ``min_freq`` times across ``corpora``.

    Ids are assigned by descending frequency, ties broken lexicographically.
    """
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    freq: Counter[str] = Counter()
    for corpus in corpora:
        for ex in corpus.examples:
            freq.update(ex.doc.token_strings)
    freq.pop(UNK, None)
    kept = sorted((w for w, c in freq.items() if c >= min_freq), key=lambda w: (-freq[w], w))
    return Vocabulary([UNK] + kept, {w: freq[w] for w in kept})


def _read_records(path: Path, fmt: str) -> list[tuple[int, dict]]:
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        if fmt == "jsonl":
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DatasetError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
                if not isinstance(obj, dict):
                    raise DatasetError(f"{path}:{lineno}: record is not an object")
                records.append((lineno, obj))
        elif fmt == "csv":
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise DatasetError(f"{path}: no records")
            for row in reader:
                records.append((reader.line_num, row))
        else:
            raise DatasetError(f"unknown format {fmt!r}; expected 'jsonl' or 'csv'")
    return records


def read_class_list(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        names = [line.strip() for line in fh if line.strip()]
    if len(names) < 2:
        raise DatasetError(f"{path}: need at least two class names")
    return names


def load_dataset(
    path: str | Path,
    format: str = "jsonl",
    text_field: str = "text",
    label_field: Optional[str] = "label",
    class_names: Optional[Sequence[str]] = None,
    labeled: bool = True,
) -> Corpus:
    """Load a JSON Lines or CSV file into a tokenized :class:`Corpus`.

    With ``labeled=False`` the label field is ignored and ``class_names``
    must be supplied. Without a fixed class list, class names are collected
    in order of first appearance.
    """
    path = Path(path)
    records = _read_records(path, format)
    if not records:
        raise DatasetError(f"{path}: no records")
    fixed = class_names is not None
    names: list[str] = list(class_names) if fixed else []
    index = {name: i for i, name in enumerate(names)}
    if not labeled and not fixed:
        raise DatasetError("an unlabeled file needs an explicit class list")

    examples = []
    for lineno, rec in records:
        text = rec.get(text_field)
        if not isinstance(text, str):
            raise DatasetError(f"{path}:{lineno}: missing text field {text_field!r}")
        label = None
        if labeled:
            raw = rec.get(label_field) if label_field else None
            if raw is None or raw == "":
                raise DatasetError(f"{path}:{lineno}: missing label field {label_field!r}")
            raw = str(raw)
            if raw not in index:
                if fixed:
                    raise DatasetError(f"{path}:{lineno}: unknown label {raw!r}")
                index[raw] = len(names)
                names.append(raw)
            label = index[raw]
        examples.append(Example(Document.from_text(text), label))

    if len(names) < 2:
        raise DatasetError(f"{path}: found {len(names)} class(es); need at least two")
    return Corpus(tuple(examples), len(names), tuple(names))


def write_jsonl(corpus: Corpus, path: str | Path, text_field="text", label_field="label") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in corpus.examples:
            rec = {text_field: ex.doc.raw_text}
            if ex.label is not None:
                rec[label_field] = corpus.class_names[ex.label]
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def sample_few_shot(corpus: Corpus, per_class: int, seed: int) -> tuple[Corpus, Corpus, Corpus]:
    """Draw disjoint train/dev sets of ``per_class`` examples per class.

    Everything else becomes the unlabeled pool; its labels are stripped and
    kept only in ``hidden_labels``.
    """
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    if not corpus.is_labeled():
        raise DatasetError("sample_few_shot needs a fully labeled corpus")
    rng = np.random.default_rng(seed)
    by_class: list[list[int]] = [[] for _ in range(corpus.num_classes)]
    for i, ex in enumerate(corpus.examples):
        by_class[ex.label].append(i)

    train_idx, dev_idx = [], []
    for c, idx in enumerate(by_class):
        if len(idx) < 2 * per_class:
            raise DatasetError(
                f"class {corpus.class_names[c]!r} has {len(idx)} examples; "
                f"need {2 * per_class}"
            )
        perm = rng.permutation(len(idx))
        train_idx += [idx[j] for j in perm[:per_class]]
        dev_idx += [idx[j] for j in perm[per_class : 2 * per_class]]

    train_idx.sort()
    dev_idx.sort()
    taken = set(train_idx) | set(dev_idx)
    pool_idx = [i for i in range(len(corpus)) if i not in taken]
    ex = corpus.examples
    return (
        corpus.with_examples(ex[i] for i in train_idx),
        corpus.with_examples(ex[i] for i in dev_idx),
        corpus.with_examples(
            (Example(ex[i].doc, None) for i in pool_idx),
            hidden_labels=tuple(ex[i].label for i in pool_idx),
        ),
    )
