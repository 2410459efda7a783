"""Experiment harness: evaluation, ablation grid, k-sweep and synthetic data."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .classifier import ModelParams, predict
from .corpus import (
    Corpus,
    Document,
    Example,
    Vocabulary,
    build_vocabulary,
    load_dataset,
    read_class_list,
    sample_few_shot,
)
from .lexicon import DEFAULT_STOPWORDS
from .lexknowledge import LexicalKB, Relation, load_kb
from .selftrain import Mode, SelfTrainConfig, run

log = logging.getLogger(__name__)

ABLATION_MODES = (Mode.SUPERVISED, Mode.CLASSIC_ST, Mode.LEXICON_ST, Mode.FULL_LST)


def evaluate(model: ModelParams, test: Corpus, leaky_slope: float = 0.1) -> float:
    """Fraction of ``test`` whose argmax prediction matches the gold label."""
    if len(test) == 0:
        raise ValueError("cannot evaluate on an empty test set")
    if not test.is_labeled():
        raise ValueError("test set must be labeled")
    probs, _ = predict(model, test.docs, leaky_slope)
    return float((probs.argmax(axis=1) == np.array(test.labels)).mean())


# --------------------------------------------------------------------------
# synthetic corpora

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


@dataclass
class SyntheticData:
    corpus: Corpus
    test: Corpus
    kb: LexicalKB
    indicators: list[list[str]]
    synonyms: dict[str, list[str]]


def _invent_words(rng: np.random.Generator, count: int, taken: set[str]) -> list[str]:
    out = []
    while len(out) < count:
        n = int(rng.integers(2, 4))
        word = "".join(
            _CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWELS[rng.integers(len(_VOWELS))]
            for _ in range(n)
        )
        if word in taken or word in DEFAULT_STOPWORDS:
            continue
        taken.add(word)
        out.append(word)
    return out


def _zipf(n: int, exponent: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** exponent
    return w / w.sum()


def generate_synthetic(
    num_classes: int,
    vocab_size: int,
    docs_per_class: int,
    keyword_rate: float,
    noise_rate: float,
    doc_len: int,
    seed: int,
    *,
    test_per_class: int = 0,
    keyword_slots: int = 4,
    synonym_rate: float = 0.3,
    crosstalk: float = 0.0,
    keyword_zipf: float = 1.0,
    background_zipf: float = 1.0,
) -> SyntheticData:
    """Generate a labeled corpus (plus optional test corpus) and its companion KB.

    Every class owns 10 indicator words; the remaining ``vocab_size`` words are
    shared background. A document has ``doc_len`` tokens, of which each of
    ``keyword_slots`` slots holds an indicator of the document's class with
    probability ``keyword_rate`` (indicators Zipf-distributed); all other
    tokens are background (also Zipf-distributed). Each indicator has two
    synonyms outside the base vocabulary, listed in the KB, and an indicator
    token surfaces as one of its synonyms with probability ``synonym_rate``.
    With probability ``crosstalk`` an indicator slot borrows an indicator of
    a random other class instead, so some documents carry mixed evidence.
    A ``noise_rate`` share of each class's documents carry the content of a
    different class, so labels stay exactly balanced.
    """
    if num_classes < 2:
        raise ValueError("need at least two classes")
    if vocab_size <= num_classes * 10:
        raise ValueError("vocab_size must exceed num_classes * 10")
    if not 0.0 <= keyword_rate <= 1.0 or not 0.0 <= noise_rate < 1.0:
        raise ValueError("keyword_rate must be in [0, 1] and noise_rate in [0, 1)")
    if not 0.0 <= crosstalk < 1.0 or not 0.0 <= synonym_rate <= 1.0:
        raise ValueError("crosstalk must be in [0, 1) and synonym_rate in [0, 1]")
    if not 1 <= keyword_slots <= doc_len:
        raise ValueError("keyword_slots must be between 1 and doc_len")
    if docs_per_class < 1:
        raise ValueError("docs_per_class must be >= 1")

    rng = np.random.default_rng(seed)
    taken: set[str] = set()
    indicators = [_invent_words(rng, 10, taken) for _ in range(num_classes)]
    background = _invent_words(rng, vocab_size - num_classes * 10, taken)
    synonyms = {w: _invent_words(rng, 2, taken) for ws in indicators for w in ws}

    kb = LexicalKB()
    for w, syns in synonyms.items():
        for s in syns:
            kb.add(w, Relation.SYNONYM, s)

    kw_p = _zipf(10, keyword_zipf)
    bg_p = _zipf(len(background), background_zipf)
    class_names = tuple(f"class{c}" for c in range(num_classes))

    def make_doc(content: int) -> Document:
        n_kw = int((rng.random(keyword_slots) < keyword_rate).sum())
        words = []
        for j in rng.choice(10, size=n_kw, p=kw_p):
            source = content
            if rng.random() < crosstalk:
                source = (content + 1 + int(rng.integers(num_classes - 1))) % num_classes
            word = indicators[source][j]
            if rng.random() < synonym_rate:
                word = synonyms[word][rng.integers(2)]
            words.append(word)
        words += [background[j] for j in rng.choice(len(background), size=doc_len - n_kw, p=bg_p)]
        rng.shuffle(words)
        return Document.from_words(words)

    def make_corpus(per_class: int) -> Corpus:
        examples = []
        n_noisy = int(round(noise_rate * per_class))
        for c in range(num_classes):
            noisy = set(rng.choice(per_class, size=n_noisy, replace=False).tolist())
            for i in range(per_class):
                content = c
                if i in noisy:
                    content = (c + 1 + int(rng.integers(num_classes - 1))) % num_classes
                examples.append(Example(make_doc(content), c))
        order = rng.permutation(len(examples))
        return Corpus(tuple(examples[i] for i in order), num_classes, class_names)

    corpus = make_corpus(docs_per_class)
    test = make_corpus(test_per_class) if test_per_class else Corpus((), num_classes, class_names)
    return SyntheticData(corpus, test, kb, indicators, synonyms)


# --------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentConfig:
    data: Optional[str] = None
    test: Optional[str] = None
    kb: Optional[str] = None
    format: str = "jsonl"
    text_field: str = "text"
    label_field: str = "label"
    classes: Optional[str] = None
    per_class: int = 30
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    selftrain: SelfTrainConfig = field(default_factory=SelfTrainConfig)
    out_dir: Optional[str] = None

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("need at least one seed")

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "data", "test", "kb", "format", "text_field", "label_field", "classes",
            "per_class", "seeds", "out_dir",
        )}
        out["selftrain"] = self.selftrain.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        kw = {k: v for k, v in data.items() if k != "selftrain" and k in cls.__dataclass_fields__}
        if "selftrain" in data:
            kw["selftrain"] = SelfTrainConfig.from_dict(data["selftrain"])
        return cls(**kw)


@dataclass
class Dataset:
    corpus: Corpus
    test: Corpus
    kb: Optional[LexicalKB]


def load_experiment_data(config: ExperimentConfig) -> Dataset:
    if config.data is None or config.test is None:
        raise ValueError("experiment config needs 'data' and 'test' paths")
    names = read_class_list(config.classes) if config.classes else None
    kw = dict(format=config.format, text_field=config.text_field, label_field=config.label_field)
    corpus = load_dataset(config.data, class_names=names, **kw)
    test = load_dataset(config.test, class_names=corpus.class_names, **kw)
    kb = load_kb(config.kb) if config.kb else None
    return Dataset(corpus, test, kb)


@dataclass
class Split:
    train: Corpus
    dev: Corpus
    unlabeled: Corpus
    test: Corpus
    vocab: Vocabulary

    def hash(self) -> str:
        return "-".join(c.fingerprint() for c in (self.train, self.dev, self.unlabeled))


def make_split(data: Dataset, per_class: int, seed: int) -> Split:
    """Few-shot split; the vocabulary covers every text seen during training."""
    train, dev, pool = sample_few_shot(data.corpus, per_class, seed)
    vocab = build_vocabulary([train, dev, pool])
    enc = vocab.encode_corpus
    return Split(enc(train), enc(dev), enc(pool), enc(data.test), vocab)


def seeded_config(config: SelfTrainConfig, seed: int) -> SelfTrainConfig:
    return replace(
        config,
        train_cfg=replace(config.train_cfg, seed=seed),
        augment_cfg=replace(config.augment_cfg, seed=seed),
    )


def run_once(split: Split, kb, config: SelfTrainConfig, seed: int, run_dir=None, on_selection=None):
    cfg = seeded_config(config, seed)
    model, lexicon, history = run(
        split.train, split.dev, split.unlabeled, kb, cfg, split.vocab, run_dir, on_selection
    )
    return model, lexicon, history, evaluate(model, split.test, cfg.train_cfg.leaky_slope)


@dataclass
class ReportRow:
    name: str
    seeds: list[int] = field(default_factory=list)
    accuracies: list[float] = field(default_factory=list)
    split_hashes: list[str] = field(default_factory=list)
    histories: list[dict] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies, ddof=1)) if len(self.accuracies) > 1 else 0.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seeds": self.seeds,
            "accuracies": self.accuracies,
            "mean": self.mean,
            "std": self.std,
            "split_hashes": self.split_hashes,
            "histories": self.histories,
        }


@dataclass
class Report:
    rows: list[ReportRow]

    def row(self, name: str) -> ReportRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def table(self) -> str:
        lines = [f"{'setting':<16} {'mean':>7} {'std':>6}  per-seed"]
        for r in self.rows:
            seeds = " ".join(f"{100 * a:.2f}" for a in r.accuracies)
            lines.append(f"{r.name:<16} {100 * r.mean:7.2f} {100 * r.std:6.2f}  {seeds}")
        return "\n".join(lines)


def _grid(
    config: ExperimentConfig,
    data: Dataset,
    settings: Sequence[tuple[str, SelfTrainConfig]],
) -> Report:
    rows = [ReportRow(name) for name, _ in settings]
    for seed in config.seeds:
        split = make_split(data, config.per_class, seed)
        for row, (name, cfg) in zip(rows, settings):
            run_dir = None
            if config.out_dir:
                run_dir = Path(config.out_dir) / name / f"seed{seed}"
            _, _, history, acc = run_once(split, data.kb, cfg, seed, run_dir)
            log.info("%s seed %d: test accuracy %.4f", name, seed, acc)
            row.seeds.append(seed)
            row.accuracies.append(acc)
            row.split_hashes.append(split.hash())
            row.histories.append(history.to_dict())
    return Report(rows)


def run_ablation(config: ExperimentConfig, data: Optional[Dataset] = None) -> Report:
    """The four module combinations on identical splits and seeds."""
    data = data or load_experiment_data(config)
    settings = [(m.value, replace(config.selftrain, mode=m)) for m in ABLATION_MODES]
    return _grid(config, data, settings)


def run_k_sweep(config: ExperimentConfig, ks: Sequence[float], data: Optional[Dataset] = None) -> Report:
    """Full LST runs that differ only in the lexicon's frequency ratio."""
    if not ks:
        raise ValueError("ks must be non-empty")
    data = data or load_experiment_data(config)
    base = replace(config.selftrain, mode=Mode.FULL_LST)
    settings = [
        (f"k={k:g}", replace(base, lexicon_cfg=replace(base.lexicon_cfg, k_percent=float(k))))
        for k in ks
    ]
    return _grid(config, data, settings)
