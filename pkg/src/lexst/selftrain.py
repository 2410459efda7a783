"""Teacher/student loop with lexicon-gated pseudo-labels and lexical augmentation."""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .classifier import ModelParams, TrainConfig, init_params, predict, save_checkpoint, train
from .corpus import Corpus, Document, Vocabulary
from .lexicon import Lexicon, LexiconConfig, build_lexicon, refine_lexicon
from .lexknowledge import AugmentConfig, LexicalKB, augment_many
from .pseudolabel import PseudoLabel, SelectionConfig, SelectionRecord, generate_pseudo_labels

log = logging.getLogger(__name__)


class Mode(enum.Enum):
    SUPERVISED = "supervised"
    CLASSIC_ST = "classic_st"
    LEXICON_ST = "lexicon_st"
    FULL_LST = "full_lst"


@dataclass
class SelfTrainConfig:
    selection: SelectionConfig = field(default_factory=lambda: SelectionConfig((0.8,), 2))
    lexicon_cfg: LexiconConfig = field(default_factory=LexiconConfig)
    augment_cfg: AugmentConfig = field(default_factory=AugmentConfig)
    train_cfg: TrainConfig = field(default_factory=TrainConfig)
    max_iterations: int = 10
    outer_patience: int = 3
    mode: Mode = Mode.FULL_LST
    warm_start: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if isinstance(self.mode, str):
            self.mode = Mode(self.mode)

    @property
    def effective_tau(self) -> int:
        return 0 if self.mode is Mode.CLASSIC_ST else self.selection.tau

    @property
    def augments(self) -> bool:
        return self.mode is Mode.FULL_LST and self.augment_cfg.enabled

    def to_dict(self) -> dict:
        lex = asdict(self.lexicon_cfg)
        lex["stopwords"] = sorted(self.lexicon_cfg.stopwords)
        return {
            "selection": {"lambdas": list(self.selection.lambdas), "tau": self.selection.tau},
            "lexicon": lex,
            "augment": asdict(self.augment_cfg),
            "train": self.train_cfg.to_dict(),
            "max_iterations": self.max_iterations,
            "outer_patience": self.outer_patience,
            "mode": self.mode.value,
            "warm_start": self.warm_start,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SelfTrainConfig":
        kw = {}
        if "selection" in data:
            sel = data["selection"]
            lambdas = sel.get("lambdas", sel.get("lambda", 0.8))
            if isinstance(lambdas, (int, float)):
                lambdas = [lambdas]
            kw["selection"] = SelectionConfig(tuple(float(x) for x in lambdas), int(sel.get("tau", 2)))
        if "lexicon" in data:
            lex = dict(data["lexicon"])
            if "stopwords" in lex:
                lex["stopwords"] = frozenset(lex["stopwords"])
            kw["lexicon_cfg"] = LexiconConfig(**lex)
        if "augment" in data:
            kw["augment_cfg"] = AugmentConfig(**data["augment"])
        if "train" in data:
            kw["train_cfg"] = TrainConfig.from_dict(data["train"])
        for key in ("max_iterations", "outer_patience", "mode", "warm_start"):
            if key in data:
                kw[key] = data[key]
        return cls(**kw)


@dataclass
class IterationRecord:
    iteration: int
    pool_before: int
    pool_after: int
    newly_accepted: int
    rejected_confidence: int
    rejected_lexicon: int
    train_size: int
    dev_accuracy: float
    lexicon_sizes: list[int]
    # agreement of this round's pseudo-labels with held-back truth; diagnostics only
    pseudo_label_accuracy: Optional[float] = None


@dataclass
class History:
    records: list[IterationRecord] = field(default_factory=list)
    teacher_dev_accuracy: float = 0.0
    best_dev_accuracy: float = 0.0
    best_iteration: int = 0

    def dev_accuracies(self) -> list[float]:
        return [r.dev_accuracy for r in self.records]

    def to_dict(self) -> dict:
        return {
            "records": [asdict(r) for r in self.records],
            "teacher_dev_accuracy": self.teacher_dev_accuracy,
            "best_dev_accuracy": self.best_dev_accuracy,
            "best_iteration": self.best_iteration,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "History":
        return cls(
            [IterationRecord(**r) for r in data["records"]],
            data["teacher_dev_accuracy"],
            data["best_dev_accuracy"],
            data["best_iteration"],
        )


def converged(history: History, outer_patience: int) -> bool:
    """Stop when the last round accepted nothing or dev accuracy has stalled.

    Stalled means no strict improvement over the running best for
    ``outer_patience`` consecutive rounds.
    """
    if not history.records:
        return False
    if history.records[-1].newly_accepted == 0:
        return True
    best, stale = -np.inf, 0
    for acc in history.dev_accuracies():
        if acc > best:
            best, stale = acc, 0
        else:
            stale += 1
    return stale >= outer_patience


def dev_accuracy(params: ModelParams, dev: Corpus, leaky_slope: float = 0.1) -> float:
    if len(dev) == 0:
        return 0.0
    probs, _ = predict(params, dev.docs, leaky_slope)
    return float((probs.argmax(axis=1) == np.array(dev.labels)).mean())


def student_retrain(
    labeled: Corpus,
    pseudo: Sequence[tuple[Document, PseudoLabel]],
    augmented: Sequence[tuple[Document, int]],
    config: TrainConfig,
    dev: Corpus,
    seed: int,
    vocab_size: int,
    init: Optional[ModelParams] = None,
) -> ModelParams:
    """Train a student on gold, pseudo-labeled and augmented examples with hard labels.

    The student starts from a fresh seeded initialisation unless ``init`` is
    given (warm start).
    """
    pairs = [(ex.doc, ex.label) for ex in labeled.examples]
    for doc, pl in pseudo:
        if pl.is_zero:
            raise ValueError("student_retrain received an all-zero pseudo-label")
        pairs.append((doc, pl.cls))
    pairs.extend(augmented)
    log.info(
        "student training set: %d labeled + %d pseudo + %d augmented = %d",
        len(labeled), len(pseudo), len(augmented), len(pairs),
    )
    start = init.copy() if init is not None else init_params(
        vocab_size, config.emb_dim, config.attn_dim, labeled.num_classes, seed
    )
    params, _ = train(start, pairs, dev, replace(config, seed=seed))
    return params


def _vocab_size(vocab: Optional[Vocabulary], corpora: Sequence[Corpus]) -> int:
    if vocab is not None:
        return len(vocab)
    top = 0
    for corpus in corpora:
        for doc in corpus.docs:
            if doc.tokens:
                top = max(top, max(doc.tokens))
    return top + 1


def run(
    labeled_train: Corpus,
    labeled_dev: Corpus,
    unlabeled: Corpus,
    kb: Optional[LexicalKB],
    config: SelfTrainConfig,
    vocab: Optional[Vocabulary] = None,
    run_dir: Optional[str | Path] = None,
    on_selection: Optional[Callable[[int, list[SelectionRecord]], None]] = None,
) -> tuple[ModelParams, Lexicon, History]:
    """Run the full self-training loop and return the best-on-dev snapshot.

    Corpora must already be encoded against ``vocab``. ``on_selection`` is
    called once per round with that round's selection records, whose
    ``doc_index`` refers to the position in ``unlabeled``.
    """
    if len(labeled_train) == 0:
        raise ValueError("labeled_train is empty")
    tcfg = config.train_cfg
    slope = tcfg.leaky_slope
    C = labeled_train.num_classes
    V = _vocab_size(vocab, [labeled_train, labeled_dev, unlabeled])
    selection = SelectionConfig(
        _broadcast(config.selection.lambdas, C), config.effective_tau
    )
    run_dir = Path(run_dir) if run_dir is not None else None

    teacher = init_params(V, tcfg.emb_dim, tcfg.attn_dim, C, tcfg.seed)
    teacher, _ = train(teacher, labeled_train, labeled_dev, tcfg)
    lexicon = build_lexicon(teacher, labeled_train, config.lexicon_cfg, slope)
    teacher_acc = dev_accuracy(teacher, labeled_dev, slope)
    history = History(teacher_dev_accuracy=teacher_acc, best_dev_accuracy=teacher_acc)
    best = teacher
    _checkpoint(run_dir, 0, teacher, lexicon, vocab)
    if config.mode is Mode.SUPERVISED:
        return best, lexicon, history
    if kb is None and config.augments:
        raise ValueError("augmentation needs a lexical knowledge base")

    pool = list(range(len(unlabeled)))
    accepted: list[tuple[Document, PseudoLabel]] = []
    for it in range(1, config.max_iterations + 1):
        pool_docs = [unlabeled.examples[i].doc for i in pool]
        new, records = generate_pseudo_labels(teacher, lexicon, pool_docs, selection, slope)
        records = [replace(r, doc_index=pool[r.doc_index]) for r in records]
        if on_selection is not None:
            on_selection(it, records)
        taken = [r.doc_index for r in records if r.chosen is not None]
        accepted.extend(new)
        taken_set = set(taken)
        pool_before = len(pool)
        pool = [i for i in pool if i not in taken_set]

        augmented: list[tuple[Document, int]] = []
        if config.augments:
            augmented = augment_many(
                kb, [(d, pl.cls) for d, pl in accepted], config.augment_cfg, vocab, stream=it
            )
        student = student_retrain(
            labeled_train, accepted, augmented, tcfg, labeled_dev,
            seed=tcfg.seed + it, vocab_size=V,
            init=teacher if config.warm_start else None,
        )
        lexicon = refine_lexicon(
            student, labeled_train, [(d, pl.cls) for d, pl in accepted], config.lexicon_cfg, slope
        )
        acc = dev_accuracy(student, labeled_dev, slope)
        history.records.append(
            IterationRecord(
                iteration=it,
                pool_before=pool_before,
                pool_after=len(pool),
                newly_accepted=len(new),
                rejected_confidence=sum(r.reason == "confidence" for r in records),
                rejected_lexicon=sum(r.reason == "lexicon" for r in records),
                train_size=len(labeled_train) + len(accepted) + len(augmented),
                dev_accuracy=acc,
                lexicon_sizes=lexicon.sizes(),
                pseudo_label_accuracy=_pseudo_accuracy(unlabeled, records),
            )
        )
        log.info("iteration %d: accepted %d, pool %d, dev acc %.4f", it, len(new), len(pool), acc)
        if acc > history.best_dev_accuracy:
            history.best_dev_accuracy, history.best_iteration, best = acc, it, student
        _checkpoint(run_dir, it, student, lexicon, vocab)
        teacher = student
        if converged(history, config.outer_patience):
            break
    return best, lexicon, history


def _broadcast(lambdas: Sequence[float], C: int) -> tuple[float, ...]:
    if len(lambdas) == 1:
        return tuple(lambdas) * C
    if len(lambdas) != C:
        raise ValueError(f"got {len(lambdas)} thresholds for {C} classes")
    return tuple(lambdas)


def _pseudo_accuracy(unlabeled: Corpus, records: list[SelectionRecord]) -> Optional[float]:
    truth = unlabeled.hidden_labels
    chosen = [r for r in records if r.chosen is not None]
    if truth is None or not chosen:
        return None
    return sum(truth[r.doc_index] == r.chosen for r in chosen) / len(chosen)


def _checkpoint(run_dir, it, params, lexicon, vocab):
    if run_dir is None:
        return
    out = run_dir / f"iter_{it:02d}"
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(params, out / "model.json", vocab.itos if vocab else None, lexicon.class_names)
    lexicon.save(out / "lexicon.json")
