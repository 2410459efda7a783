"""Pseudo-label selection: confidence threshold, entropy gate and lexicon gate."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .classifier import ModelParams, predict
from .corpus import Corpus, Document
from .lexicon import Lexicon, match_count, regulate


@dataclass(frozen=True)
class PseudoLabel:
    """A one-hot pseudo-label, or the all-zero rejection when ``cls`` is None."""

    cls: Optional[int] = None
    confidence: float = 0.0

    @property
    def is_zero(self) -> bool:
        return self.cls is None

    def vector(self, num_classes: int) -> np.ndarray:
        out = np.zeros(num_classes)
        if self.cls is not None:
            out[self.cls] = 1.0
        return out


ZERO = PseudoLabel()


def one_hot(cls: int, confidence: float) -> PseudoLabel:
    if not 0.0 < confidence <= 1.0:
        raise ValueError("confidence must be in (0, 1]")
    return PseudoLabel(int(cls), float(confidence))


@dataclass(frozen=True)
class SelectionConfig:
    lambdas: tuple[float, ...]
    tau: int = 2

    def __post_init__(self):
        if any(not 0.0 < lam < 1.0 for lam in self.lambdas):
            raise ValueError("every lambda must lie in (0, 1)")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")

    @classmethod
    def uniform(cls, num_classes: int, lam: float = 0.8, tau: int = 2) -> "SelectionConfig":
        return cls((float(lam),) * num_classes, tau)


@dataclass(frozen=True)
class SelectionRecord:
    doc_index: int
    probs: tuple[float, ...]
    chosen: Optional[int]
    reason: str  # "none" when accepted, else "confidence" or "lexicon"
    matches: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "doc_index": self.doc_index,
            "probs": list(self.probs),
            "chosen": self.chosen,
            "reason": self.reason,
            "matches": self.matches,
        }


def candidate_class(probs: Sequence[float], lambdas: Sequence[float]) -> Optional[int]:
    """Class maximising ``p / lambda``, if its probability strictly clears its threshold."""
    ratios = np.asarray(probs, dtype=float) / np.asarray(lambdas, dtype=float)
    c = int(np.argmax(ratios))
    return c if probs[c] > lambdas[c] else None


def entropy_gate(probs: Sequence[float], chosen: int, lambdas: Sequence[float], regulator_pass: bool) -> bool:
    """Select the one-hot candidate only if it lowers the per-example objective below zero.

    With the regulator closed the candidate's objective is 0, equal to the
    all-zero label's, so it is never strictly lower.
    """
    if not regulator_pass:
        return False
    energy = -math.log(probs[chosen] / lambdas[chosen])
    return energy < 0.0


def generate_pseudo_labels(
    model: Optional[ModelParams],
    lexicon: Lexicon,
    unlabeled: Corpus | Sequence[Document],
    config: SelectionConfig,
    leaky_slope: float = 0.1,
    scorer: Optional[Callable[[Sequence[Document]], np.ndarray]] = None,
) -> tuple[list[tuple[Document, PseudoLabel]], list[SelectionRecord]]:
    """Label every pool document the teacher is confident about and the lexicon backs.

    ``scorer`` replaces the model's eval-mode probabilities when given.
    Rejected documents get no label; every decision is logged in the
    returned records.
    """
    docs = unlabeled.docs if isinstance(unlabeled, Corpus) else list(unlabeled)
    if not docs:
        return [], []
    probs = scorer(docs) if scorer is not None else predict(model, docs, leaky_slope)[0]
    accepted, records = [], []
    for i, (doc, p) in enumerate(zip(docs, probs)):
        snapshot = tuple(float(x) for x in p)
        c = candidate_class(p, config.lambdas)
        if c is None:
            records.append(SelectionRecord(i, snapshot, None, "confidence"))
            continue
        matches = match_count(lexicon, c, doc) if config.tau > 0 else None
        passed = regulate(lexicon, (doc, c), config.tau)
        if entropy_gate(p, c, config.lambdas, passed):
            accepted.append((doc, one_hot(c, float(p[c]))))
            records.append(SelectionRecord(i, snapshot, c, "none", matches))
        else:
            reason = "lexicon" if not passed else "confidence"
            records.append(SelectionRecord(i, snapshot, None, reason, matches))
    return accepted, records
