"""Attention-pooling text classifier trained from scratch.

Each token embedding is scored by ``u . tanh(A e + b_a)``; the softmax of the
scores weights the embeddings into a context vector, which goes through a
leaky rectifier, dropout and a linear softmax head. The per-token attention
weights are what the lexicon is mined from.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .corpus import Corpus, Document

log = logging.getLogger(__name__)

_NAMES = ("embedding", "attn_proj", "attn_bias", "attn_query", "head_weight", "head_bias")


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class ModelParams:
    embedding: np.ndarray  # (V, d)
    attn_proj: np.ndarray  # (d_a, d)
    attn_bias: np.ndarray  # (d_a,)
    attn_query: np.ndarray  # (d_a,)
    head_weight: np.ndarray  # (C, d)
    head_bias: np.ndarray  # (C,)

    def __post_init__(self):
        V, d = self.embedding.shape
        da = self.attn_proj.shape[0]
        C = self.head_weight.shape[0]
        expected = {
            "attn_proj": (da, d),
            "attn_bias": (da,),
            "attn_query": (da,),
            "head_weight": (C, d),
            "head_bias": (C,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def vocab_size(self) -> int:
        return self.embedding.shape[0]

    @property
    def emb_dim(self) -> int:
        return self.embedding.shape[1]

    @property
    def attn_dim(self) -> int:
        return self.attn_proj.shape[0]

    @property
    def num_classes(self) -> int:
        return self.head_weight.shape[0]

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, name) for name in _NAMES]

    def copy(self) -> "ModelParams":
        return ModelParams(*(a.copy() for a in self.arrays()))

    def zeros_like(self) -> "ModelParams":
        return ModelParams(*(np.zeros_like(a) for a in self.arrays()))

    def is_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())

    def equals(self, other: "ModelParams") -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))

    def to_dict(self) -> dict:
        return {name: getattr(self, name).tolist() for name in _NAMES}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        return cls(*(np.asarray(data[name], dtype=np.float64) for name in _NAMES))


@dataclass(frozen=True)
class ForwardOutput:
    probs: np.ndarray
    attention: np.ndarray
    context: np.ndarray


@dataclass
class TrainConfig:
    learning_rate: float = 5e-3
    weight_decay: float = 0.01
    dropout_rate: float = 0.3
    leaky_slope: float = 0.1
    batch_size: int = 16
    max_epochs: int = 30
    patience: int = 5
    seed: int = 0
    emb_dim: int = 64
    attn_dim: int = 32

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


def init_params(vocab_size: int, emb_dim: int, attn_dim: int, num_classes: int, seed: int) -> ModelParams:
    if min(vocab_size, emb_dim, attn_dim, num_classes) < 1:
        raise ValueError("all dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    return ModelParams(
        embedding=rng.uniform(-0.1, 0.1, (vocab_size, emb_dim)),
        attn_proj=rng.uniform(-0.1, 0.1, (attn_dim, emb_dim)),
        attn_bias=np.zeros(attn_dim),
        attn_query=rng.uniform(-0.1, 0.1, attn_dim),
        head_weight=rng.uniform(-0.1, 0.1, (num_classes, emb_dim)),
        head_bias=np.zeros(num_classes),
    )


def _pack(docs: Sequence[Document]) -> tuple[np.ndarray, np.ndarray]:
    offsets = np.zeros(len(docs) + 1, dtype=np.int64)
    for i, doc in enumerate(docs):
        if doc.tokens is None:
            raise ValueError("document is not encoded against a vocabulary")
        if not doc.tokens:
            raise ValueError("cannot classify empty document")
        offsets[i + 1] = offsets[i] + len(doc.tokens)
    tokens = np.fromiter(
        (t for doc in docs for t in doc.tokens), dtype=np.int64, count=int(offsets[-1])
    )
    return tokens, offsets


def _dropout_masks(rng: np.random.Generator, n: int, d: int, rate: float) -> Optional[np.ndarray]:
    if rate <= 0.0:
        return None
    return (rng.random((n, d)) >= rate) / (1.0 - rate)


def predict(params: ModelParams, docs: Sequence[Document], leaky_slope: float = 0.1):
    """Eval-mode scoring of many documents.

    Returns ``(probs, attention)`` where ``probs`` is ``(N, C)`` and
    ``attention`` is a list of per-document arrays.
    """
    if not docs:
        return np.empty((0, params.num_classes)), []
    tokens, offsets = _pack(docs)
    probs, attn, _ = kernels.forward_batch(*params.arrays(), tokens, offsets, leaky_slope)
    return probs, [attn[offsets[i] : offsets[i + 1]] for i in range(len(docs))]


def forward(
    params: ModelParams,
    doc: Document,
    train_mode: bool = False,
    seed: Optional[int] = None,
    dropout_rate: float = 0.3,
    leaky_slope: float = 0.1,
) -> ForwardOutput:
    tokens, offsets = _pack([doc])
    masks = None
    if train_mode:
        masks = _dropout_masks(np.random.default_rng(seed), 1, params.emb_dim, dropout_rate)
    probs, attn, ctx = kernels.forward_batch(
        *params.arrays(), tokens, offsets, leaky_slope, masks
    )
    return ForwardOutput(probs[0], attn, ctx[0])


def _loss_grad_packed(params, tokens, offsets, labels, slope, masks):
    grads = params.zeros_like()
    total = kernels.loss_grad_batch(
        *params.arrays(), tokens, offsets, labels, slope, masks, *grads.arrays()
    )
    n = len(labels)
    for g in grads.arrays():
        g /= n
    return total / n, grads


def loss_and_grad(
    params: ModelParams,
    batch: Sequence[tuple[Document, int]],
    config: TrainConfig,
    seed: Optional[int] = None,
) -> tuple[float, ModelParams]:
    """Mean cross-entropy over ``batch`` and its exact gradient.

    Dropout uses ``config.dropout_rate`` with a mask drawn from ``seed``
    (``config.seed`` when omitted); set the rate to 0 for a deterministic
    objective.
    """
    if not batch:
        raise ValueError("empty batch")
    docs = [d for d, _ in batch]
    labels = np.array([y for _, y in batch], dtype=np.int64)
    if labels.min() < 0 or labels.max() >= params.num_classes:
        raise ValueError("label out of range")
    tokens, offsets = _pack(docs)
    rng = np.random.default_rng(config.seed if seed is None else seed)
    masks = _dropout_masks(rng, len(docs), params.emb_dim, config.dropout_rate)
    return _loss_grad_packed(params, tokens, offsets, labels, config.leaky_slope, masks)


def _dev_metrics(params, docs, labels, slope):
    probs, _ = predict(params, docs, slope)
    picked = probs[np.arange(len(labels)), labels]
    loss = float(-np.log(np.maximum(picked, np.finfo(float).tiny)).mean())
    acc = float((probs.argmax(axis=1) == labels).mean())
    return loss, acc


def train(
    params: ModelParams,
    train: Corpus | Sequence[tuple[Document, int]],
    dev: Corpus | Sequence[tuple[Document, int]],
    config: TrainConfig,
) -> tuple[ModelParams, list[dict]]:
    """Mini-batch AdamW with early stopping on dev loss.

    Returns the snapshot with the highest dev accuracy (lowest dev loss
    among equal accuracies) and one history dict per epoch.
    """
    pairs = _as_pairs(train)
    dev_pairs = _as_pairs(dev)
    if not pairs:
        raise ValueError("empty training set")
    p = params.copy()
    rng = np.random.default_rng(config.seed)
    b1, b2, eps = 0.9, 0.999, 1e-8
    m = [np.zeros_like(a) for a in p.arrays()]
    v = [np.zeros_like(a) for a in p.arrays()]
    step = 0

    packed = [np.asarray(d.tokens, dtype=np.int64) for d, _ in pairs]
    for d, _ in pairs:
        if not d.tokens:
            raise ValueError("cannot classify empty document")
    labels = np.array([y for _, y in pairs], dtype=np.int64)
    dev_docs = [d for d, _ in dev_pairs]
    dev_labels = np.array([y for _, y in dev_pairs], dtype=np.int64)

    best, best_acc, best_acc_loss = p.copy(), -1.0, np.inf
    best_loss, stale = np.inf, 0
    history = []
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(pairs))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            chunks = [packed[i] for i in idx]
            offsets = np.zeros(len(idx) + 1, dtype=np.int64)
            np.cumsum([len(c) for c in chunks], out=offsets[1:])
            masks = _dropout_masks(rng, len(idx), p.emb_dim, config.dropout_rate)
            loss, grads = _loss_grad_packed(
                p, np.concatenate(chunks), offsets, labels[idx], config.leaky_slope, masks
            )
            if not np.isfinite(loss):
                raise TrainingDiverged("training diverged")
            epoch_loss += loss * len(idx)

            step += 1
            c1, c2 = 1.0 - b1**step, 1.0 - b2**step
            for a, g, mi, vi in zip(p.arrays(), grads.arrays(), m, v):
                mi *= b1
                mi += (1.0 - b1) * g
                vi *= b2
                vi += (1.0 - b2) * g * g
                a -= config.learning_rate * (
                    (mi / c1) / (np.sqrt(vi / c2) + eps) + config.weight_decay * a
                )

        record = {"epoch": epoch, "train_loss": epoch_loss / len(pairs)}
        if not dev_pairs:
            best = p.copy()
            history.append(record)
            continue
        dev_loss, dev_acc = _dev_metrics(p, dev_docs, dev_labels, config.leaky_slope)
        if not np.isfinite(dev_loss) or not p.is_finite():
            raise TrainingDiverged("training diverged")
        record.update(dev_loss=dev_loss, dev_accuracy=dev_acc)
        history.append(record)
        if dev_acc > best_acc or (dev_acc == best_acc and dev_loss < best_acc_loss):
            best, best_acc, best_acc_loss = p.copy(), dev_acc, dev_loss
        if dev_loss < best_loss:
            best_loss, stale = dev_loss, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return best, history


def _as_pairs(data) -> list[tuple[Document, int]]:
    if isinstance(data, Corpus):
        if not data.is_labeled():
            raise ValueError("training data must be labeled")
        return [(ex.doc, ex.label) for ex in data.examples]
    return list(data)


def rank_attention_words(
    doc: Document, attention: np.ndarray, n: int, exclude: frozenset[str] | set[str] = frozenset()
) -> list[str]:
    """Top ``n`` distinct words of ``doc`` by attention, earliest position first on ties."""
    if n < 1:
        raise ValueError("n must be >= 1")
    order = sorted(range(len(attention)), key=lambda i: (-attention[i], i))
    out: list[str] = []
    seen = set()
    for i in order:
        word = doc.token_strings[i]
        if word in seen or word in exclude:
            continue
        seen.add(word)
        out.append(word)
        if len(out) == n:
            break
    return out


def top_attention_words(params: ModelParams, doc: Document, n: int, leaky_slope: float = 0.1) -> list[str]:
    if not doc.token_strings:
        raise ValueError("cannot rank words of an empty document")
    out = forward(params, doc, leaky_slope=leaky_slope)
    return rank_attention_words(doc, out.attention, n)


def save_checkpoint(
    params: ModelParams,
    path: str | Path,
    vocab: Optional[Sequence[str]] = None,
    class_names: Optional[Sequence[str]] = None,
) -> None:
    """Write params as JSON; floats use shortest round-trip repr so reload is bit-exact."""
    data = {
        "dims": {
            "vocab_size": params.vocab_size,
            "emb_dim": params.emb_dim,
            "attn_dim": params.attn_dim,
            "num_classes": params.num_classes,
        },
        "params": params.to_dict(),
    }
    if vocab is not None:
        data["vocab"] = list(vocab)
    if class_names is not None:
        data["class_names"] = list(class_names)
    Path(path).write_text(json.dumps(data), encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[ModelParams, dict]:
    """Return ``(params, extras)`` where extras may hold ``vocab`` and ``class_names``."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    params = ModelParams.from_dict(data["params"])
    dims = data["dims"]
    if (params.vocab_size, params.emb_dim, params.attn_dim, params.num_classes) != (
        dims["vocab_size"], dims["emb_dim"], dims["attn_dim"], dims["num_classes"],
    ):
        raise ValueError(f"{path}: dims header disagrees with matrices")
    extras = {k: data[k] for k in ("vocab", "class_names") if k in data}
    return params, extras
