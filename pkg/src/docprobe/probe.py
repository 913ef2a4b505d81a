"""Attention-pooled sigmoid-MLP probe with hand-written backprop and Adam.

The probe pools a (T, d) token matrix into one vector with a single learned
query: scores s_t = (x_t . q) / sqrt(d), weights alpha = softmax(s), pooled
v = sum_t alpha_t x_t. A one-hidden-layer sigmoid MLP with softmax output
classifies v. Training minimizes mean cross-entropy with Adam, shuffling each
epoch, and early-stops when dev accuracy fails to improve for ``tenacity``
consecutive epochs; the best-dev parameters are restored before the single
test evaluation.

All gradients are computed analytically in this module (no autograd), in
float64 so independent finite-difference checks hold to tight tolerances.
Checkpoints ("DPM1") store float32.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embedstore import DROPPED, first_token_vector, truncate
from .errors import (
    CorruptFile,
    EmptyInput,
    EmptySplit,
    LayerNotInBundle,
    NonFiniteLoss,
    ShapeMismatch,
)

MODEL_MAGIC = b"DPM1"
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class ProbeConfig:
    nhid: int = 400
    dropout: float = 0.0
    batch_size: int = 8
    max_epoch: int = 1000
    tenacity: int = 10
    attention_heads: int = 1
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.nhid < 1:
            raise ValueError("nhid must be positive")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError("dropout must be in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.max_epoch < 1:
            raise ValueError("max_epoch must be positive")
        if self.tenacity < 1:
            raise ValueError("tenacity must be positive")
        if self.attention_heads != 1:
            raise ValueError("only a single attention head is supported")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class ProbeModel:
    """Parameters: pooling query plus a sigmoid MLP with softmax output."""

    query: np.ndarray  # (d,)
    w1: np.ndarray  # (d, nhid)
    b1: np.ndarray  # (nhid,)
    w2: np.ndarray  # (nhid, n_classes)
    b2: np.ndarray  # (n_classes,)

    def params(self) -> dict[str, np.ndarray]:
        return {"query": self.query, "w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    @property
    def d_in(self) -> int:
        return int(self.w1.shape[0])

    @property
    def n_classes(self) -> int:
        return int(self.w2.shape[1])


def init_model(d_in: int, nhid: int, n_classes: int, rng: np.random.Generator) -> ProbeModel:
    """Xavier-uniform weights, zero biases, zero query (first pool is a mean)."""

    def xavier(fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(np.float64)

    return ProbeModel(
        query=np.zeros(d_in, dtype=np.float64),
        w1=xavier(d_in, nhid),
        b1=np.zeros(nhid, dtype=np.float64),
        w2=xavier(nhid, n_classes),
        b2=np.zeros(n_classes, dtype=np.float64),
    )


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max()
    e = np.exp(shifted)
    return e / e.sum()


def _pool(query: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if x.ndim != 2:
        raise ShapeMismatch(f"input must be 2-D (tokens, dim), got shape {x.shape}")
    if x.shape[0] == 0:
        raise EmptyInput("cannot pool zero token rows")
    if x.shape[1] != query.shape[0]:
        raise ShapeMismatch(f"input dim {x.shape[1]} != query dim {query.shape[0]}")
    scores = (x @ query) / np.sqrt(x.shape[1])
    alpha = _softmax(scores)
    return alpha @ x, alpha


def attention_pool(query: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Pooled vector sum_t alpha_t x_t with alpha = softmax((x q)/sqrt(d))."""
    pooled, _ = _pool(np.asarray(query, dtype=np.float64), np.asarray(x, dtype=np.float64))
    return pooled


def _forward_cached(
    model: ProbeModel,
    x: np.ndarray,
    train_mode: bool,
    rng: np.random.Generator | None,
    dropout: float,
):
    x = np.asarray(x, dtype=np.float64)
    pooled, alpha = _pool(model.query, x)
    z1 = pooled @ model.w1 + model.b1
    hidden = 1.0 / (1.0 + np.exp(-z1))
    if train_mode and dropout > 0.0:
        if rng is None:
            raise ValueError("dropout needs an rng in train mode")
        mask = (rng.random(hidden.shape[0]) >= dropout) / (1.0 - dropout)
    else:
        mask = None
    dropped_hidden = hidden if mask is None else hidden * mask
    z2 = dropped_hidden @ model.w2 + model.b2
    probs = _softmax(z2)
    return x, pooled, alpha, hidden, mask, dropped_hidden, probs


def forward(
    model: ProbeModel,
    x: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
    dropout: float = 0.0,
) -> np.ndarray:
    """Class probabilities for one (T, d) input."""
    return _forward_cached(model, x, train_mode, rng, dropout)[-1]


def loss_and_grads(
    model: ProbeModel,
    batch: list[tuple[np.ndarray, int]],
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    train_mode: bool = True,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and analytic gradients for all params.

    The mean makes the result invariant to duplicating every batch element.
    """
    if not batch:
        raise ValueError("empty batch")
    grads = {name: np.zeros_like(p) for name, p in model.params().items()}
    total = 0.0
    inv_b = 1.0 / len(batch)
    sqrt_d = np.sqrt(model.d_in)
    for x, label in batch:
        if not (0 <= label < model.n_classes):
            raise ValueError(f"label {label} outside [0, {model.n_classes})")
        x, pooled, alpha, hidden, mask, dropped_hidden, probs = _forward_cached(
            model, x, train_mode, rng, dropout
        )
        total += -np.log(max(probs[label], np.finfo(np.float64).tiny))

        dz2 = probs.copy()
        dz2[label] -= 1.0
        grads["w2"] += inv_b * np.outer(dropped_hidden, dz2)
        grads["b2"] += inv_b * dz2
        d_dropped = model.w2 @ dz2
        d_hidden = d_dropped if mask is None else d_dropped * mask
        dz1 = d_hidden * hidden * (1.0 - hidden)
        grads["w1"] += inv_b * np.outer(pooled, dz1)
        grads["b1"] += inv_b * dz1
        d_pooled = model.w1 @ dz1
        d_alpha = x @ d_pooled
        d_scores = alpha * (d_alpha - alpha @ d_alpha)
        grads["query"] += inv_b * (x.T @ d_scores) / sqrt_d

    loss = total * inv_b
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"batch loss is {loss}")
    return float(loss), grads


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: dict[str, tuple[np.ndarray, np.ndarray]],
    lr: float,
    t: int,
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """One Adam update, in place; ``t`` is the 1-based global step count."""
    if t < 1:
        raise ValueError("step count t must be >= 1")
    for name, p in params.items():
        g = grads[name]
        if name not in state:
            state[name] = (np.zeros_like(p), np.zeros_like(p))
        m, v = state[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        m_hat = m / (1.0 - ADAM_BETA1**t)
        v_hat = v / (1.0 - ADAM_BETA2**t)
        p -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return state


@dataclass
class TrainReport:
    best_epoch: int
    dev_accuracy_curve: tuple[float, ...]
    test_accuracy: float
    stopped_reason: str  # "tenacity" or "max_epoch"
    dropped: dict[str, int] = field(default_factory=dict)


def materialize_examples(
    examples, bundle, layer: int, max_tokens: int | None = None
) -> tuple[list[tuple[np.ndarray, int]], int]:
    """Resolve VectorRefs to input matrices; returns (data, n_dropped).

    Token refs become single float64 rows; doc refs use the stored float32
    matrix (cast happens at compute time). ``max_tokens`` re-truncates each
    document to an evaluation-time budget: doc matrices shrink and token refs
    beyond the cut drop. Examples with any dropped or empty input are skipped
    and counted.
    """
    docs: dict[str, object] = {}
    data: list[tuple[np.ndarray, int]] = []
    dropped = 0
    for ex in examples:
        rows = []
        usable = True
        for ref in ex.inputs:
            doc = docs.get(ref.doc)
            if doc is None:
                doc = bundle[ref.doc]
                if max_tokens is not None:
                    doc = truncate(doc, max_tokens)
                docs[ref.doc] = doc
            if ref.kind == "token":
                vec = first_token_vector(doc, layer, ref.word)
                if vec is DROPPED:
                    usable = False
                    break
                rows.append(np.asarray(vec, dtype=np.float64).reshape(1, -1))
            else:
                if layer not in doc.tensors:
                    raise LayerNotInBundle(f"{ref.doc}: layer {layer} not stored")
                mat = doc.tensors[layer]
                if mat.shape[0] == 0:
                    usable = False
                    break
                rows.append(mat)
        if not usable:
            dropped += 1
            continue
        x = rows[0] if len(rows) == 1 else np.vstack(rows)
        data.append((x, int(ex.label)))
    return data, dropped


def _accuracy(model: ProbeModel, data: list[tuple[np.ndarray, int]]) -> float:
    correct = 0
    for x, label in data:
        probs = forward(model, x)
        # np.argmax takes the lowest index on ties.
        if int(np.argmax(probs)) == label:
            correct += 1
    return correct / len(data)


def evaluate(model: ProbeModel, examples, bundle, layer: int, max_tokens: int | None = None) -> float:
    """Accuracy over materialized examples; ties resolve to the lowest class index."""
    data, _ = materialize_examples(examples, bundle, layer, max_tokens)
    if not data:
        raise EmptySplit("no usable examples to evaluate")
    return _accuracy(model, data)


def train(config: ProbeConfig, dataset, bundle, layer: int) -> tuple[ProbeModel, TrainReport]:
    """SentEval-style training loop: Adam, per-epoch shuffle, dev early stopping.

    Stops after ``tenacity`` epochs without strict dev improvement (ties keep
    the earlier epoch) or at ``max_epoch``; restores the best-dev parameters,
    then evaluates test exactly once.
    """
    materialized: dict[str, list] = {}
    dropped: dict[str, int] = {}
    for split in ("train", "dev", "test"):
        data, n_dropped = materialize_examples(dataset.splits.get(split, []), bundle, layer)
        materialized[split] = data
        dropped[split] = n_dropped
        if not data:
            raise EmptySplit(f"{split} split has no usable examples")
    train_data = materialized["train"]
    d_in = int(train_data[0][0].shape[1])

    rng = np.random.Generator(np.random.PCG64(config.seed))
    model = init_model(d_in, config.nhid, dataset.n_classes, rng)
    state: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    step = 0
    best_acc = -1.0
    best_epoch = -1
    best_params: dict[str, np.ndarray] = {}
    stale = 0
    curve: list[float] = []
    stopped_reason = "max_epoch"
    for epoch in range(config.max_epoch):
        order = rng.permutation(len(train_data))
        for start in range(0, len(order), config.batch_size):
            batch = [train_data[i] for i in order[start : start + config.batch_size]]
            loss, grads = loss_and_grads(model, batch, dropout=config.dropout, rng=rng)
            step += 1
            adam_step(model.params(), grads, state, config.learning_rate, step)
        dev_acc = _accuracy(model, materialized["dev"])
        curve.append(dev_acc)
        if dev_acc > best_acc:
            best_acc = dev_acc
            best_epoch = epoch
            best_params = {name: p.copy() for name, p in model.params().items()}
            stale = 0
        else:
            stale += 1
            if stale >= config.tenacity:
                stopped_reason = "tenacity"
                break
    for name, p in model.params().items():
        p[...] = best_params[name]
    test_acc = _accuracy(model, materialized["test"])
    report = TrainReport(
        best_epoch=best_epoch,
        dev_accuracy_curve=tuple(curve),
        test_accuracy=test_acc,
        stopped_reason=stopped_reason,
        dropped=dropped,
    )
    return model, report


def save_model(model: ProbeModel, path: str | Path) -> None:
    """Binary checkpoint: magic "DPM1", u32 (d, nhid, n_classes), float32 params.

    Parameter order: query, w1, b1, w2, b2; little-endian, row-major.
    """
    d, nhid, n_classes = model.d_in, int(model.w1.shape[1]), model.n_classes
    parts = [MODEL_MAGIC, struct.pack("<III", d, nhid, n_classes)]
    for p in (model.query, model.w1, model.b1, model.w2, model.b2):
        parts.append(np.ascontiguousarray(p, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_model(path: str | Path) -> ProbeModel:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != MODEL_MAGIC:
        raise CorruptFile(f"{path}: bad model magic")
    d, nhid, n_classes = struct.unpack_from("<III", data, 4)
    sizes = [d, d * nhid, nhid, nhid * n_classes, n_classes]
    expected = 16 + 4 * sum(sizes)
    if len(data) != expected:
        raise CorruptFile(f"{path}: size {len(data)} != expected {expected}")
    offset = 16
    arrays = []
    for size in sizes:
        arr = np.frombuffer(data, dtype="<f4", count=size, offset=offset).astype(np.float64)
        arrays.append(arr)
        offset += 4 * size
    query, w1, b1, w2, b2 = arrays
    return ProbeModel(
        query=query,
        w1=w1.reshape(d, nhid),
        b1=b1,
        w2=w2.reshape(nhid, n_classes),
        b2=b2,
    )
