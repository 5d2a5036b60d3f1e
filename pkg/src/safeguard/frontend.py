"""Front-end models: hard concept vector in, label probability out.

Two kinds are supported. The logistic kind scores binary labels as
sigmoid(w . c + b). The tabular kind stores Pr(y | c) for every concept
corner c in {0,1}^m and supports multiclass labels. Both serialize to a
versioned text format that round-trips parameters bit-exactly.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from ._numeric import logistic_gd, sigmoid

__all__ = [
    "LogisticFrontEnd",
    "TabularFrontEnd",
    "LogisticTrainConfig",
    "train_frontend_logistic",
    "train_frontend_tabular",
    "frontend_predict",
    "corner_index",
    "save_frontend",
    "load_frontend",
    "dumps_frontend",
    "loads_frontend",
]


@dataclass(frozen=True)
class LogisticFrontEnd:
    """Binary front-end: Pr(y=1 | c) = sigmoid(weights . c + intercept)."""

    weights: np.ndarray
    intercept: float
    loss_history: tuple = ()   # per-epoch training loss; not serialized

    kind = "logistic"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1:
            raise ValueError("weights must be a 1-D array")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    @property
    def n_classes(self) -> int:
        return 2


@dataclass(frozen=True)
class TabularFrontEnd:
    """Multiclass front-end: row r of `table` is Pr(y | c) for the corner with
    index r, where concept k contributes bit 2**k (concept 0 least significant).
    """

    table: np.ndarray   # (2**m, n_classes), rows sum to 1
    m: int

    kind = "tabular"

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 2 or t.shape[0] != 2 ** self.m:
            raise ValueError(f"table must have shape (2**{self.m}, n_classes)")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def n_classes(self) -> int:
        return self.table.shape[1]


@dataclass(frozen=True)
class LogisticTrainConfig:
    learning_rate: float = 0.1
    epochs: int = 500
    l2: float = 1e-4
    seed: int = 0   # kept for interface stability; zero-init makes the fit deterministic


def _as_hard_matrix(concepts) -> np.ndarray:
    c = np.asarray(concepts, dtype=float)
    if c.ndim == 1:
        c = c[None, :]
    if not np.all((c == 0.0) | (c == 1.0)):
        raise ValueError("hard concepts required: entries must be exactly 0 or 1")
    return c


def corner_index(c) -> int:
    """Map a hard concept vector to its row index (concept 0 = least significant bit)."""
    c = np.asarray(c)
    idx = 0
    for k in range(c.shape[0]):
        if c[k]:
            idx |= 1 << k
    return idx


def train_frontend_logistic(concepts, labels, config: LogisticTrainConfig | None = None) -> LogisticFrontEnd:
    """Fit the binary logistic front-end on (hard concept vector, label) pairs.

    Full-batch gradient descent from zero initialization; the loss history is
    recorded on the returned model and is non-increasing for learning rates
    below the stability bound.
    """
    config = config or LogisticTrainConfig()
    C = _as_hard_matrix(concepts)
    y = np.asarray(labels)
    if y.shape[0] != C.shape[0]:
        raise ValueError("dimension mismatch between concepts and labels")
    classes = np.unique(y)
    if not np.array_equal(np.sort(classes), np.array([0, 1])):
        raise ValueError("degenerate labels: training labels must contain both classes 0 and 1")
    w, b, losses = logistic_gd(
        C, y.astype(float),
        learning_rate=config.learning_rate, epochs=config.epochs, l2=config.l2,
    )
    return LogisticFrontEnd(weights=w, intercept=b, loss_history=tuple(losses))


def train_frontend_tabular(concepts, labels, smoothing: float = 1.0,
                           n_classes: int | None = None) -> TabularFrontEnd:
    """Estimate Pr(y | c) per concept corner with additive (Laplace) smoothing.

    Row for corner c is (count(y, c) + smoothing) / (count(c) + smoothing * |Y|).
    Corners unseen in training fall back to the uniform distribution.
    """
    if smoothing < 0:
        raise ValueError("smoothing must be >= 0")
    C = _as_hard_matrix(concepts)
    y = np.asarray(labels, dtype=int)
    if y.shape[0] != C.shape[0]:
        raise ValueError("dimension mismatch between concepts and labels")
    m = C.shape[1]
    if m > 20:
        raise ValueError(f"table too large: m={m} exceeds the 2**20-row limit")
    if np.any(y < 0):
        raise ValueError("labels must be non-negative class indices")
    k = int(y.max()) + 1 if n_classes is None else int(n_classes)
    if k < 2:
        raise ValueError("need at least 2 classes")
    if int(y.max()) >= k:
        raise ValueError("label exceeds declared number of classes")
    rows = 1 << m
    counts = np.zeros((rows, k))
    bit_weights = 1 << np.arange(m)
    idx = (C.astype(np.int64) @ bit_weights).astype(np.int64)
    np.add.at(counts, (idx, y), 1.0)
    totals = counts.sum(axis=1, keepdims=True)
    table = np.empty_like(counts)
    seen = totals[:, 0] > 0
    if smoothing > 0:
        table = (counts + smoothing) / (totals + smoothing * k)
    else:
        table[seen] = counts[seen] / totals[seen]
    table[~seen] = 1.0 / k
    return TabularFrontEnd(table=table, m=m)


def frontend_predict(model, c):
    """Score a single hard concept vector.

    Returns Pr(y=1 | c) as a float for the logistic kind, or the full
    class-probability vector for the tabular kind.
    """
    hard = _as_hard_matrix(c)[0]
    if hard.shape[0] != model.m:
        raise ValueError(f"dimension mismatch: model expects m={model.m}, got {hard.shape[0]}")
    if model.kind == "logistic":
        return float(sigmoid(float(model.weights @ hard) + model.intercept))
    return np.array(model.table[corner_index(hard)])


def frontend_predict_batch(model, C) -> np.ndarray:
    """Vectorized frontend_predict over a (n, m) matrix of hard concept vectors."""
    C = _as_hard_matrix(C)
    if C.shape[1] != model.m:
        raise ValueError(f"dimension mismatch: model expects m={model.m}, got {C.shape[1]}")
    if model.kind == "logistic":
        return sigmoid(C @ model.weights + model.intercept)
    bit_weights = 1 << np.arange(model.m)
    idx = (C.astype(np.int64) @ bit_weights).astype(np.int64)
    return np.array(model.table[idx])


# -- serialization ------------------------------------------------------------
# Text format, one parameter per line in scientific notation with 17
# significant digits (exact double round-trip):
#
#   frontend v1 kind=logistic m=<m>
#   w_1 ... w_m, then the intercept
#
#   frontend v1 kind=tabular m=<m> classes=<k>
#   table entries row-major (corner index outer, class inner)

_FMT = "{:.16e}"


def dumps_frontend(model) -> str:
    buf = io.StringIO()
    if model.kind == "logistic":
        buf.write(f"frontend v1 kind=logistic m={model.m}\n")
        for w in model.weights:
            buf.write(_FMT.format(w) + "\n")
        buf.write(_FMT.format(model.intercept) + "\n")
    elif model.kind == "tabular":
        buf.write(f"frontend v1 kind=tabular m={model.m} classes={model.n_classes}\n")
        for row in model.table:
            for v in row:
                buf.write(_FMT.format(v) + "\n")
    else:
        raise ValueError(f"unknown front-end kind {model.kind!r}")
    return buf.getvalue()


def loads_frontend(text: str):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty front-end file")
    head = lines[0].split()
    if len(head) < 3 or head[0] != "frontend" or head[1] != "v1":
        raise ValueError(f"unrecognized front-end header: {lines[0]!r}")
    fields = dict(part.split("=", 1) for part in head[2:])
    kind = fields.get("kind")
    m = int(fields["m"])
    params = [float(ln) for ln in lines[1:]]
    if kind == "logistic":
        if len(params) != m + 1:
            raise ValueError(f"expected {m + 1} parameters, found {len(params)}")
        return LogisticFrontEnd(weights=np.array(params[:m]), intercept=params[m])
    if kind == "tabular":
        k = int(fields["classes"])
        rows = 1 << m
        if len(params) != rows * k:
            raise ValueError(f"expected {rows * k} parameters, found {len(params)}")
        return TabularFrontEnd(table=np.array(params).reshape(rows, k), m=m)
    raise ValueError(f"unknown front-end kind {kind!r}")


def save_frontend(model, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_frontend(model))


def load_frontend(path):
    with open(path) as fh:
        return loads_frontend(fh.read())
