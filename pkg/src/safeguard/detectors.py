"""Per-concept detectors: small MLPs on features, plus table ingestion.

Each concept gets its own single-hidden-layer network (tanh hidden, sigmoid
output) trained by mini-batch SGD on logistic loss. Detectors never see
other concepts' labels. Calibration attaches a PlattScaler fit on a holdout
split. External datasets arrive as precomputed probability tables.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from ._numeric import sigmoid
from .gate import PlattScaler, fit_platt
from .types import ConceptProbabilityVector, Dataset

__all__ = [
    "ConceptDetector",
    "DetectorTrainConfig",
    "ProbabilityTable",
    "train_detectors",
    "predict_concepts",
    "predict_concepts_batch",
    "calibrate_detectors",
    "ingest_probability_table",
    "write_probability_table",
]

logger = logging.getLogger(__name__)

_FMT = "{:.16e}"


@dataclass(frozen=True)
class DetectorTrainConfig:
    hidden: int = 16
    learning_rate: float = 0.05
    epochs: int = 200
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.hidden < 1:
            raise ValueError("hidden width must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch size must be >= 1")


@dataclass(frozen=True)
class ConceptDetector:
    """d -> hidden tanh -> scalar sigmoid, with an optional output scaler."""
    w1: np.ndarray          # (d, hidden)
    b1: np.ndarray          # (hidden,)
    w2: np.ndarray          # (hidden,)
    b2: float
    scaler: PlattScaler | None = None

    def __post_init__(self):
        for name in ("w1", "b1", "w2"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "b2", float(self.b2))
        if self.w1.ndim != 2 or self.b1.shape != (self.w1.shape[1],) \
                or self.w2.shape != (self.w1.shape[1],):
            raise ValueError("inconsistent detector parameter shapes")

    @property
    def d(self) -> int:
        return self.w1.shape[0]

    def raw_scores(self, X: np.ndarray) -> np.ndarray:
        """Uncalibrated sigmoid outputs for a (n, d) feature matrix."""
        X = np.asarray(X, dtype=float)
        hidden = np.tanh(X @ self.w1 + self.b1)
        return sigmoid(hidden @ self.w2 + self.b2)

    def scores(self, X: np.ndarray) -> np.ndarray:
        raw = self.raw_scores(X)
        return self.scaler.apply(raw) if self.scaler is not None else raw


def _train_one(X: np.ndarray, y: np.ndarray, config: DetectorTrainConfig,
               rng: np.random.Generator) -> ConceptDetector:
    n, d = X.shape
    h = config.hidden
    w1 = rng.normal(0.0, 1.0, size=(d, h)) / np.sqrt(d)
    b1 = np.zeros(h)
    w2 = rng.normal(0.0, 1.0, size=h) / np.sqrt(h)
    b2 = 0.0
    lr = config.learning_rate
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb, yb = X[idx], y[idx]
            a1 = np.tanh(xb @ w1 + b1)
            p = sigmoid(a1 @ w2 + b2)
            dz2 = (p - yb) / len(idx)
            dw2 = a1.T @ dz2
            db2 = dz2.sum()
            dz1 = np.outer(dz2, w2) * (1.0 - a1 * a1)
            dw1 = xb.T @ dz1
            db1 = dz1.sum(axis=0)
            w1 -= lr * dw1
            b1 -= lr * db1
            w2 -= lr * dw2
            b2 -= lr * db2
    return ConceptDetector(w1=w1, b1=b1, w2=w2, b2=b2)


def train_detectors(dataset: Dataset,
                    config: DetectorTrainConfig = DetectorTrainConfig()
                    ) -> list[ConceptDetector]:
    """One detector per concept; rows missing that concept's label are skipped.

    Each concept trains from its own substream of the seed, so detector k
    is unaffected by how many other concepts exist.
    """
    X = dataset.features.astype(float)
    seeds = np.random.SeedSequence(config.seed).spawn(dataset.m)
    detectors = []
    for k in range(dataset.m):
        labels = dataset.concepts[:, k]
        mask = labels >= 0
        yk = labels[mask].astype(float)
        if yk.size == 0 or yk.min() == yk.max():
            raise ValueError(
                f"concept {k}: degenerate labels: need both classes present")
        rng = np.random.Generator(np.random.Philox(seeds[k]))
        detectors.append(_train_one(X[mask], yk, config, rng))
    return detectors


def predict_concepts(detectors, x) -> ConceptProbabilityVector:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != detectors[0].d:
        raise ValueError(
            f"feature dimension mismatch: expected {detectors[0].d}")
    q = np.array([det.scores(x[None, :])[0] for det in detectors])
    return ConceptProbabilityVector(q)


def predict_concepts_batch(detectors, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != detectors[0].d:
        raise ValueError(
            f"feature dimension mismatch: expected {detectors[0].d}")
    return np.column_stack([det.scores(X) for det in detectors])


def calibrate_detectors(detectors, holdout: Dataset) -> list[ConceptDetector]:
    """Fit a per-concept PlattScaler on holdout (score, label) pairs.

    Concepts whose holdout labels are single-class keep their raw outputs;
    a warning is logged for each skipped concept.
    """
    X = holdout.features.astype(float)
    out = []
    for k, det in enumerate(detectors):
        labels = holdout.concepts[:, k]
        mask = labels >= 0
        yk = labels[mask].astype(float)
        if yk.size == 0 or yk.min() == yk.max():
            logger.warning(
                "concept %d: single-class holdout labels, skipping calibration", k)
            out.append(det)
            continue
        raw = det.raw_scores(X[mask])
        out.append(replace(det, scaler=fit_platt(raw, yk)))
    return out


@dataclass(frozen=True)
class ProbabilityTable:
    """Precomputed concept probabilities for instances of an external dataset."""
    ids: tuple
    probs: np.ndarray                      # (n, m) in [0, 1]
    labels: np.ndarray                     # (n,) integer labels
    concepts: np.ndarray | None = None     # (n, m) hard truths, when known

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        labels = np.asarray(self.labels, dtype=np.int64)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "ids", tuple(self.ids))
        if self.concepts is not None:
            c = np.asarray(self.concepts, dtype=np.int8)
            c.setflags(write=False)
            object.__setattr__(self, "concepts", c)
        n = len(self.ids)
        if probs.ndim != 2 or probs.shape[0] != n or labels.shape != (n,):
            raise ValueError("inconsistent table shapes")
        if self.concepts is not None and self.concepts.shape != probs.shape:
            raise ValueError("concepts shape must match probs shape")

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def m(self) -> int:
        return self.probs.shape[1]


def _table_header(m: int, with_concepts: bool) -> str:
    cols = ["id"] + [f"q{k + 1}" for k in range(m)]
    if with_concepts:
        cols += [f"c{k + 1}" for k in range(m)]
    cols.append("y")
    return ",".join(cols)


def ingest_probability_table(path) -> ProbabilityTable:
    with open(path) as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        if len(cols) < 3 or cols[0] != "id" or cols[-1] != "y":
            raise ValueError(f"malformed header: {header!r}")
        body = cols[1:-1]
        m = sum(1 for c in body if c.startswith("q"))
        with_concepts = len(body) == 2 * m
        if m < 1 or header != _table_header(m, with_concepts):
            raise ValueError(f"malformed header: {header!r}")

        ids, probs, concepts, labels = [], [], [], []
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(cols):
                raise ValueError(
                    f"row {line_no}: expected {len(cols)} fields, got {len(parts)}")
            ids.append(parts[0])
            try:
                q = [float(v) for v in parts[1:1 + m]]
                if with_concepts:
                    c = [int(v) for v in parts[1 + m:1 + 2 * m]]
                y = int(parts[-1])
            except ValueError as exc:
                raise ValueError(f"row {line_no}: non-numeric field") from exc
            for k, v in enumerate(q):
                if not 0.0 <= v <= 1.0:
                    raise ValueError(
                        f"row {line_no}: q{k + 1} = {v} outside [0, 1]")
            probs.append(q)
            if with_concepts:
                concepts.append(c)
            labels.append(y)

    n = len(ids)
    return ProbabilityTable(
        ids=tuple(ids),
        probs=np.array(probs, dtype=float).reshape(n, m),
        labels=np.array(labels, dtype=np.int64),
        concepts=np.array(concepts, dtype=np.int8).reshape(n, m)
        if with_concepts else None,
    )


def write_probability_table(table: ProbabilityTable, path) -> None:
    with open(path, "w") as fh:
        fh.write(_table_header(table.m, table.concepts is not None) + "\n")
        for i in range(table.n):
            parts = [str(table.ids[i])]
            parts += [_FMT.format(v) for v in table.probs[i]]
            if table.concepts is not None:
                parts += [str(int(v)) for v in table.concepts[i]]
            parts.append(str(int(table.labels[i])))
            fh.write(",".join(parts) + "\n")
