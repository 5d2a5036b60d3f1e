"""Core value types shared across the package."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = [
    "ABSTAIN",
    "ConceptProbabilityVector",
    "PartiallyConfirmedVector",
    "Instance",
    "Dataset",
]


class _Abstain:
    """Sentinel gate decision, distinct from every class label."""

    __slots__ = ()

    def __repr__(self):
        return "ABSTAIN"

    def __bool__(self):
        return False


ABSTAIN = _Abstain()


def _as_prob_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D probability vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("probability vector contains non-finite entries")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("probability entries must lie in [0, 1]")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ConceptProbabilityVector:
    """Per-concept presence probabilities q with every entry in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_prob_array(self.values))

    @property
    def m(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class PartiallyConfirmedVector:
    """A concept vector where confirmed entries are hard 0/1 and the rest stay soft."""

    values: np.ndarray
    confirmed: frozenset = frozenset()

    def __post_init__(self):
        arr = _as_prob_array(self.values)
        object.__setattr__(self, "values", arr)
        conf = frozenset(int(k) for k in self.confirmed)
        object.__setattr__(self, "confirmed", conf)
        for k in conf:
            if k < 0 or k >= arr.shape[0]:
                raise ValueError(f"confirmed index {k} out of range for m={arr.shape[0]}")
            if arr[k] not in (0.0, 1.0):
                raise ValueError(f"confirmed entry {k} must be hard 0 or 1, got {arr[k]}")

    @property
    def m(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Instance:
    """One example: features, optional ground-truth concepts, optional label."""

    id: Any
    features: np.ndarray | None = None
    concepts: np.ndarray | None = None
    label: int | None = None


@dataclass
class Dataset:
    """Columnar dataset of (features x, concepts c, label y) rows.

    concepts uses -1 to mark a missing concept label. concept_probs
    optionally carries precomputed detector outputs aligned row-wise.
    """

    features: np.ndarray                      # (n, d)
    concepts: np.ndarray                      # (n, m), int, -1 = missing
    labels: np.ndarray                        # (n,)
    concept_probs: np.ndarray | None = None   # (n, m) floats in [0, 1]
    ids: np.ndarray | None = None             # (n,) opaque row ids

    def __post_init__(self):
        self.features = np.asarray(self.features)
        self.concepts = np.asarray(self.concepts, dtype=np.int8)
        self.labels = np.asarray(self.labels)
        n = self.features.shape[0]
        if self.concepts.shape[0] != n or self.labels.shape[0] != n:
            raise ValueError("features, concepts, and labels must have matching row counts")
        if self.concept_probs is not None:
            self.concept_probs = np.asarray(self.concept_probs, dtype=float)
            if self.concept_probs.shape != self.concepts.shape:
                raise ValueError("concept_probs shape must match concepts")
        if self.ids is None:
            self.ids = np.arange(n)
        else:
            self.ids = np.asarray(self.ids)
            if self.ids.shape[0] != n:
                raise ValueError("ids must have one entry per row")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.concepts.shape[1]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(
            features=self.features[idx],
            concepts=self.concepts[idx],
            labels=self.labels[idx],
            concept_probs=None if self.concept_probs is None else self.concept_probs[idx],
            ids=self.ids[idx],
        )
