"""Synthetic parity-concept generator with a known oracle.

Each row draws five binary features x_k ~ Bernoulli(0.7). Concepts are
noisy parities over feature triples:

    c_1 = parity(x_1, x_2, x_4) xor xi_1
    c_2 = parity(x_1, x_2, x_3) xor xi_2
    c_3 = parity(x_1, x_2, x_5) xor xi_3

with each xi_k ~ Bernoulli(noise). The label is drawn from
Pr(y=1 | c) = sigmoid(1*c_1 + 2*c_2 + 3*c_3 - 2), so the generating
front-end and the exact concept posteriors are both known in closed form.

Randomness comes from a Philox counter-based generator keyed by the seed.
Row i consumes exactly the nine uniforms at counter offsets [9i, 9i + 9),
in the order x_1..x_5, xi_1..xi_3, label draw. Output is therefore
bit-identical for a given (n, noise, seed) on any platform, and each row's
substream is independent of every other row's.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._numeric import sigmoid
from .frontend import LogisticFrontEnd
from .types import Dataset

__all__ = [
    "SyntheticConfig",
    "generate",
    "oracle_concept_probs",
    "oracle_frontend",
    "write_dataset",
    "read_dataset",
    "CONCEPT_TRIPLES",
    "GENERATOR_WEIGHTS",
    "GENERATOR_INTERCEPT",
]

FEATURE_RATE = 0.7
CONCEPT_TRIPLES = ((0, 1, 3), (0, 1, 2), (0, 1, 4))   # zero-based feature indices
GENERATOR_WEIGHTS = (1.0, 2.0, 3.0)
GENERATOR_INTERCEPT = -2.0

_DRAWS_PER_ROW = 9   # 5 features, 3 concept-noise bits, 1 label draw


@dataclass(frozen=True)
class SyntheticConfig:
    n: int
    noise: float
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must lie in [0, 1]")


def _parities(features: np.ndarray) -> np.ndarray:
    x = np.asarray(features)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    out = np.empty((x.shape[0], len(CONCEPT_TRIPLES)), dtype=np.int8)
    for k, (a, b, c) in enumerate(CONCEPT_TRIPLES):
        out[:, k] = x[:, a] ^ x[:, b] ^ x[:, c]
    return out[0] if squeeze else out


def generate(config: SyntheticConfig) -> Dataset:
    """Draw a dataset; bit-identical given (n, noise, seed)."""
    rng = np.random.Generator(np.random.Philox(config.seed))
    u = rng.random((config.n, _DRAWS_PER_ROW))
    x = (u[:, :5] < FEATURE_RATE).astype(np.int8)
    flips = (u[:, 5:8] < config.noise).astype(np.int8)
    c = _parities(x) ^ flips
    p = sigmoid(c @ np.array(GENERATOR_WEIGHTS) + GENERATOR_INTERCEPT)
    y = (u[:, 8] < p).astype(np.int8)
    return Dataset(features=x, concepts=c, labels=y)


def oracle_concept_probs(features, noise: float) -> np.ndarray:
    """Exact Pr(c_k = 1 | x): 1 - noise where the parity is 1, else noise."""
    par = _parities(features).astype(float)
    return par * (1.0 - noise) + (1.0 - par) * noise


def oracle_frontend() -> LogisticFrontEnd:
    """The generating label model, as a logistic front-end."""
    return LogisticFrontEnd(weights=np.array(GENERATOR_WEIGHTS),
                            intercept=GENERATOR_INTERCEPT)


_HEADER = "x1,x2,x3,x4,x5,c1,c2,c3,y"


def write_dataset(dataset: Dataset, path) -> None:
    """Plain text, one row per line, integer fields, fixed header."""
    if dataset.d != 5 or dataset.m != 3:
        raise ValueError("dataset writer expects the 5-feature, 3-concept layout")
    with open(path, "w") as fh:
        fh.write(_HEADER + "\n")
        for i in range(dataset.n):
            row = list(dataset.features[i]) + list(dataset.concepts[i]) + [dataset.labels[i]]
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def read_dataset(path) -> Dataset:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != _HEADER:
            raise ValueError(f"unrecognized dataset header: {header!r}")
        rows = []
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 9:
                raise ValueError(f"line {line_no}: expected 9 fields, got {len(parts)}")
            try:
                rows.append([int(v) for v in parts])
            except ValueError as exc:
                raise ValueError(f"line {line_no}: non-integer field") from exc
    if not rows:
        raise ValueError("dataset file has no rows")
    arr = np.array(rows, dtype=np.int8)
    return Dataset(features=arr[:, :5], concepts=arr[:, 5:8], labels=arr[:, 8])
