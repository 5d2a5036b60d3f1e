"""Uncertainty propagation through a front-end model.

The soft score of a concept-probability vector p is the expectation of the
front-end over independent Bernoulli draws of each concept:

    score(p) = sum over corners c in {0,1}^m of
               f(c) * prod_k p_k^{c_k} (1 - p_k)^{1 - c_k}

Exact mode enumerates corners; hard entries (p_k in {0, 1}) collapse their
dimension so only genuinely uncertain concepts are enumerated. Monte Carlo
mode estimates the same expectation from seeded Bernoulli samples.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._numeric import sigmoid
from .frontend import frontend_predict

__all__ = [
    "PropagationConfig",
    "propagate_exact",
    "propagate_mc",
    "propagate",
    "propagate_exact_batch",
]

_MODES = ("exact", "monte-carlo")


@dataclass(frozen=True)
class PropagationConfig:
    mode: str = "exact"
    mc_samples: int = 10_000
    seed: int = 0
    exact_limit: int = 20

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")
        if self.exact_limit < 0:
            raise ValueError("exact_limit must be >= 0")


def _prob_values(p) -> np.ndarray:
    arr = np.asarray(getattr(p, "values", p), dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D probability vector, got shape {arr.shape}")
    if np.any(arr < 0.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
        raise ValueError("probability entries must lie in [0, 1]")
    return arr


def propagate_exact(model, p, exact_limit: int = 20):
    """Exact corner enumeration. Rejects models with m > exact_limit.

    Returns a float for logistic models and a class-probability vector for
    tabular models.
    """
    q = _prob_values(p)
    if q.shape[0] != model.m:
        raise ValueError(f"dimension mismatch: model expects m={model.m}, got {q.shape[0]}")
    if model.m > exact_limit:
        raise ValueError(
            f"use monte-carlo mode: m={model.m} exceeds exact_limit={exact_limit}"
        )
    free = np.flatnonzero((q > 0.0) & (q < 1.0))
    if free.size == 0:
        return frontend_predict(model, q)

    n_corners = 1 << free.size
    corner_ids = np.arange(n_corners)
    weights = np.ones(n_corners)
    for j, k in enumerate(free):
        bit = (corner_ids >> j) & 1
        weights = weights * np.where(bit, q[k], 1.0 - q[k])
    assert abs(float(weights.sum()) - 1.0) < 1e-12, "corner weights must sum to 1"

    if model.kind == "logistic":
        pinned = np.flatnonzero((q == 0.0) | (q == 1.0))
        base = model.intercept
        for k in pinned:
            base += model.weights[k] * q[k]
        logits = np.full(n_corners, base)
        for j, k in enumerate(free):
            bit = (corner_ids >> j) & 1
            logits = logits + bit * model.weights[k]
        return float(weights @ sigmoid(logits))

    # tabular: build each corner's table row index
    idx = np.zeros(n_corners, dtype=np.int64)
    for k in range(model.m):
        if q[k] == 1.0:
            idx |= 1 << k
    for j, k in enumerate(free):
        bit = (corner_ids >> j) & 1
        idx |= (bit.astype(np.int64) << int(k))
    return np.asarray(weights @ model.table[idx])


def propagate_mc(model, p, config: PropagationConfig | None = None):
    """Monte Carlo estimate of the propagated score, deterministic given the seed.

    When every entry of p is already hard the Bernoulli draws are degenerate,
    so the exact front-end value is returned directly.
    """
    config = config or PropagationConfig(mode="monte-carlo")
    q = _prob_values(p)
    if q.shape[0] != model.m:
        raise ValueError(f"dimension mismatch: model expects m={model.m}, got {q.shape[0]}")
    if np.all((q == 0.0) | (q == 1.0)):
        return frontend_predict(model, q)
    rng = np.random.default_rng(config.seed)
    draws = rng.random((config.mc_samples, q.shape[0])) < q
    if model.kind == "logistic":
        return float(np.mean(sigmoid(draws @ model.weights + model.intercept)))
    bit_weights = 1 << np.arange(model.m)
    idx = (draws.astype(np.int64) @ bit_weights).astype(np.int64)
    return np.asarray(model.table[idx].mean(axis=0))


def propagate(model, p, config: PropagationConfig | None = None):
    """Dispatch on config.mode."""
    config = config or PropagationConfig()
    if config.mode == "exact":
        return propagate_exact(model, p, exact_limit=config.exact_limit)
    return propagate_mc(model, p, config)


def propagate_exact_batch(model, P, exact_limit: int = 20) -> np.ndarray:
    """Exact propagation for a (n, m) matrix of probability vectors.

    Enumerates all 2^m corners without per-row collapsing; hard entries
    produce zero-weight corners, so the result matches propagate_exact row
    by row. Returns (n,) scores for logistic models, (n, n_classes) for
    tabular models.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2:
        raise ValueError("expected a 2-D matrix of probability vectors")
    if P.shape[1] != model.m:
        raise ValueError(f"dimension mismatch: model expects m={model.m}, got {P.shape[1]}")
    if np.any(P < 0.0) or np.any(P > 1.0) or not np.all(np.isfinite(P)):
        raise ValueError("probability entries must lie in [0, 1]")
    if model.m > exact_limit:
        raise ValueError(
            f"use monte-carlo mode: m={model.m} exceeds exact_limit={exact_limit}"
        )
    n_corners = 1 << model.m
    corner_ids = np.arange(n_corners)
    weights = np.ones((P.shape[0], n_corners))
    for k in range(model.m):
        bit = (corner_ids >> k) & 1
        col = P[:, k][:, None]
        weights = weights * np.where(bit[None, :], col, 1.0 - col)
    if model.kind == "logistic":
        bits = ((corner_ids[:, None] >> np.arange(model.m)[None, :]) & 1).astype(float)
        corner_scores = sigmoid(bits @ model.weights + model.intercept)
        return weights @ corner_scores
    return weights @ model.table
