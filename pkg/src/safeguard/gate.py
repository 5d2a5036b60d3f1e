"""Selective gate, accuracy/coverage curves, and score calibration.

The gate turns a soft score into a prediction or an abstention. For a binary
score ybar and threshold tau in [0, 0.5]:

    predict 0      if ybar in [0, tau)
    ABSTAIN        if ybar in [tau, 1 - tau]
    predict 1      if ybar in (1 - tau, 1]

Scores exactly 0 or 1 are always covered, which keeps the tau = 0 gate
meaningful (it abstains everywhere else). A calibrated score admits the
selective-accuracy guarantee: accuracy on covered examples is at least
1 - tau in expectation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._numeric import logistic_gd, logit, sigmoid
from .types import ABSTAIN

__all__ = [
    "apply_gate",
    "CurvePoint",
    "accuracy_coverage_curve",
    "PlattScaler",
    "fit_platt",
    "expected_calibration_error",
    "tune_threshold",
    "write_curve_points",
    "default_tau_grid",
]

_SCORE_CLIP = 1e-6


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 <= tau <= 0.5:
        raise ValueError(f"tau must lie in [0, 0.5], got {tau}")
    return tau


def apply_gate(score, tau: float):
    """Gate one soft score. Accepts a binary probability or a class vector."""
    tau = _check_tau(tau)
    arr = np.asarray(score, dtype=float)
    if arr.ndim == 0:
        s = float(arr)
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {s}")
        if s == 0.0 or s < tau:
            return 0
        if s == 1.0 or s > 1.0 - tau:
            return 1
        return ABSTAIN
    if arr.ndim != 1:
        raise ValueError("score must be a scalar or a 1-D class-probability vector")
    top = int(np.argmax(arr))
    p = float(arr[top])
    if p == 1.0 or p > 1.0 - tau:
        return top
    return ABSTAIN


def _decisions_binary(scores: np.ndarray, tau: float):
    """Vectorized binary gate: returns (covered mask, predictions on covered rows)."""
    cov0 = (scores < tau) | (scores == 0.0)
    cov1 = (scores > 1.0 - tau) | (scores == 1.0)
    covered = cov0 | cov1
    preds = np.where(cov1, 1, 0)
    return covered, preds


def _decisions_multiclass(scores: np.ndarray, tau: float):
    top = np.argmax(scores, axis=1)
    p = scores[np.arange(scores.shape[0]), top]
    covered = (p > 1.0 - tau) | (p == 1.0)
    return covered, top


def gate_decisions(scores, tau: float):
    """Vectorized gate over an array of scores; returns (covered, predictions)."""
    tau = _check_tau(tau)
    arr = np.asarray(scores, dtype=float)
    if arr.ndim == 1:
        return _decisions_binary(arr, tau)
    if arr.ndim == 2:
        return _decisions_multiclass(arr, tau)
    raise ValueError("scores must be (n,) binary or (n, k) multiclass")


@dataclass(frozen=True)
class CurvePoint:
    tau: float
    coverage: float
    selective_accuracy: float | None   # None when nothing is covered
    n_covered: int


def default_tau_grid(step: float = 0.005) -> np.ndarray:
    n = int(round(0.5 / step))
    return np.array([i * step for i in range(n + 1)])


def accuracy_coverage_curve(scores, labels, tau_grid) -> list[CurvePoint]:
    """Evaluate the gate on a grid of thresholds.

    Coverage is the fraction of examples not abstained on; selective accuracy
    is accuracy among covered examples (None when coverage is zero).
    n_covered is non-decreasing in tau.
    """
    arr = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if arr.shape[0] == 0:
        raise ValueError("empty inputs: need at least one (score, label) pair")
    if y.shape[0] != arr.shape[0]:
        raise ValueError("dimension mismatch between scores and labels")
    points = []
    n = arr.shape[0]
    for tau in tau_grid:
        covered, preds = gate_decisions(arr, float(tau))
        n_cov = int(covered.sum())
        if n_cov == 0:
            acc = None
        else:
            acc = float(np.mean(preds[covered] == y[covered]))
        points.append(CurvePoint(
            tau=float(tau), coverage=n_cov / n, selective_accuracy=acc, n_covered=n_cov,
        ))
    return points


@dataclass(frozen=True)
class PlattScaler:
    """Affine recalibration in log-odds space: s -> sigmoid(a * logit(s) + b)."""

    a: float
    b: float

    def apply(self, scores):
        arr = np.asarray(scores, dtype=float)
        clipped = np.clip(arr, _SCORE_CLIP, 1.0 - _SCORE_CLIP)
        out = sigmoid(self.a * logit(clipped) + self.b)
        if arr.ndim == 0:
            return float(out)
        return out


def fit_platt(scores, labels, learning_rate: float = 0.5, epochs: int = 1000) -> PlattScaler:
    """Fit (a, b) by gradient descent on the logistic loss of a * logit(s) + b.

    Scores are clipped to [1e-6, 1 - 1e-6] before the logit. The feature is
    standardized internally for conditioning; the returned scaler is expressed
    in the original log-odds scale. Deterministic (zero initialization).
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.shape[0] == 0:
        raise ValueError("empty inputs")
    if s.shape[0] != y.shape[0]:
        raise ValueError("dimension mismatch between scores and labels")
    classes = np.unique(y)
    if not np.array_equal(np.sort(classes), np.array([0, 1])):
        raise ValueError("degenerate labels: calibration needs both classes")
    x = logit(np.clip(s, _SCORE_CLIP, 1.0 - _SCORE_CLIP))
    mu = float(np.mean(x))
    sd = float(np.std(x))
    if sd == 0.0:
        # constant scores carry no signal; slope stays 0 and b fits the base rate
        xs = np.zeros_like(x)
    else:
        xs = (x - mu) / sd
    w, b0, _ = logistic_gd(xs[:, None], y.astype(float),
                           learning_rate=learning_rate, epochs=epochs)
    if sd == 0.0:
        return PlattScaler(a=0.0, b=float(b0))
    a = float(w[0]) / sd
    return PlattScaler(a=a, b=float(b0) - a * mu)


def expected_calibration_error(scores, labels, n_bins: int = 10) -> float:
    """ECE with equal-width bins on [0, 1]; bins are left-closed, the last
    bin also right-closed. Emptiness is an error; empty bins contribute 0.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=float)
    if s.shape[0] == 0:
        raise ValueError("empty inputs")
    if s.shape[0] != y.shape[0]:
        raise ValueError("dimension mismatch between scores and labels")
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    idx = np.minimum((s * n_bins).astype(int), n_bins - 1)
    n = s.shape[0]
    ece = 0.0
    for b in range(n_bins):
        mask = idx == b
        cnt = int(mask.sum())
        if cnt == 0:
            continue
        gap = abs(float(np.mean(s[mask])) - float(np.mean(y[mask])))
        ece += (cnt / n) * gap
    return ece


def tune_threshold(scores, labels, target_accuracy: float, step: float = 0.005) -> float:
    """Largest tau on the grid {0, step, ..., 0.5} whose selective accuracy on
    (scores, labels) is at least target_accuracy; 0.0 when no tau qualifies.
    """
    points = accuracy_coverage_curve(scores, labels, default_tau_grid(step))
    best = None
    for pt in points:
        if pt.selective_accuracy is not None and pt.selective_accuracy >= target_accuracy:
            best = pt.tau
    return 0.0 if best is None else best


def write_curve_points(points, path) -> None:
    """Write curve points as delimiter-separated text with a fixed header.

    Floats use 6 decimal places; an undefined selective accuracy is written
    as nan.
    """
    with open(path, "w") as fh:
        fh.write("tau,coverage,selective_accuracy,n_covered\n")
        for pt in points:
            acc = float("nan") if pt.selective_accuracy is None else pt.selective_accuracy
            fh.write(f"{pt.tau:.6f},{pt.coverage:.6f},{acc:.6f},{pt.n_covered}\n")
