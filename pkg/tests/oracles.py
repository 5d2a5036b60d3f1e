"""Independent oracles the test suite checks the library against.

Everything here is written from the definitions alone, in plain Python with
math/itertools, sharing no code path with the package internals. Slow on
purpose; correctness is the only goal.
"""
from __future__ import annotations

import itertools
import math


def logistic(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def logistic_corner(weights, intercept, corner) -> float:
    z = intercept
    for w, c in zip(weights, corner):
        z += w * c
    return logistic(z)


def propagate_oracle(corner_fn, p) -> float:
    """Brute-force marginalization: sum over every corner of the hypercube,
    weighting by the product of independent Bernoulli probabilities."""
    m = len(p)
    total = 0.0
    for corner in itertools.product((0, 1), repeat=m):
        w = 1.0
        for k in range(m):
            w *= p[k] if corner[k] == 1 else (1.0 - p[k])
        total += w * corner_fn(corner)
    return total


def propagate_oracle_logistic(weights, intercept, p) -> float:
    return propagate_oracle(
        lambda c: logistic_corner(weights, intercept, c), p)


def gain_oracle(corner_fn, p, k) -> float:
    """Two-point variance of the propagated score under the Bernoulli draw
    of concept k: q(1-q) * (f(p[k<-1]) - f(p[k<-0]))^2."""
    qk = p[k]
    hi = list(p)
    hi[k] = 1.0
    lo = list(p)
    lo[k] = 0.0
    f_hi = propagate_oracle(corner_fn, hi)
    f_lo = propagate_oracle(corner_fn, lo)
    return qk * (1.0 - qk) * (f_hi - f_lo) ** 2


def gain_oracle_logistic(weights, intercept, p, k) -> float:
    return gain_oracle(
        lambda c: logistic_corner(weights, intercept, c), p, k)


def greedy_oracle(pairs_with_gains, budget: float):
    """Global sort by (gain desc, id asc, concept asc), then the first
    floor(budget) pairs at unit costs.

    pairs_with_gains: iterable of (gain, instance_id, concept).
    """
    ranked = sorted(pairs_with_gains, key=lambda t: (-t[0], t[1], t[2]))
    take = int(math.floor(budget + 1e-12))
    return {(iid, k) for _, iid, k in ranked[:take]}


def selective_stats(scores, labels, tau: float):
    """Gate by hand: predict 0 below tau, 1 above 1 - tau, endpoints always
    covered; returns (coverage, selective accuracy or None)."""
    n = len(scores)
    n_cov = 0
    n_correct = 0
    for s, y in zip(scores, labels):
        if s == 0.0 or s < tau:
            pred = 0
        elif s == 1.0 or s > 1.0 - tau:
            pred = 1
        else:
            continue
        n_cov += 1
        n_correct += int(pred == y)
    if n_cov == 0:
        return 0.0, None
    return n_cov / n, n_correct / n_cov


def ece_oracle(scores, labels, n_bins: int) -> float:
    """Equal-width-bin expected calibration error, from the definition."""
    bins = [[] for _ in range(n_bins)]
    for s, y in zip(scores, labels):
        idx = min(int(s * n_bins), n_bins - 1)
        bins[idx].append((s, y))
    n = len(scores)
    total = 0.0
    for bucket in bins:
        if not bucket:
            continue
        mean_s = sum(s for s, _ in bucket) / len(bucket)
        mean_y = sum(y for _, y in bucket) / len(bucket)
        total += (len(bucket) / n) * abs(mean_s - mean_y)
    return total
