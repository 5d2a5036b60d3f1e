"""Budgeted selection of concepts for human confirmation.

The value of confirming concept k of an instance with concept probabilities q
is the variance of the propagated prediction under the Bernoulli draw of that
concept:

    gain(q, k) = q_k (1 - q_k) * (f(q[k <- 1]) - f(q[k <- 0]))^2

Greedy selection repeatedly takes the highest-gain (instance, concept) pair
across all abstained instances until the budget stops it. Gains are computed
once from the original vectors; the plan is static and does not replan on
simulated confirmation outcomes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .propagation import propagate_exact
from .types import PartiallyConfirmedVector

__all__ = [
    "ConfirmationCosts",
    "ConfirmationBudget",
    "PlanEntry",
    "ConfirmationPlan",
    "gain",
    "gain_batch",
    "greedy_select",
    "random_select",
    "apply_confirmation",
    "budget_from_fraction",
    "write_plan",
]


@dataclass(frozen=True)
class ConfirmationCosts:
    """Per-concept confirmation costs, all strictly positive."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1:
            raise ValueError("costs must be a 1-D array")
        if np.any(arr <= 0.0) or not np.all(np.isfinite(arr)):
            raise ValueError("costs must be strictly positive and finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def unit(cls, m: int) -> "ConfirmationCosts":
        return cls(np.ones(m))

    @property
    def m(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ConfirmationBudget:
    """Total spend allowed. strict=True skips pairs that would overspend;
    strict=False reproduces the repeat-until-negative loop, which permits one
    overspending selection before stopping.
    """

    budget: float
    strict: bool = True

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be >= 0")


@dataclass(frozen=True)
class PlanEntry:
    instance_id: Any
    concept: int
    gain: float
    cost: float


@dataclass(frozen=True)
class ConfirmationPlan:
    entries: tuple = ()

    @property
    def total_cost(self) -> float:
        return float(sum(e.cost for e in self.entries))

    @property
    def selections(self) -> dict:
        """instance id -> concept indices in selection order."""
        out: dict = {}
        for e in self.entries:
            out.setdefault(e.instance_id, []).append(e.concept)
        return out

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            key = (e.instance_id, e.concept)
            if key in seen:
                raise ValueError(f"duplicate selection {key}")
            seen.add(key)


def _q_values(q) -> np.ndarray:
    return np.asarray(getattr(q, "values", q), dtype=float)


def gain(model, q, k: int) -> float:
    """Expected squared movement of the prediction from confirming concept k.

    Returns exactly 0.0 when q_k is already hard. For tabular (multiclass)
    models the gain is computed on the probability of the current argmax
    class.
    """
    arr = _q_values(q)
    if not 0 <= k < arr.shape[0]:
        raise ValueError(f"concept index {k} out of range")
    qk = float(arr[k])
    if qk == 0.0 or qk == 1.0:
        return 0.0
    hi = arr.copy()
    hi[k] = 1.0
    lo = arr.copy()
    lo[k] = 0.0
    f_hi = propagate_exact(model, hi)
    f_lo = propagate_exact(model, lo)
    if model.kind == "tabular":
        cls = int(np.argmax(propagate_exact(model, arr)))
        f_hi = float(f_hi[cls])
        f_lo = float(f_lo[cls])
    return qk * (1.0 - qk) * (f_hi - f_lo) ** 2


def gain_batch(model, P) -> np.ndarray:
    """gain for every (row, concept) pair of a (n, m) probability matrix."""
    from .propagation import propagate_exact_batch

    P = np.asarray(P, dtype=float)
    n, m = P.shape
    out = np.empty((n, m))
    if model.kind == "tabular":
        base = propagate_exact_batch(model, P)
        cls = np.argmax(base, axis=1)
    for k in range(m):
        hi = P.copy()
        hi[:, k] = 1.0
        lo = P.copy()
        lo[:, k] = 0.0
        f_hi = propagate_exact_batch(model, hi)
        f_lo = propagate_exact_batch(model, lo)
        if model.kind == "tabular":
            rows = np.arange(n)
            f_hi = f_hi[rows, cls]
            f_lo = f_lo[rows, cls]
        out[:, k] = P[:, k] * (1.0 - P[:, k]) * (f_hi - f_lo) ** 2
    # entries already hard carry exactly zero gain
    hard = (P == 0.0) | (P == 1.0)
    out[hard] = 0.0
    return out


def _ranked_pairs(abstained, model):
    ranked = []
    for instance_id, q in abstained:
        arr = _q_values(q)
        for k in range(arr.shape[0]):
            ranked.append((gain(model, q, k), instance_id, k))
    # highest gain first; ties broken by smaller instance id, then concept index
    ranked.sort(key=lambda t: (-t[0], t[1], t[2]))
    return ranked


def _walk(ranked, costs, budget: ConfirmationBudget):
    entries = []
    remaining = float(budget.budget)
    if budget.strict:
        for g, instance_id, k in ranked:
            c = float(costs.values[k])
            if c <= remaining:
                entries.append(PlanEntry(instance_id, k, float(g), c))
                remaining -= c
    else:
        for g, instance_id, k in ranked:
            c = float(costs.values[k])
            entries.append(PlanEntry(instance_id, k, float(g), c))
            remaining -= c
            if remaining < 0:
                break
    return ConfirmationPlan(entries=tuple(entries))


def greedy_select(abstained, model, costs: ConfirmationCosts,
                  budget: ConfirmationBudget, gains=None) -> ConfirmationPlan:
    """Static greedy: rank all (instance, concept) pairs by gain once, then
    select down the ranking under the budget semantics.

    abstained is a sequence of (instance id, concept probability vector).
    With unit costs and strict budgeting this selects exactly the top-floor(B)
    pairs by (gain, id, concept index) order. gains, when given, is a
    precomputed (len(abstained), m) matrix (as from gain_batch) used in place
    of per-pair gain() calls; the ranking is identical.
    """
    if gains is None:
        ranked = _ranked_pairs(abstained, model)
    else:
        arr = np.asarray(gains, dtype=float)
        if arr.shape[0] != len(abstained):
            raise ValueError("gains row count must match abstained")
        ranked = [
            (float(arr[i, k]), instance_id, k)
            for i, (instance_id, _) in enumerate(abstained)
            for k in range(arr.shape[1])
        ]
        ranked.sort(key=lambda t: (-t[0], t[1], t[2]))
    return _walk(ranked, costs, budget)


def random_select(abstained, costs: ConfirmationCosts, budget: ConfirmationBudget,
                  seed: int = 0) -> ConfirmationPlan:
    """Uniformly ordered selection over all (instance, concept) pairs, seeded.

    Gains are not evaluated (no model is consulted); plan entries carry 0.0.
    """
    pairs = []
    for instance_id, q in abstained:
        arr = _q_values(q)
        for k in range(arr.shape[0]):
            pairs.append((instance_id, k))
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pairs))
    ranked = [(0.0, *pairs[i]) for i in order]
    return _walk(ranked, costs, budget)


def apply_confirmation(q, selected, truth) -> PartiallyConfirmedVector:
    """Replace the selected entries of q with their ground-truth values."""
    arr = _q_values(q).copy()
    truth_arr = np.asarray(getattr(truth, "values", truth), dtype=float)
    if truth_arr.shape != arr.shape:
        raise ValueError("truth must have the same shape as q")
    confirmed = set(getattr(q, "confirmed", frozenset()))
    for k in selected:
        k = int(k)
        v = float(truth_arr[k])
        if v not in (0.0, 1.0):
            raise ValueError(f"ground-truth concept {k} must be 0 or 1, got {v}")
        arr[k] = v
        confirmed.add(k)
    return PartiallyConfirmedVector(values=arr, confirmed=frozenset(confirmed))


def budget_from_fraction(fraction: float, n_abstained: int, m: int) -> float:
    """Convert a fractional budget into absolute spend at unit costs: the
    fraction of all confirmable slots (abstained instances x concepts).
    """
    if fraction < 0:
        raise ValueError("budget fraction must be >= 0")
    return float(fraction) * n_abstained * m


def write_plan(plan: ConfirmationPlan, path) -> None:
    """One line per selection, in selection order: instance_id,concept_index,gain,cost."""
    with open(path, "w") as fh:
        fh.write("instance_id,concept_index,gain,cost\n")
        for e in plan.entries:
            fh.write(f"{e.instance_id},{e.concept},{e.gain:.12g},{e.cost:.12g}\n")
