"""Shared numeric primitives: stable sigmoid/logit and a full-batch logistic fitter."""
from __future__ import annotations

import numpy as np


def sigmoid(z):
    """Numerically stable logistic function, elementwise."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


def logit(p):
    p = np.asarray(p, dtype=float)
    out = np.log(p) - np.log1p(-p)
    if out.ndim == 0:
        return float(out)
    return out


def logistic_gd(X, y, *, learning_rate, epochs, l2=0.0):
    """Full-batch gradient descent on mean logistic loss plus (l2/2)*|w|^2.

    Starts from zeros, so the fit is deterministic without any seed. The
    intercept is not penalized. Returns (weights, intercept, loss_history)
    where loss_history[t] is the objective at the start of epoch t.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    losses = []
    for _ in range(epochs):
        z = X @ w + b
        # mean of log(1 + e^z) - y*z, computed stably
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * l2 * float(w @ w)
        losses.append(loss)
        g = sigmoid(z) - y
        gw = X.T @ g / n + l2 * w
        gb = float(np.mean(g))
        w = w - learning_rate * gw
        b = b - learning_rate * gb
    return w, b, losses
