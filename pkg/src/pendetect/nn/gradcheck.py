"""Finite-difference verification of the analytic gradients.

Both passes run in eval mode, so dropout settings cannot influence the
comparison. The check perturbs every single parameter entry; it is meant
for small instances, where the cost of two forwards per entry is nothing.
"""

from __future__ import annotations

import numpy as np

from .losses import bce_logit_grad, bce_loss
from .model import SequenceClassifier


def gradient_check(
    model: SequenceClassifier,
    values: np.ndarray,
    y: int,
    epsilon: float = 1e-4,
) -> float:
    """Max over parameters of |analytic - numeric| / max(|a| + |n|, 1e-8)."""
    if not 1e-6 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon must be in [1e-6, 1e-3], got {epsilon}")

    model.zero_grads()
    p = model.forward(values, train=False)
    model.backward(bce_logit_grad(p, y))
    analytic = {key: g.copy() for key, g in model.grads().items()}

    worst = 0.0
    for key, theta in model.params().items():
        flat = theta.reshape(-1)
        analytic_flat = analytic[key].reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + epsilon
            loss_plus = bce_loss(model.forward(values, train=False), y)
            flat[i] = original - epsilon
            loss_minus = bce_loss(model.forward(values, train=False), y)
            flat[i] = original
            numeric = (loss_plus - loss_minus) / (2.0 * epsilon)
            a = analytic_flat[i]
            rel = abs(a - numeric) / max(abs(a) + abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst
