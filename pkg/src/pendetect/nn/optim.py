"""Adam with bias-corrected moment estimates.

The optimizer holds references to the model's parameter arrays and
updates them in place. Moments are keyed by the same block names as the
parameters, so the state can be inspected or asserted in tests.
"""

from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, params: dict[str, np.ndarray], learning_rate=0.001,
                 beta1=0.9, beta2=0.999, eps=1e-8):
        if learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        self.params = params
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        t = self.step_count
        for key, theta in self.params.items():
            g = grads[key]
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * g * g
            m_hat = self.m[key] / (1.0 - self.beta1**t)
            v_hat = self.v[key] / (1.0 - self.beta2**t)
            theta -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
