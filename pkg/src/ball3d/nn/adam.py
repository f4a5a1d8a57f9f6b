"""Adam optimizer with bias correction."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch


class AdamState:
    """Per-parameter first/second moment buffers keyed by parameter name."""

    def __init__(self, named_params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}
        for name, p in named_params:
            self.m[name] = np.zeros_like(p.data)
            self.v[name] = np.zeros_like(p.data)

    def step(self, named_params):
        """One update over (name, Tensor) pairs, reading .grad in place.
        Parameters with a missing gradient are left untouched."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for name, p in named_params:
            g = p.grad
            if g is None:
                continue
            if g.shape != p.data.shape or self.m[name].shape != p.data.shape:
                raise ShapeMismatch(f"gradient shape mismatch for {name}")
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
