"""Adaptive-moment gradient descent over a ParamStore."""

from __future__ import annotations

import numpy as np

from .tensor import ParamStore

__all__ = ["Adam"]


class Adam:
    def __init__(self, store: ParamStore, lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 exclude: tuple[str, ...] = ()):
        self.store = store
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.names = [n for n in store.names()
                      if not any(n.startswith(p) for p in exclude)]
        self.m = {n: np.zeros_like(store[n].data) for n in self.names}
        self.v = {n: np.zeros_like(store[n].data) for n in self.names}
        self.t = 0

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for n in self.names:
            p = self.store[n]
            g = p.grad
            if g is None:
                continue
            m = self.m[n]
            v = self.v[n]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self) -> None:
        self.store.zero_grad()
