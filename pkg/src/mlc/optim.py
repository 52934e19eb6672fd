"""First-order optimizers over :class:`ParamVector`."""

from __future__ import annotations

import numpy as np

from .diffcore import ParamVector


class SGDMomentum:
    """Heavy-ball SGD: ``buf = mu * buf + g``; ``p -= lr * buf``."""

    def __init__(self, momentum: float = 0.9, weight_decay: float = 0.0):
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {momentum}")
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.buf: ParamVector | None = None

    def step(self, params: ParamVector, grad: ParamVector, lr: float) -> ParamVector:
        if self.weight_decay:
            grad = grad + params * self.weight_decay
        self.buf = grad.copy() if self.buf is None else self.buf * self.momentum + grad
        return params - self.buf * lr


class Adam:
    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m: ParamVector | None = None
        self.v: ParamVector | None = None
        self.t = 0

    def step(self, params: ParamVector, grad: ParamVector, lr: float) -> ParamVector:
        if self.m is None:
            self.m, self.v = grad.zeros_like(), grad.zeros_like()
        self.t += 1
        self.m = self.m * self.beta1 + grad * (1 - self.beta1)
        self.v = self.v * self.beta2 + grad * grad * (1 - self.beta2)
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        update = ParamVector({k: m_hat[k] / (np.sqrt(v_hat[k]) + self.eps) for k in m_hat.names})
        return params - update * lr


def make_optimizer(kind: str, momentum: float = 0.9):
    if kind in ("sgd_momentum", "sgd"):
        return SGDMomentum(momentum)
    if kind in ("adam", "adaptive"):
        return Adam()
    raise ValueError(f"unknown optimizer {kind!r}; expected 'sgd_momentum' or 'adam'")
