"""Adam with coupled L2 weight decay, and a step learning-rate schedule."""
from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0, names=None):
        self.params = params
        self.names = list(params.names() if names is None else names)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._m = {n: np.zeros(params[n].shape) for n in self.names}
        self._v = {n: np.zeros(params[n].shape) for n in self.names}

    def step(self):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name in self.names:
            p = self.params[name]
            g = p.grad if p.grad is not None else np.zeros(p.shape)
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            m = self._m[name] = self.beta1 * self._m[name] + (1.0 - self.beta1) * g
            v = self._v[name] = self.beta2 * self._v[name] + (1.0 - self.beta2) * g * g
            update = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            self.params.set(name, p.data - update)


def step_lr(base_lr, epoch, step_epochs, decay):
    """Learning rate after ``epoch`` whole epochs: decays by ``decay`` every ``step_epochs``."""
    return base_lr * decay ** (epoch // step_epochs)
