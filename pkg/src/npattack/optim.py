"""Adam updates for tape parameters."""

import numpy as np


def exp_decay(lr0: float, epoch: int, rate: float = 0.99) -> float:
    """Learning rate after ``epoch`` whole epochs of exponential decay."""
    return lr0 * rate**epoch


class Adam:
    """Adam with bias correction: p -= lr * m_hat / (sqrt(v_hat) + eps).

    Parameters are tape tensors; ``step`` consumes whatever is in their
    ``.grad`` slots (skipping ``None``) and updates ``.data`` in place.
    A per-call ``lr`` override supports decayed schedules.
    """

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, lr=None):
        if lr is None:
            lr = self.lr
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            mh = m / b1c
            vh = v / b2c
            p.data -= lr * mh / (np.sqrt(vh) + self.eps)
