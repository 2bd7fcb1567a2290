from __future__ import annotations

import numpy as np


def adam_step(params, grads, lr=1e-4, betas=(0.9, 0.999), eps=1e-8, state=None):
    """One Adam update with bias correction.

    Pure function: returns ``(new_params, new_state)`` and leaves the inputs
    untouched. ``state`` is ``None`` on the first call.
    """
    b1, b2 = betas
    if state is None:
        state = {"t": 0, "m": [np.zeros_like(p) for p in params], "v": [np.zeros_like(p) for p in params]}
    t = state["t"] + 1
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state["m"], state["v"]):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        denom = np.sqrt(v) / np.sqrt(c2) + eps
        new_params.append(p - (lr / c1) * m / denom)
        new_m.append(m)
        new_v.append(v)
    return new_params, {"t": t, "m": new_m, "v": new_v}


class Adam:
    def __init__(self, params, lr=1e-4, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.state = None

    def step(self):
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        new, self.state = adam_step([p.data for p in self.params], grads, self.lr, self.betas, self.eps, self.state)
        for p, value in zip(self.params, new):
            p.data = value.astype(p.dtype, copy=False)

    def zero_grad(self):
        for p in self.params:
            p.grad = None
