from __future__ import annotations

import numpy as np

from .tensor import Tensor


def _scalar(out: Tensor, weights):
    if out.size == 1:
        return out.sum()
    return (out * weights).sum()


def grad_check(fn, inputs, eps: float = 1e-5, max_coords: int | None = None, seed: int = 0) -> float:
    """Compare reverse-mode gradients against central differences.

    ``fn`` maps a list of tensors to a tensor; non-scalar outputs are
    contracted with fixed random weights first. ``inputs`` are arrays or
    tensors; each gets its gradient checked. With ``max_coords`` only that
    many coordinates per input are probed (chosen with ``seed``).

    Returns the maximum over probed coordinates of
    ``|a - n| / max(1, |a|, |n|)``.
    """
    rng = np.random.default_rng(seed)
    arrays = [np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64) for x in inputs]
    leaves = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    out = fn(leaves)
    weights = rng.standard_normal(out.shape)
    _scalar(out, weights).backward()
    analytic = [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data) for leaf in leaves]

    def evaluate(k, flat_idx, delta):
        probe = [a.copy() for a in arrays]
        probe[k].reshape(-1)[flat_idx] += delta
        return float(_scalar(fn([Tensor(p) for p in probe]), weights).data)

    worst = 0.0
    for k, a in enumerate(arrays):
        coords = np.arange(a.size)
        if max_coords is not None and a.size > max_coords:
            coords = rng.choice(a.size, size=max_coords, replace=False)
        for idx in coords:
            numeric = (evaluate(k, idx, eps) - evaluate(k, idx, -eps)) / (2 * eps)
            an = float(analytic[k].reshape(-1)[idx])
            worst = max(worst, abs(an - numeric) / max(1.0, abs(an), abs(numeric)))
    return worst
