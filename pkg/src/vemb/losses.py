"""Margin-based classification heads over speaker embeddings."""

from __future__ import annotations

import math

import numpy as np

from .errors import DataError
from .nn import Module, Tensor, cross_entropy, l2_normalize, matmul
from .nn.module import kaiming_uniform
from .nn.tensor import _node

ARC_CLAMP = 1e-7


class MarginHead(Module):
    """Class-weight matrix ``W [dim, classes]`` plus margin settings.

    ``kind`` is ``"am"`` (additive cosine margin) or ``"arc"`` (additive
    angular margin).
    """

    def __init__(self, dim: int, num_classes: int, scale: float = 30.0, margin: float = 0.4, kind: str = "am", seed: int = 0, dtype=np.float64):
        if scale <= 0:
            raise ValueError("scale must be positive")
        if kind == "am" and not 0 <= margin < 1:
            raise ValueError("AM margin must lie in [0, 1)")
        if kind == "arc" and not 0 <= margin < math.pi / 2:
            raise ValueError("ArcFace margin must lie in [0, pi/2)")
        if kind not in ("am", "arc"):
            raise ValueError(f"unknown margin kind {kind!r}")
        rng = np.random.default_rng(seed)
        self.W = kaiming_uniform((dim, num_classes), dim, rng, dtype)
        self.scale = float(scale)
        self.margin = float(margin)
        self.kind = kind

    @property
    def num_classes(self) -> int:
        return self.W.shape[1]

    def loss(self, f: Tensor, labels) -> Tensor:
        fn = am_softmax_loss if self.kind == "am" else arcface_loss
        return fn(f, labels, self)

    def cosines(self, f: Tensor) -> Tensor:
        return _cosines(f, self)


def _check(f: Tensor, labels, head: MarginHead):
    labels = np.asarray(labels, dtype=np.int64)
    if f.ndim != 2 or labels.shape != (f.shape[0],) or f.shape[0] < 1:
        raise DataError(f"need embeddings [n, d] with n >= 1 labels, got {f.shape} and {labels.shape}")
    if labels.min() < 0 or labels.max() >= head.num_classes:
        raise DataError(f"labels must lie in [0, {head.num_classes})")
    if np.any(np.linalg.norm(f.data, axis=1) == 0):
        raise DataError("zero-norm embedding cannot be normalised")
    return labels


def _cosines(f: Tensor, head: MarginHead) -> Tensor:
    return matmul(l2_normalize(f, axis=1), l2_normalize(head.W, axis=0))


def am_softmax_loss(f: Tensor, labels, head: MarginHead) -> Tensor:
    """Additive-margin softmax: target logit ``s (cos - m)``, others ``s cos``."""
    labels = _check(f, labels, head)
    cos = _cosines(f, head)
    onehot = np.zeros(cos.shape, dtype=cos.dtype)
    onehot[np.arange(len(labels)), labels] = 1.0
    logits = (cos - onehot * head.margin) * head.scale
    return cross_entropy(logits, labels)


def angular_margin(c: Tensor, m: float, eps: float = ARC_CLAMP) -> Tensor:
    """``cos(arccos(c) + m)``.

    The value is exact on [-1, 1]; the derivative
    ``sin(theta + m) / sin(theta)`` is evaluated with ``c`` clamped to
    ``[-1 + eps, 1 - eps]`` so it stays finite at the poles.
    """
    theta = np.arccos(np.clip(c.data, -1.0, 1.0))
    out = np.cos(theta + m)
    theta_c = np.arccos(np.clip(c.data, -1.0 + eps, 1.0 - eps))
    slope = np.sin(theta_c + m) / np.sin(theta_c)
    return _node(out, (c,), lambda g: (g * slope,), "angular_margin")


def arcface_loss(f: Tensor, labels, head: MarginHead) -> Tensor:
    """Additive angular margin: target logit ``s cos(theta_y + m)``."""
    labels = _check(f, labels, head)
    cos = _cosines(f, head)
    rows = np.arange(len(labels))
    target = cos[rows, labels]
    delta = angular_margin(target, head.margin) - target
    onehot = np.zeros(cos.shape, dtype=cos.dtype)
    onehot[rows, labels] = 1.0
    logits = (cos + onehot * delta.reshape(len(labels), 1)) * head.scale
    return cross_entropy(logits, labels)
