"""Complex-valued layers as pairs of real tensors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from .functional import conv2d, dropout_mask
from .tensor import Tensor, as_tensor, concat, elu, neg


@dataclass
class ComplexTensor:
    real: Tensor
    imag: Tensor

    def __post_init__(self):
        self.real = as_tensor(self.real)
        self.imag = as_tensor(self.imag)
        if self.real.shape != self.imag.shape:
            raise ShapeError(f"real {self.real.shape} and imag {self.imag.shape} differ")

    @property
    def shape(self):
        return self.real.shape

    def numpy(self) -> np.ndarray:
        return self.real.data + 1j * self.imag.data


def complex_conv2d(x: ComplexTensor, w_real: Tensor, w_imag: Tensor, b_real=None, b_imag=None, stride=2, padding=1) -> ComplexTensor:
    """Complex cross-correlation ``(a + bi) * (c + di)``.

    Implemented as a single real convolution over stacked ``[a; b]`` channels
    with the block weight ``[[c, -d], [d, c]]``, which yields
    ``a*c - b*d`` in the first half of the output and ``a*d + b*c`` in the
    second.
    """
    unbatched = x.real.ndim == 3
    xr, xi = x.real, x.imag
    if unbatched:
        xr = xr.reshape(1, *xr.shape)
        xi = xi.reshape(1, *xi.shape)
    if w_real.shape != w_imag.shape:
        raise ShapeError("real and imaginary kernels differ in shape")
    c_out = w_real.shape[0]
    stacked = concat([xr, xi], axis=1)
    weight = concat([concat([w_real, neg(w_imag)], axis=1), concat([w_imag, w_real], axis=1)], axis=0)
    bias = None
    if b_real is not None:
        bias = concat([b_real, b_imag], axis=0)
    y = conv2d(stacked, weight, bias, stride=stride, padding=padding)
    yr, yi = y[:, :c_out], y[:, c_out:]
    if unbatched:
        yr = yr.reshape(*yr.shape[1:])
        yi = yi.reshape(*yi.shape[1:])
    return ComplexTensor(yr, yi)


def complex_elu(x: ComplexTensor, alpha: float = 1.0) -> ComplexTensor:
    return ComplexTensor(elu(x.real, alpha), elu(x.imag, alpha))


def complex_dropout(x: ComplexTensor, p: float = 0.4, training: bool = True, rng=None, seed=None) -> ComplexTensor:
    """Zero whole complex entries with probability ``p``; survivors scaled by ``1/(1-p)``."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        rng = np.random.default_rng(seed)
    mask = dropout_mask(x.shape, p, rng, x.real.dtype)
    return ComplexTensor(x.real * mask, x.imag * mask)
