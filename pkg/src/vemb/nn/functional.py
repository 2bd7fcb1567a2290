"""Layer primitives built on the autodiff engine."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor, _node, as_tensor, concat, log_softmax, matmul, mean, softmax, sqrt, swapaxes


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Real 2-D cross-correlation, ``x [N, C, H, W]``, ``weight [O, C, kh, kw]``.

    Lowered to one matrix product over unfolded patches.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError("conv2d expects 4-D input and weight")
    n, c, h, w = x.shape
    o, wc, kh, kw = weight.shape
    if c != wc:
        raise ShapeError(f"input has {c} channels, weight expects {wc}")
    ho = conv_output_size(h, kh, stride, padding)
    wo = conv_output_size(w, kw, stride, padding)
    if ho < 1 or wo < 1:
        raise ShapeError(f"input {h}x{w} too small for a {kh}x{kw} kernel")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, : (ho - 1) * stride + 1 : stride, : (wo - 1) * stride + 1 : stride]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)
    wmat = weight.data.reshape(o, -1)
    out = (cols @ wmat.T).reshape(n, ho, wo, o).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data.reshape(1, o, 1, 1)
    parents = (x, weight) if bias is None else (x, weight, bias)

    def back(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(-1, o)
        gw = (gmat.T @ cols).reshape(weight.shape)
        gx = None
        if x.requires_grad:
            dcols = (gmat @ wmat).reshape(n, ho, wo, c, kh, kw)
            dxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    dxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += dcols[..., i, j].transpose(0, 3, 1, 2)
            gx = dxp[:, :, padding : padding + h, padding : padding + w]
        grads = (gx, gw)
        return grads if bias is None else grads + (g.sum(axis=(0, 2, 3)),)

    return _node(out, parents, back, "conv2d")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map over the last axis; ``weight`` is ``[d_out, d_in]``."""
    if x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"linear: input dim {x.shape[-1]} != weight in-dim {weight.shape[1]}")
    lead = x.shape[:-1]
    x2 = x if x.ndim == 2 else x.reshape(-1, x.shape[-1])
    out = matmul(x2, weight.T)
    if bias is not None:
        out = out + bias
    return out if x.ndim == 2 else out.reshape(*lead, weight.shape[0])


def dropout_mask(shape, p: float, rng: np.random.Generator, dtype=np.float64) -> np.ndarray:
    return ((rng.random(shape) >= p) / (1.0 - p)).astype(dtype)


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator | None) -> Tensor:
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    return x * dropout_mask(x.shape, p, rng, x.dtype)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    mu = mean(x, axis=-1, keepdims=True)
    xc = x - mu
    var = mean(xc * xc, axis=-1, keepdims=True)
    return xc / sqrt(var + eps) * gamma + beta


def split_heads(x: Tensor, heads: int) -> Tensor:
    *lead, t, d = x.shape
    return swapaxes(x.reshape(*lead, t, heads, d // heads), -2, -3)


def merge_heads(x: Tensor) -> Tensor:
    *lead, h, t, dh = x.shape
    return swapaxes(x, -2, -3).reshape(*lead, t, h * dh)


def attention_weights(q: Tensor, k: Tensor, key_mask=None) -> Tensor:
    """Softmax over keys of scaled dot products; ``key_mask`` is True for real keys."""
    scores = matmul(q, swapaxes(k, -1, -2)) * (1.0 / np.sqrt(q.shape[-1]))
    if key_mask is not None:
        bias = np.where(np.asarray(key_mask, dtype=bool), 0.0, -1e9).astype(scores.dtype)
        # [N, T] -> [N, 1, 1, T] so it broadcasts over heads and queries
        scores = scores + bias.reshape(bias.shape[0], 1, 1, bias.shape[-1])
    return softmax(scores, axis=-1)


def multi_head_attention(x: Tensor, wq, bq, wk, bk, wv, bv, wo, bo, heads: int, key_mask=None, return_weights=False):
    """Scaled dot-product self-attention over ``x [.., tokens, d_model]``."""
    d = x.shape[-1]
    if d % heads:
        raise ShapeError(f"d_model {d} is not divisible by {heads} heads")
    q = split_heads(linear(x, wq, bq), heads)
    k = split_heads(linear(x, wk, bk), heads)
    v = split_heads(linear(x, wv, bv), heads)
    attn = attention_weights(q, k, key_mask)
    out = linear(merge_heads(matmul(attn, v)), wo, bo)
    return (out, attn) if return_weights else out


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under row-wise softmax."""
    labels = np.asarray(labels)
    logp = log_softmax(logits, axis=-1)
    picked = logp[np.arange(len(labels)), labels]
    return -mean(picked)


def l2_normalize(x: Tensor, axis: int = -1) -> Tensor:
    norm = sqrt((x * x).sum(axis=axis, keepdims=True))
    return x / norm


def cat(tensors, axis=0):
    return concat([as_tensor(t) for t in tensors], axis)
