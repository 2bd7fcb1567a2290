"""Gradient-check cases: one per differentiable op, plus a tiny full encoder."""

import numpy as np

from vemb import nn
from vemb.config import PipelineConfig
from vemb.encoders import SpeakerEncoder
from vemb.losses import MarginHead, angular_margin
from vemb.nn import functional as F
from vemb.nn import tensor as T


def _r(seed, *shape, lo=None, hi=None):
    rng = np.random.default_rng(seed)
    if lo is not None:
        return rng.uniform(lo, hi, size=shape)
    return rng.normal(size=shape)


def _mha():
    d, h = 8, 2
    ws = [_r(10 + i, d, d) * 0.4 for i in range(4)]
    bs = [_r(20 + i, d) * 0.1 for i in range(4)]
    return ws, bs, h


def _complex_conv(L):
    x = nn.ComplexTensor(L[0], L[1])
    y = nn.complex_conv2d(x, L[2], L[3], L[4], L[5], stride=2, padding=1)
    return T.concat([y.real, y.imag], axis=1)


def _complex_elu(L):
    y = nn.complex_elu(nn.ComplexTensor(L[0], L[1]))
    return T.concat([y.real, y.imag])


def op_cases():
    """``[(name, fn, inputs)]`` with ``fn`` taking a list of tensors."""
    cases = [
        ("add_broadcast", lambda L: L[0] + L[1], [_r(1, 3, 4), _r(2, 4)]),
        ("sub", lambda L: L[0] - L[1], [_r(1, 3, 4), _r(2, 3, 1)]),
        ("mul_broadcast", lambda L: L[0] * L[1], [_r(1, 3, 4), _r(2, 1, 4)]),
        ("div", lambda L: L[0] / L[1], [_r(1, 3, 4), _r(2, 3, 4, lo=0.5, hi=2.0)]),
        ("neg", lambda L: -L[0], [_r(1, 5)]),
        ("power", lambda L: T.power(L[0], 3.0), [_r(1, 5)]),
        ("exp", lambda L: T.exp(L[0]), [_r(1, 5)]),
        ("log", lambda L: T.log(L[0]), [_r(1, 5, lo=0.3, hi=3.0)]),
        ("sqrt", lambda L: T.sqrt(L[0]), [_r(1, 5, lo=0.3, hi=3.0)]),
        ("abs", lambda L: T.absolute(L[0]), [_r(1, 6, lo=0.2, hi=1.0) * np.array([1, -1, 1, -1, 1, -1])]),
        ("cos", lambda L: T.cos(L[0]), [_r(1, 5)]),
        ("arccos", lambda L: T.arccos(L[0]), [_r(1, 5, lo=-0.9, hi=0.9)]),
        ("clip", lambda L: T.clip(L[0], -0.5, 0.5), [np.array([-1.0, -0.2, 0.1, 0.4, 0.9])]),
        ("elu", lambda L: T.elu(L[0]), [np.array([-2.0, -0.5, -0.01, 0.3, 1.5])]),
        ("gelu", lambda L: T.gelu(L[0]), [_r(1, 7)]),
        ("softplus", lambda L: T.softplus(L[0]), [_r(1, 7) * 3]),
        ("softmax", lambda L: T.softmax(L[0], axis=-1), [_r(1, 3, 5)]),
        ("log_softmax", lambda L: T.log_softmax(L[0], axis=0), [_r(1, 4, 3)]),
        ("sum_axis", lambda L: L[0].sum(axis=1), [_r(1, 3, 4, 2)]),
        ("mean_axes", lambda L: L[0].mean(axis=(0, 2)), [_r(1, 3, 4, 2)]),
        ("reshape", lambda L: L[0].reshape(6, 2), [_r(1, 3, 4)]),
        ("transpose", lambda L: L[0].transpose(2, 0, 1), [_r(1, 2, 3, 4)]),
        ("getitem_basic", lambda L: L[0][1:, ::2], [_r(1, 4, 5)]),
        ("getitem_gather", lambda L: L[0][np.array([0, 2, 2, 1])], [_r(1, 3, 4)]),
        ("concat", lambda L: T.concat([L[0], L[1]], axis=1), [_r(1, 2, 3), _r(2, 2, 2)]),
        ("pad", lambda L: T.pad(L[0], ((1, 0), (2, 1))), [_r(1, 3, 2)]),
        ("matmul_batched", lambda L: T.matmul(L[0], L[1]), [_r(1, 2, 3, 4), _r(2, 4, 5)]),
        ("linear", lambda L: F.linear(L[0], L[1], L[2]), [_r(1, 2, 3, 4), _r(2, 5, 4), _r(3, 5)]),
        ("conv2d", lambda L: F.conv2d(L[0], L[1], L[2], stride=2, padding=1), [_r(1, 2, 3, 7, 6), _r(2, 4, 3, 3, 3), _r(3, 4)]),
        ("conv2d_stride1", lambda L: F.conv2d(L[0], L[1], None, stride=1, padding=0), [_r(1, 1, 2, 5, 5), _r(2, 3, 2, 2, 3)]),
        (
            "complex_conv2d",
            _complex_conv,
            [_r(1, 2, 1, 6, 5), _r(2, 2, 1, 6, 5), _r(3, 3, 1, 3, 3), _r(4, 3, 1, 3, 3), _r(5, 3), _r(6, 3)],
        ),
        ("complex_elu", _complex_elu, [_r(1, 6), _r(2, 6)]),
        ("dropout_fixed_mask", lambda L: F.dropout(L[0], 0.4, True, np.random.default_rng(5)), [_r(1, 4, 6)]),
        ("layer_norm", lambda L: F.layer_norm(L[0], L[1], L[2]), [_r(1, 3, 6), _r(2, 6), _r(3, 6)]),
        ("l2_normalize", lambda L: F.l2_normalize(L[0], axis=1), [_r(1, 3, 4)]),
        ("cross_entropy", lambda L: F.cross_entropy(L[0], np.array([0, 2, 1])), [_r(1, 3, 4)]),
        ("angular_margin", lambda L: angular_margin(L[0], 0.5), [_r(1, 6, lo=-0.95, hi=0.95)]),
    ]

    ws, bs, h = _mha()
    cases.append(
        (
            "multi_head_attention",
            lambda L: F.multi_head_attention(L[0], L[1], L[2], L[3], L[4], L[5], L[6], L[7], L[8], h, key_mask=np.array([[1, 1, 1, 0], [1, 1, 0, 0]], bool)),
            [_r(7, 2, 4, 8), ws[0], bs[0], ws[1], bs[1], ws[2], bs[2], ws[3], bs[3]],
        )
    )
    return cases


def tiny_encoder_case():
    """Whole encoder stack plus AM head at toy sizes, float64, dropout off."""
    cfg = PipelineConfig().replace(
        encoder=dict(spec_channels=(2, 3), dropout=0.0, embed_dim=4, hidden_dim=6, heads=2, layers=1, vit_out=3, mel_patch=3, pitch_patch=2, embedding_dim=5)
    )
    shapes = {"cqt": (6, 5), "mel": (5, 6), "pitch": (3, 4)}
    model = SpeakerEncoder(cfg, seed=0, dtype=np.float64, shapes=shapes)
    head = MarginHead(5, 3, scale=30.0, margin=0.4, seed=1)
    params = model.parameters()
    n = 2
    data = [_r(30, n, 6, 5), _r(31, n, 6, 5), _r(32, n, 5, 6), _r(33, n, 3, 4)]
    labels = np.array([0, 2])

    names = [name for name, _ in model.named_parameters()]

    def run(L):
        # route the checker's parameter tensors into the model graph
        try:
            _swap(model, names, L[4:])
            emb = model(L[0], L[1], L[2], L[3])
            return head.loss(emb, labels)
        finally:
            _swap(model, names, params)

    return run, data + [p.data.copy() for p in params]


def _swap(model, names, tensors):
    """Put ``tensors`` at the dotted attribute paths ``names``."""
    for name, t in zip(names, tensors):
        obj = model
        parts = name.split(".")
        for part in parts[:-1]:
            obj = obj[int(part)] if part.isdigit() else getattr(obj, part)
        leaf = parts[-1]
        if leaf.isdigit():
            obj[int(leaf)] = t
        else:
            setattr(obj, leaf, t)
