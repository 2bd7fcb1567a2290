"""CQT SpecBlock encoder, ViT encoders for mel and pitch, and the fusion head."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .audio import Waveform
from .config import EncoderConfig, PipelineConfig
from .errors import ShapeError
from .frontends import Features, extract_features, feature_shapes
from .nn import ComplexTensor, Module, Tensor, complex_conv2d, complex_dropout, complex_elu, concat, elu, gelu, layer_norm, linear
from .nn.functional import multi_head_attention
from .nn.module import kaiming_uniform, ones, trunc_normal, zeros
from .nn.tensor import no_grad, pad

FUSION_ORDER = ("cqt", "mel", "pitch")


@dataclass
class SpeakerEmbedding:
    vector: np.ndarray
    speaker_id: str | None = None
    utterance_id: str | None = None

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float64)
        if not np.all(np.isfinite(self.vector)):
            raise ValueError("embedding has non-finite entries")


def spec_block_channels(channels) -> list:
    """``[(in, out), ...]`` for the block sequence, starting from one input channel."""
    ins = (1,) + tuple(channels[:-1])
    return list(zip(ins, channels))


class SpecBlock(Module):
    """Complex conv (3x3, stride 2, pad 1) -> complex ELU -> complex dropout."""

    def __init__(self, c_in, c_out, dropout, rng, dtype):
        fan_in = 2 * c_in * 9
        self.w_real = kaiming_uniform((c_out, c_in, 3, 3), fan_in, rng, dtype)
        self.w_imag = kaiming_uniform((c_out, c_in, 3, 3), fan_in, rng, dtype)
        self.b_real = zeros(c_out, dtype)
        self.b_imag = zeros(c_out, dtype)
        self.p = dropout

    def forward(self, x: ComplexTensor, rng=None) -> ComplexTensor:
        y = complex_conv2d(x, self.w_real, self.w_imag, self.b_real, self.b_imag, stride=2, padding=1)
        return complex_dropout(complex_elu(y), self.p, self.training, rng)


class SpecBlockEncoder(Module):
    def __init__(self, channels, dropout, rng, dtype=np.float64):
        self.blocks = [SpecBlock(ci, co, dropout, rng, dtype) for ci, co in spec_block_channels(channels)]

    @property
    def out_dim(self) -> int:
        return 2 * self.blocks[-1].w_real.shape[0]

    def trace(self, height: int, width: int):
        """Spatial sizes after each block."""
        sizes = []
        for _ in self.blocks:
            height, width = (height - 1) // 2 + 1, (width - 1) // 2 + 1
            sizes.append((height, width))
        return sizes

    def forward(self, real, imag, rng=None) -> Tensor:
        """``real``/``imag`` are ``[N, bins, frames]``; returns ``[N, 2 * C_last]``."""
        real, imag = Tensor(real) if not isinstance(real, Tensor) else real, Tensor(imag) if not isinstance(imag, Tensor) else imag
        if real.ndim != 3:
            raise ShapeError(f"expected [N, bins, frames], got {real.shape}")
        x = ComplexTensor(real.reshape(real.shape[0], 1, *real.shape[1:]), imag.reshape(imag.shape[0], 1, *imag.shape[1:]))
        for block in self.blocks:
            x = block(x, rng)
        # real and imaginary feature maps stacked on the channel axis, then pooled
        maps = concat([x.real, x.imag], axis=1)
        return maps.mean(axis=(2, 3))


class TransformerLayer(Module):
    def __init__(self, dim, hidden, heads, rng, dtype):
        self.heads = heads
        self.ln1_g, self.ln1_b = ones(dim, dtype), zeros(dim, dtype)
        for name in ("q", "k", "v", "o"):
            setattr(self, f"w{name}", kaiming_uniform((dim, dim), dim, rng, dtype))
            setattr(self, f"b{name}", zeros(dim, dtype))
        self.ln2_g, self.ln2_b = ones(dim, dtype), zeros(dim, dtype)
        self.w1, self.b1 = kaiming_uniform((hidden, dim), dim, rng, dtype), zeros(hidden, dtype)
        self.w2, self.b2 = kaiming_uniform((dim, hidden), hidden, rng, dtype), zeros(dim, dtype)

    def forward(self, x: Tensor, key_mask=None) -> Tensor:
        h = layer_norm(x, self.ln1_g, self.ln1_b)
        x = x + multi_head_attention(h, self.wq, self.bq, self.wk, self.bk, self.wv, self.bv, self.wo, self.bo, self.heads, key_mask)
        h = layer_norm(x, self.ln2_g, self.ln2_b)
        return x + linear(gelu(linear(h, self.w1, self.b1)), self.w2, self.b2)


class ViT(Module):
    """Pre-norm vision transformer over one 2-D time-frequency image.

    The image is zero-padded up to whole patches, so the patch grid is
    ``ceil(H / p) x ceil(W / p)``.
    """

    def __init__(self, input_shape, patch, cfg: EncoderConfig, rng, dtype=np.float64):
        self.input_shape = tuple(input_shape)
        self.patch = patch
        self.readout = cfg.readout
        self.grid = (math.ceil(input_shape[0] / patch), math.ceil(input_shape[1] / patch))
        d = cfg.embed_dim
        self.w_patch = kaiming_uniform((d, patch * patch), patch * patch, rng, dtype)
        self.b_patch = zeros(d, dtype)
        self.cls = trunc_normal((1, 1, d), rng, dtype=dtype)
        self.pos = trunc_normal((1, self.num_patches + 1, d), rng, dtype=dtype)
        self.layers = [TransformerLayer(d, cfg.hidden_dim, cfg.heads, rng, dtype) for _ in range(cfg.layers)]
        self.ln_g, self.ln_b = ones(d, dtype), zeros(d, dtype)
        self.w_out = kaiming_uniform((cfg.vit_out, d), d, rng, dtype)
        self.b_out = zeros(cfg.vit_out, dtype)

    @property
    def num_patches(self) -> int:
        return self.grid[0] * self.grid[1]

    def patchify(self, x: Tensor) -> Tensor:
        n, h, w = x.shape
        p = self.patch
        gh, gw = self.grid
        x = pad(x, ((0, 0), (0, gh * p - h), (0, gw * p - w)))
        x = x.reshape(n, gh, p, gw, p).transpose(0, 1, 3, 2, 4)
        return x.reshape(n, gh * gw, p * p)

    def forward(self, x) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor(x)
        if tuple(x.shape[1:]) != self.input_shape:
            raise ShapeError(f"ViT built for {self.input_shape}, got {tuple(x.shape[1:])}")
        n = x.shape[0]
        tokens = linear(self.patchify(x), self.w_patch, self.b_patch)
        cls = self.cls + np.zeros((n, 1, 1), dtype=self.cls.dtype)
        h = concat([cls, tokens], axis=1) + self.pos
        for layer in self.layers:
            h = layer(h)
        h = layer_norm(h, self.ln_g, self.ln_b)
        pooled = h[:, 0] if self.readout == "cls" else h[:, 1:].mean(axis=1)
        return linear(pooled, self.w_out, self.b_out)


class SpeakerEncoder(Module):
    """Three encoders fused into one embedding: concat -> linear -> ELU."""

    def __init__(self, cfg: PipelineConfig, seed: int = 0, dtype=np.float64, shapes: dict | None = None):
        rng = np.random.default_rng(seed)
        enc = cfg.encoder
        shapes = shapes or feature_shapes(cfg)
        self.shapes = shapes
        self.cqt_encoder = SpecBlockEncoder(enc.spec_channels, enc.dropout, rng, dtype)
        self.mel_encoder = ViT(shapes["mel"], enc.mel_patch, enc, rng, dtype)
        self.pitch_encoder = ViT(shapes["pitch"], enc.pitch_patch, enc, rng, dtype)
        fused = self.concat_dim
        self.w_fuse = kaiming_uniform((enc.embedding_dim, fused), fused, rng, dtype)
        self.b_fuse = zeros(enc.embedding_dim, dtype)
        self.dtype = np.dtype(dtype)

    @property
    def concat_dim(self) -> int:
        return self.cqt_encoder.out_dim + self.mel_encoder.w_out.shape[0] + self.pitch_encoder.w_out.shape[0]

    def forward(self, cqt_real, cqt_imag, mel, pitch, rng=None) -> Tensor:
        parts = [
            self.cqt_encoder(cqt_real, cqt_imag, rng),
            self.mel_encoder(mel),
            self.pitch_encoder(pitch),
        ]
        return elu(linear(concat(parts, axis=-1), self.w_fuse, self.b_fuse))

    def encode_features(self, feats: list, rng=None) -> Tensor:
        batch = [np.stack([getattr(f, k) for f in feats]).astype(self.dtype) for k in ("cqt_real", "cqt_imag", "mel", "pitch")]
        return self(*batch, rng=rng)


def build_model(cfg: PipelineConfig, seed: int | None = None, dtype=None) -> SpeakerEncoder:
    seed = cfg.train.seed if seed is None else seed
    dtype = dtype or np.dtype(cfg.train.precision)
    return SpeakerEncoder(cfg, seed, dtype)


def manifest(model: SpeakerEncoder, cfg: PipelineConfig, **extra) -> dict:
    out = {
        "config_hash": cfg.hash(),
        "config": cfg.dumps(),
        "fusion_order": list(FUSION_ORDER),
        "parameter_count": model.parameter_count(),
    }
    out.update(extra)
    return out


def embed(w: Waveform, model: SpeakerEncoder, cfg: PipelineConfig, features: Features | None = None) -> SpeakerEmbedding:
    """Eval-mode embedding of one model-rate segment."""
    if w.sample_rate != cfg.audio.sample_rate or len(w) != cfg.audio.segment_samples:
        raise ShapeError(f"embed expects {cfg.audio.segment_samples} samples at {cfg.audio.sample_rate} Hz")
    feats = features or extract_features(w, cfg)
    was_training = model.training
    model.eval()
    try:
        with no_grad():
            vec = model.encode_features([feats]).data[0]
    finally:
        model.train(was_training)
    return SpeakerEmbedding(vec.astype(np.float64))
