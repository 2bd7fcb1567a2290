"""Blockwise constant-Q transform.

Each block is analysed octave by octave: the top octave at the input rate,
every lower octave after one more halving of the rate. Within an octave all
bins use Hann-windowed complex exponentials whose length is ``Q * fs / f``,
so the kernel bandwidth scales with centre frequency. Kernels are evaluated
only at frame centres, which keeps the cost at one small matrix product per
octave.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import resample_poly

from ..audio import Waveform
from ..config import CQTConfig
from ..errors import ShapeError


@dataclass
class ComplexSpectrogram:
    real: np.ndarray
    imag: np.ndarray
    min_frequency: float
    bins_per_octave: int
    block_length_seconds: float

    def __post_init__(self):
        if self.real.shape != self.imag.shape:
            raise ShapeError("real and imaginary parts differ in shape")

    @property
    def shape(self):
        return self.real.shape

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.real, self.imag)


def center_frequencies(cfg: CQTConfig) -> np.ndarray:
    k = np.arange(cfg.n_bins)
    return cfg.min_frequency * 2.0 ** (k / cfg.bins_per_octave)


def q_factor(bins_per_octave: int) -> float:
    return 1.0 / (2.0 ** (1.0 / bins_per_octave) - 1.0)


@lru_cache(maxsize=16)
def _octave_kernels(freqs: tuple, fs: float, q: float):
    """Conjugated kernels for one octave, zero-padded to a common odd length."""
    lengths = [int(np.ceil(q * fs / f)) | 1 for f in freqs]
    n_max = max(lengths)
    half = n_max // 2
    kernels = np.zeros((len(freqs), n_max), dtype=np.complex128)
    for i, (f, n) in enumerate(zip(freqs, lengths)):
        t = np.arange(n) - n // 2
        win = np.hanning(n + 2)[1:-1]
        kern = win * np.exp(2j * np.pi * f * t / fs) / win.sum()
        kernels[i, half - n // 2 : half + n // 2 + 1] = kern
    kernels = np.conj(kernels)
    kernels.setflags(write=False)
    return kernels, half


def octave_kernels(cfg: CQTConfig, sample_rate: int, octave: int):
    """Kernels of octave ``octave`` (0 = lowest) at its decimated rate.

    Returns ``(kernels, half_length, rate)``.
    """
    freqs = center_frequencies(cfg)[octave * cfg.bins_per_octave : (octave + 1) * cfg.bins_per_octave]
    rate = sample_rate / 2 ** (cfg.octaves - 1 - octave)
    kernels, half = _octave_kernels(tuple(freqs), rate, q_factor(cfg.bins_per_octave))
    return kernels, half, rate


def frames_per_block(cfg: CQTConfig, sample_rate: int) -> int:
    block = int(round(cfg.block_seconds * sample_rate))
    return -(-block // cfg.hop_length)


def _block_cqt(block: np.ndarray, cfg: CQTConfig, sample_rate: int) -> np.ndarray:
    n_frames = frames_per_block(cfg, sample_rate)
    out = np.empty((cfg.n_bins, n_frames), dtype=np.complex128)
    x = block
    for octave in range(cfg.octaves - 1, -1, -1):
        if octave < cfg.octaves - 1:
            x = resample_poly(x, 1, 2)
        kernels, half, _ = octave_kernels(cfg, sample_rate, octave)
        step = cfg.hop_length >> (cfg.octaves - 1 - octave)
        padded = np.concatenate([np.zeros(half), x, np.zeros(half + n_frames * step)])
        starts = np.arange(n_frames) * step
        windows = np.lib.stride_tricks.sliding_window_view(padded, kernels.shape[1])[starts]
        rows = slice(octave * cfg.bins_per_octave, (octave + 1) * cfg.bins_per_octave)
        out[rows] = kernels @ windows.T
    return out


def cqt(w: Waveform, cfg: CQTConfig | None = None) -> ComplexSpectrogram:
    """Complex CQT of ``w``, blocks concatenated along the frame axis.

    A trailing partial block is zero-padded to a full block.
    """
    cfg = cfg or CQTConfig()
    if cfg.hop_length % 2 ** (cfg.octaves - 1):
        raise ValueError(f"hop_length must be a multiple of {2 ** (cfg.octaves - 1)}")
    top = cfg.min_frequency * 2.0 ** cfg.octaves
    if top > w.sample_rate / 2:
        raise ValueError(f"top bin edge {top:.0f} Hz exceeds Nyquist at {w.sample_rate} Hz")
    block = int(round(cfg.block_seconds * w.sample_rate))
    if len(w) < block:
        raise ShapeError(f"input of {len(w)} samples is shorter than one {block}-sample block")
    n_blocks = -(-len(w) // block)
    x = np.zeros(n_blocks * block)
    x[: len(w)] = w.samples
    spec = np.concatenate([_block_cqt(x[i * block : (i + 1) * block], cfg, w.sample_rate) for i in range(n_blocks)], axis=1)
    return ComplexSpectrogram(spec.real.copy(), spec.imag.copy(), cfg.min_frequency, cfg.bins_per_octave, cfg.block_seconds)
