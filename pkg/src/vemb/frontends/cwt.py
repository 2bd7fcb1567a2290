from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import PitchConfig
from .pitch import PitchContour

_MEXH_NORM = 2.0 / (np.sqrt(3.0) * np.pi**0.25)
_SUPPORT = 5.0


@dataclass
class PitchSpectrogram:
    coeffs: np.ndarray  # [scales, frames]
    scale_values: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.scale_values) <= 0):
            raise ValueError("scale values must be strictly increasing")


def mexican_hat(t):
    t = np.asarray(t, dtype=np.float64)
    return _MEXH_NORM * (1.0 - t**2) * np.exp(-0.5 * t**2)


def wavelet_kernel(scale: float) -> np.ndarray:
    """Sampled ``psi(t / s) / sqrt(s)`` on ``|t| <= 5 s``, mean removed.

    Removing the residual mean of the truncated kernel makes it annihilate
    constants exactly, not just approximately.
    """
    half = int(np.ceil(_SUPPORT * scale))
    t = np.arange(-half, half + 1) / scale
    k = mexican_hat(t) / np.sqrt(scale)
    return k - k.mean()


def default_scales(cfg: PitchConfig | None = None) -> np.ndarray:
    cfg = cfg or PitchConfig()
    return np.arange(cfg.min_scale, cfg.min_scale + cfg.n_scales, dtype=np.float64)


def normalized_log_f0(c: PitchContour) -> np.ndarray:
    lf0 = np.log(c.f0)
    centered = lf0 - lf0.mean()
    std = centered.std()
    # constant contours: rounding in the mean must not be blown up by 1/std
    if std <= 1e-12 * max(1.0, np.abs(lf0).max()):
        return np.zeros_like(lf0)
    return centered / std


def cwt(signal: np.ndarray, scales) -> np.ndarray:
    """Mexican-hat CWT with symmetric edge extension; ``[len(scales), len(signal)]``."""
    signal = np.asarray(signal, dtype=np.float64)
    out = np.empty((len(scales), len(signal)))
    for row, s in enumerate(scales):
        k = wavelet_kernel(s)
        half = len(k) // 2
        padded = np.pad(signal, half, mode="symmetric")
        # kernel is symmetric, so convolution equals correlation
        out[row] = np.convolve(padded, k, mode="valid")
    return out


def cwt_pitch(c: PitchContour, cfg: PitchConfig | None = None, scales=None) -> PitchSpectrogram:
    """Pitch spectrogram of a continuous contour (z-normalised log-F0)."""
    if not np.all(c.voiced) or np.any(c.f0 <= 0):
        raise ValueError("cwt_pitch needs a continuous contour; run continue_contour first")
    scales = default_scales(cfg) if scales is None else np.asarray(scales, dtype=np.float64)
    return PitchSpectrogram(cwt(normalized_log_f0(c), scales), scales)
