"""Time-frequency frontends: complex CQT, log-mel, and CWT pitch spectrogram."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..audio import Waveform
from ..config import PipelineConfig
from .cqt import ComplexSpectrogram, center_frequencies, cqt, frames_per_block
from .cwt import PitchSpectrogram, cwt, cwt_pitch, default_scales, mexican_hat
from .mel import MelSpectrogram, frame_count, mel_filterbank, mel_spectrogram
from .pitch import PitchContour, continue_contour, estimate_pitch

__all__ = [
    "ComplexSpectrogram",
    "Features",
    "MelSpectrogram",
    "PitchContour",
    "PitchSpectrogram",
    "center_frequencies",
    "continue_contour",
    "cqt",
    "cwt",
    "cwt_pitch",
    "default_scales",
    "estimate_pitch",
    "extract_features",
    "feature_shapes",
    "frame_count",
    "mel_filterbank",
    "mel_spectrogram",
    "mexican_hat",
]


@dataclass
class Features:
    """Encoder inputs for one segment."""

    cqt_real: np.ndarray
    cqt_imag: np.ndarray
    mel: np.ndarray
    pitch: np.ndarray

    def astype(self, dtype) -> "Features":
        return Features(*(getattr(self, k).astype(dtype) for k in ("cqt_real", "cqt_imag", "mel", "pitch")))


def extract_features(w: Waveform, cfg: PipelineConfig) -> Features:
    """Run all three frontends on a model-rate segment.

    A segment with no voiced frame yields an all-zero pitch spectrogram (the
    transform of a constant contour).
    """
    spec = cqt(w, cfg.cqt)
    mel = mel_spectrogram(w, cfg.mel)
    contour = estimate_pitch(w, cfg.pitch)
    scales = default_scales(cfg.pitch)
    if contour.voiced.any():
        pitch = cwt_pitch(continue_contour(contour), cfg.pitch).coeffs
    else:
        pitch = np.zeros((len(scales), len(contour)))
    return Features(spec.real, spec.imag, mel.values, pitch)


def feature_shapes(cfg: PipelineConfig) -> dict:
    """Shapes of the three encoder inputs for a full-length segment."""
    n = cfg.audio.segment_samples
    sr = cfg.audio.sample_rate
    block = int(round(cfg.cqt.block_seconds * sr))
    cqt_frames = -(-n // block) * frames_per_block(cfg.cqt, sr)
    pitch_frames = int(np.floor(cfg.audio.segment_seconds / (cfg.pitch.frame_period_ms / 1000.0) + 1e-9)) + 1
    return {
        "cqt": (cfg.cqt.n_bins, cqt_frames),
        "mel": (cfg.mel.n_mels, frame_count(n, cfg.mel.hop_length)),
        "pitch": (cfg.pitch.n_scales, pitch_frames),
    }
