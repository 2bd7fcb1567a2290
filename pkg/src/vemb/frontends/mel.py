from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

from ..audio import Waveform
from ..config import MelConfig


@dataclass
class MelSpectrogram:
    values: np.ndarray  # [n_mels, frames], natural-log power
    fft_size: int
    win_length: int
    hop_length: int

    @property
    def n_mels(self) -> int:
        return self.values.shape[0]


# Slaney scale: linear below 1 kHz, logarithmic above.
_F_SP = 200.0 / 3
_MIN_LOG_HZ = 1000.0
_MIN_LOG_MEL = _MIN_LOG_HZ / _F_SP
_LOGSTEP = np.log(6.4) / 27.0


def hz_to_mel(f):
    f = np.asarray(f, dtype=np.float64)
    log_part = _MIN_LOG_MEL + np.log(np.maximum(f, _MIN_LOG_HZ) / _MIN_LOG_HZ) / _LOGSTEP
    return np.where(f >= _MIN_LOG_HZ, log_part, f / _F_SP)


def mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    log_part = _MIN_LOG_HZ * np.exp(_LOGSTEP * (np.maximum(m, _MIN_LOG_MEL) - _MIN_LOG_MEL))
    return np.where(m >= _MIN_LOG_MEL, log_part, m * _F_SP)


def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int, fmin: float = 0.0, fmax: float | None = None):
    """Triangular filters equally spaced on the mel scale, area-normalised.

    Returns ``(weights [n_mels, n_fft // 2 + 1], centers_hz [n_mels])``.
    """
    fmax = sample_rate / 2 if fmax is None else fmax
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    bins = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bins[None, :] - lower) / (center - lower)
    falling = (upper - bins[None, :]) / (upper - center)
    weights = np.clip(np.minimum(rising, falling), 0.0, None)
    weights *= (2.0 / (upper - lower))
    return weights, edges[1:-1]


def frame_count(n_samples: int, hop_length: int) -> int:
    return n_samples // hop_length + 1


def power_stft(x: np.ndarray, n_fft: int, win_length: int, hop_length: int) -> np.ndarray:
    """Centred STFT power, ``[n_fft // 2 + 1, len // hop + 1]``.

    Frame ``j`` is centred on sample ``j * hop``; the signal is reflect-padded
    by ``n_fft // 2`` on the left and ``n_fft - n_fft // 2`` on the right so the
    frame count is ``len // hop + 1`` for odd and even ``n_fft`` alike.
    """
    left, right = n_fft // 2, n_fft - n_fft // 2
    mode = "reflect" if len(x) > 1 else "constant"
    padded = np.pad(x, (left, right), mode=mode)
    window = np.zeros(n_fft)
    offset = (n_fft - win_length) // 2
    window[offset : offset + win_length] = get_window("hann", win_length, fftbins=True)
    n_frames = frame_count(len(x), hop_length)
    frames = np.lib.stride_tricks.sliding_window_view(padded, n_fft)[:: hop_length][:n_frames]
    spec = np.fft.rfft(frames * window, axis=1)
    return (spec.real**2 + spec.imag**2).T


def mel_spectrogram(w: Waveform, cfg: MelConfig | None = None) -> MelSpectrogram:
    cfg = cfg or MelConfig()
    power = power_stft(w.samples, cfg.n_fft, cfg.win_length, cfg.hop_length)
    weights, _ = mel_filterbank(w.sample_rate, cfg.n_fft, cfg.n_mels)
    mel = weights @ power
    return MelSpectrogram(np.log(np.maximum(mel, cfg.log_floor)), cfg.n_fft, cfg.win_length, cfg.hop_length)
