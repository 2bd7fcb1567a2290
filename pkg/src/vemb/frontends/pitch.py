"""DIO-style F0 estimation and contour continuation.

The signal is decimated to a few kHz and low-passed once per candidate band.
In each band four event series (falling and rising zero crossings, peaks,
dips) give four period estimates per frame; their mean is the band's F0
candidate and their relative spread its score. The best-scoring in-range
candidate wins, and a frame is voiced only if that candidate also shows a
high normalised autocorrelation at its period in the full-rate signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve, resample_poly
from scipy.signal.windows import nuttall

from ..audio import Waveform, resample
from ..config import PitchConfig


@dataclass
class PitchContour:
    f0: np.ndarray
    voiced: np.ndarray
    hop_seconds: float = 0.005

    def __post_init__(self):
        self.f0 = np.asarray(self.f0, dtype=np.float64)
        self.voiced = np.asarray(self.voiced, dtype=bool)
        if self.f0.shape != self.voiced.shape:
            raise ValueError("f0 and voiced flags differ in length")

    def __len__(self):
        return len(self.f0)


def _decimate(w: Waveform, target: int):
    if w.sample_rate % target == 0:
        return resample_poly(w.samples, 1, w.sample_rate // target), target
    return resample(w, target).samples, target


def _crossings(y: np.ndarray, rising: bool) -> np.ndarray:
    """Fractional sample positions where ``y`` changes sign in one direction."""
    a, b = y[:-1], y[1:]
    hit = (a < 0) & (b >= 0) if rising else (a > 0) & (b <= 0)
    i = np.flatnonzero(hit)
    return i + a[i] / (a[i] - b[i])


def _interval_track(events: np.ndarray, fs: float, positions: np.ndarray):
    if len(events) < 3:
        return None
    mid = 0.5 * (events[1:] + events[:-1])
    freq = fs / np.diff(events)
    return np.interp(positions, mid, freq)


def _band_candidates(y: np.ndarray, fs: float, positions: np.ndarray):
    dy = np.diff(y)
    series = (
        _crossings(y, rising=False),
        _crossings(y, rising=True),
        _crossings(dy, rising=False) + 0.5,
        _crossings(dy, rising=True) + 0.5,
    )
    tracks = [_interval_track(ev, fs, positions) for ev in series]
    if any(t is None for t in tracks):
        return None, None
    tracks = np.stack(tracks)
    mean = tracks.mean(axis=0)
    score = tracks.std(axis=0) / mean
    return mean, score


def periodicity(x: np.ndarray, center: int, lag: int, length: int) -> float:
    """Normalised autocorrelation of ``x`` at ``lag`` over a centred window."""
    start = max(0, center - length // 2)
    stop = min(len(x) - lag, start + length)
    if stop - start < lag:
        start = max(0, stop - length)
    if stop - start < 2:
        return 0.0
    a = x[start:stop]
    b = x[start + lag : stop + lag]
    denom = math.sqrt(float(a @ a) * float(b @ b))
    return float(a @ b) / denom if denom > 0 else 0.0


def band_boundaries(cfg: PitchConfig) -> np.ndarray:
    n = 1 + int(math.log2(cfg.f0_ceil / cfg.f0_floor) * cfg.channels_in_octave)
    return cfg.f0_floor * 2.0 ** ((np.arange(n) + 1) / cfg.channels_in_octave)


def estimate_pitch(w: Waveform, cfg: PitchConfig | None = None) -> PitchContour:
    cfg = cfg or PitchConfig()
    hop = cfg.frame_period_ms / 1000.0
    n_frames = int(math.floor(w.duration / hop + 1e-9)) + 1
    f0 = np.zeros(n_frames)
    voiced = np.zeros(n_frames, dtype=bool)
    if not np.any(w.samples):
        return PitchContour(f0, voiced, hop)

    x, fs = _decimate(w, cfg.target_rate)
    x = x - x.mean()
    positions = np.arange(n_frames) * hop * fs

    best_f0 = np.zeros(n_frames)
    best_score = np.full(n_frames, np.inf)
    for boundary in band_boundaries(cfg):
        half = max(1, int(round(fs / boundary / 2)))
        kernel = nuttall(4 * half + 1)
        y = fftconvolve(x, kernel / kernel.sum(), mode="same")
        cand, score = _band_candidates(y, fs, positions)
        if cand is None:
            continue
        ok = (cand <= boundary) & (cand >= boundary / 2) & (cand >= cfg.f0_floor) & (cand <= cfg.f0_ceil)
        better = ok & (score < best_score)
        best_f0[better] = cand[better]
        best_score[better] = score[better]

    full = w.samples
    for i in np.flatnonzero(best_score < cfg.allowed_range):
        lag = int(round(w.sample_rate / best_f0[i]))
        r = periodicity(full, int(round(i * hop * w.sample_rate)), lag, 3 * lag)
        if r >= cfg.periodicity_threshold:
            f0[i] = best_f0[i]
            voiced[i] = True
    return PitchContour(f0, voiced, hop)


def continue_contour(c: PitchContour) -> PitchContour:
    """Fill unvoiced gaps by log-linear interpolation; hold the ends."""
    idx = np.flatnonzero(c.voiced)
    if len(idx) == 0:
        raise ValueError("contour has no voiced frames to continue from")
    if len(idx) == len(c):
        return PitchContour(c.f0.copy(), c.voiced.copy(), c.hop_seconds)
    log_f0 = np.interp(np.arange(len(c)), idx, np.log(c.f0[idx]))
    f0 = np.exp(log_f0)
    f0[idx] = c.f0[idx]
    return PitchContour(f0, np.ones(len(c), dtype=bool), c.hop_seconds)
