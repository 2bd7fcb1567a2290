"""Procedural speakers: a glottal source through per-speaker formant filters.

Each speaker has its own pitch range, vocal-tract length (which scales every
formant), spectral tilt and breathiness. A clip is a run of vowel-like
segments with a wandering pitch contour, so two clips of one speaker share
timbre and register but not content.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .audio import Waveform, write_wav

# (F1, F2, F3) in Hz for a reference adult vocal tract
VOWELS = np.array(
    [
        [730, 1090, 2440],
        [270, 2290, 3010],
        [530, 1840, 2480],
        [660, 1720, 2410],
        [300, 870, 2240],
        [570, 840, 2410],
        [440, 1020, 2240],
        [490, 1350, 1690],
        [390, 1990, 2550],
    ],
    dtype=np.float64,
)
F4 = 3500.0


@dataclass(frozen=True)
class SpeakerRecipe:
    f0: float
    f0_range: float
    tract_scale: float
    tilt: float
    breath: float
    bandwidth: float
    vowel_bias: tuple


def make_recipe(rng: np.random.Generator) -> SpeakerRecipe:
    return SpeakerRecipe(
        f0=float(np.exp(rng.uniform(np.log(85.0), np.log(260.0)))),
        f0_range=float(rng.uniform(0.05, 0.2)),
        tract_scale=float(rng.uniform(0.8, 1.25)),
        tilt=float(rng.uniform(0.8, 1.8)),
        breath=float(rng.uniform(0.01, 0.12)),
        bandwidth=float(rng.uniform(50.0, 120.0)),
        vowel_bias=tuple(rng.dirichlet(np.ones(len(VOWELS)) * 0.7).tolist()),
    )


def _glottal(f0_track: np.ndarray, sr: int, tilt: float) -> np.ndarray:
    """Sum of harmonics below Nyquist with ``k ** -tilt`` amplitudes."""
    phase = 2 * np.pi * np.cumsum(f0_track) / sr
    out = np.zeros_like(phase)
    k_max = int(0.45 * sr / f0_track.min())
    for k in range(1, k_max + 1):
        alive = k * f0_track < 0.45 * sr
        out += np.where(alive, np.sin(k * phase), 0.0) * k ** (-tilt)
    return out


def _resonator(x: np.ndarray, freq: float, bw: float, sr: int) -> np.ndarray:
    r = np.exp(-np.pi * bw / sr)
    c = 2 * r * np.cos(2 * np.pi * freq / sr)
    return lfilter([1.0 - r], [1.0, -c, r * r], x)


def synthesize_clip(recipe: SpeakerRecipe, rng: np.random.Generator, seconds: float = 4.5, sr: int = 24000) -> Waveform:
    n = int(round(seconds * sr))
    t = np.arange(n) / sr
    drift = np.interp(t, np.linspace(0, seconds, 8), rng.normal(0.0, 1.0, 8))
    vibrato = 0.01 * np.sin(2 * np.pi * rng.uniform(4.0, 6.0) * t)
    f0 = recipe.f0 * np.exp(recipe.f0_range * 0.5 * drift + vibrato)
    source = _glottal(f0, sr, recipe.tilt)
    source = source / np.max(np.abs(source)) + recipe.breath * rng.normal(size=n)

    out = np.zeros(n)
    pos = 0
    while pos < n:
        seg = int(rng.uniform(0.15, 0.4) * sr)
        end = min(n, pos + seg)
        v = VOWELS[rng.choice(len(VOWELS), p=np.asarray(recipe.vowel_bias))]
        formants = np.append(v, F4) / recipe.tract_scale
        # a short overlap on both sides smooths the joins
        lo, hi = max(0, pos - 240), min(n, end + 240)
        y = source[lo:hi]
        for i, f in enumerate(formants):
            y = _resonator(y, min(f, 0.45 * sr), recipe.bandwidth * (1 + 0.5 * i), sr)
        env = np.hanning(hi - lo + 2)[1:-1]
        out[lo:hi] += y * env * rng.uniform(0.6, 1.0)
        pos = end
    out /= np.max(np.abs(out)) + 1e-12
    return Waveform(0.7 * out, sr)


def make_speaker_corpus(n_speakers: int = 8, clips_per_speaker: int = 50, seconds: float = 4.5, sr: int = 24000, seed: int = 0):
    """In-memory corpus: ``[(speaker_id, clip_id, Waveform), ...]`` in speaker order."""
    root = np.random.default_rng(seed)
    recipes = [make_recipe(root) for _ in range(n_speakers)]
    out = []
    for s, recipe in enumerate(recipes):
        rng = np.random.default_rng([seed, s])
        for c in range(clips_per_speaker):
            out.append((f"spk{s:02d}", f"spk{s:02d}_{c:03d}", synthesize_clip(recipe, rng, seconds, sr)))
    return out


def write_speaker_corpus(out_dir, **kwargs) -> list:
    """Write ``out_dir/<speaker>/<clip>.wav``; returns the written paths."""
    out_dir = Path(out_dir)
    paths = []
    for spk, clip, w in make_speaker_corpus(**kwargs):
        (out_dir / spk).mkdir(parents=True, exist_ok=True)
        path = out_dir / spk / f"{clip}.wav"
        write_wav(path, w)
        paths.append(path)
    return paths
