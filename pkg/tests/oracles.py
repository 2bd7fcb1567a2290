"""Reference implementations used only by the tests.

Each one takes a different route from the library code: exhaustive sweeps
instead of sorting, exact rationals instead of floats, dense FFTs instead of
closed forms.
"""

from fractions import Fraction

import numpy as np

from vemb.audio import Waveform
from vemb.config import CQTConfig, PitchConfig
from vemb.frontends import center_frequencies, cqt, estimate_pitch
from vemb.frontends.cqt import octave_kernels


def tpr_sweep(pos, neg, level):
    """TPR at the smallest threshold whose strict false-positive count stays below the budget.

    The budget is ``k = floor(level * #neg)`` evaluated exactly in decimal
    arithmetic; at most ``max(k, 1) - 1`` negatives may sit strictly above
    the threshold. Every distinct score is tried as a threshold.
    """
    pos = np.asarray(pos, dtype=np.float64)
    neg = np.asarray(neg, dtype=np.float64)
    k = int(Fraction(str(level)) * len(neg))
    allowed = max(k, 1) - 1
    best = None
    for t in np.unique(np.concatenate([pos, neg])):
        if np.count_nonzero(neg > t) <= allowed and (best is None or t < best):
            best = t
    return np.count_nonzero(pos > best) / len(pos)


def tpr_sweep_counts(pos, neg, level):
    """Same sweep as ``tpr_sweep`` with the per-threshold counts done by binary search."""
    pos = np.sort(np.asarray(pos, dtype=np.float64))
    neg = np.sort(np.asarray(neg, dtype=np.float64))
    allowed = max(int(Fraction(str(level)) * len(neg)), 1) - 1
    thresholds = np.unique(np.concatenate([pos, neg]))
    above = len(neg) - np.searchsorted(neg, thresholds, side="right")
    best = thresholds[np.flatnonzero(above <= allowed)[0]]
    return (len(pos) - np.searchsorted(pos, best, side="right")) / len(pos)


def eer_pairs(pos, neg):
    """Smallest diagonal crossing over segments joining any two ROC operating points."""
    pos = np.asarray(pos, dtype=np.float64)
    neg = np.asarray(neg, dtype=np.float64)
    thresholds = np.concatenate([[np.inf], np.unique(np.concatenate([pos, neg]))])
    pts = [(np.mean(neg >= t), np.mean(pos < t)) for t in thresholds]
    best = 1.0
    for i, (x1, y1) in enumerate(pts):
        for x2, y2 in pts[i:]:
            if x1 == y1:
                best = min(best, x1)
            denom = (x2 - x1) - (y2 - y1)
            if denom == 0:
                continue
            a = (y1 - x1) / denom
            if 0 <= a <= 1:
                best = min(best, x1 + a * (x2 - x1))
    return best


def cosine_softmax_ce(f, w, labels, scale=1.0):
    f = f / np.linalg.norm(f, axis=1, keepdims=True)
    w = w / np.linalg.norm(w, axis=0, keepdims=True)
    logits = scale * (f @ w)
    lse = np.log(np.exp(logits - logits.max(axis=1, keepdims=True)).sum(axis=1)) + logits.max(axis=1)
    return float(np.mean(lse - logits[np.arange(len(labels)), labels]))


def cqt_tone_argmax_errors(n_tones=20, sample_rate=24000, seconds=2.0):
    """Worst per-frame argmax error (in bins) for pure tones at log-spaced bin centres."""
    cfg = CQTConfig()
    freqs = center_frequencies(cfg)
    t = np.arange(int(seconds * sample_rate)) / sample_rate
    worst = []
    for k in np.linspace(0, cfg.n_bins - 1, n_tones).round().astype(int):
        spec = cqt(Waveform(0.5 * np.sin(2 * np.pi * freqs[k] * t), sample_rate), cfg)
        mag = spec.magnitude()
        # skip frames whose analysis window crosses a block edge
        fpb = mag.shape[1] // int(round(seconds / cfg.block_seconds))
        inner = np.concatenate([np.arange(b * fpb + fpb // 4, b * fpb + 3 * fpb // 4) for b in range(mag.shape[1] // fpb)])
        worst.append(int(np.max(np.abs(mag[:, inner].argmax(axis=0) - k))))
    return np.array(worst)


def cqt_q_ratios(sample_rate=24000, n_fft=2**18):
    """Measured ``f / (-3 dB bandwidth)`` of every discrete kernel, from a dense FFT."""
    cfg = CQTConfig()
    q = []
    for octave in range(cfg.octaves):
        kernels, _, rate = octave_kernels(cfg, sample_rate, octave)
        resp = np.abs(np.fft.fft(np.conj(kernels), n=n_fft, axis=1))
        freqs = np.fft.fftfreq(n_fft, 1 / rate)
        for row, f in zip(resp, center_frequencies(cfg)[octave * cfg.bins_per_octave : (octave + 1) * cfg.bins_per_octave]):
            peak = np.argmax(row)
            half = row[peak] / np.sqrt(2)
            lo = peak
            while row[lo - 1] >= half:
                lo -= 1
            hi = peak
            while row[(hi + 1) % n_fft] >= half:
                hi += 1
            q.append(f / ((hi - lo) * rate / n_fft))
    return np.array(q)


def pitch_accuracy(freq, n_harmonics=3, sample_rate=24000, seconds=4.0, tolerance=0.03):
    """Fraction of voiced frames within ``tolerance`` of the true F0, and the voiced fraction."""
    t = np.arange(int(seconds * sample_rate)) / sample_rate
    x = sum(np.sin(2 * np.pi * h * freq * t) / h for h in range(1, n_harmonics + 1))
    c = estimate_pitch(Waveform(0.3 * x / np.max(np.abs(x)), sample_rate), PitchConfig())
    if not c.voiced.any():
        return 0.0, 0.0
    err = np.abs(c.f0[c.voiced] - freq) / freq
    return float(np.mean(err <= tolerance)), float(np.mean(c.voiced))
