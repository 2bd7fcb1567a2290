"""Waveform loading, band-limited resampling and fixed-length segmentation."""

from __future__ import annotations

import math
import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import i0

from .errors import EmptyAudioError, UnsupportedCodecError, WavReadError

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE

KAISER_BETA = 8.6
TAPS_PER_PHASE = 64


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"expected mono samples, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class SegmentSpec:
    duration_seconds: float = 4.0
    target_rate: int = 24000
    seed: int = 0

    def __post_init__(self):
        if not self.duration_seconds > 0:
            raise ValueError("duration_seconds must be positive")
        if not self.target_rate > 0:
            raise ValueError("target_rate must be positive")

    @property
    def num_samples(self) -> int:
        return int(round(self.duration_seconds * self.target_rate))


def _read_chunks(buf: bytes):
    pos = 12
    while pos + 8 <= len(buf):
        cid, size = struct.unpack_from("<4sI", buf, pos)
        body = buf[pos + 8 : pos + 8 + size]
        yield cid, body
        pos += 8 + size + (size & 1)


def load_wav(path) -> Waveform:
    """Read a PCM16 or float32 RIFF/WAVE file as a mono waveform.

    Channels are averaged. PCM16 is scaled by 1/32768; float data is
    clipped to [-1, 1].

    Raises:
      WavReadError: missing file, or not a RIFF/WAVE container.
      UnsupportedCodecError: any sample format other than PCM16/float32.
      EmptyAudioError: the data chunk holds no sample frames.
    """
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise WavReadError(f"cannot read {path}: {exc}") from exc
    if len(buf) < 12 or buf[:4] != b"RIFF" or buf[8:12] != b"WAVE":
        raise WavReadError(f"{path}: not a RIFF/WAVE file")

    fmt = data = None
    for cid, body in _read_chunks(buf):
        if cid == b"fmt ":
            fmt = body
        elif cid == b"data":
            data = body
    if fmt is None or len(fmt) < 16 or data is None:
        raise WavReadError(f"{path}: missing fmt or data chunk")

    tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", fmt)
    if tag == _WAVE_FORMAT_EXTENSIBLE:
        if len(fmt) < 26:
            raise WavReadError(f"{path}: truncated extensible fmt chunk")
        tag = struct.unpack_from("<H", fmt, 24)[0]
    if channels < 1 or rate < 1:
        raise WavReadError(f"{path}: invalid channel count or rate")

    if tag == _WAVE_FORMAT_PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 1.0 / 32768.0
    elif tag == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise UnsupportedCodecError(f"{path}: format tag {tag:#x} with {bits} bits")

    frame_bytes = channels * dtype.itemsize
    n_frames = len(data) // frame_bytes
    if n_frames == 0:
        raise EmptyAudioError(f"{path}: no audio frames")
    raw = np.frombuffer(data[: n_frames * frame_bytes], dtype=dtype)
    x = raw.reshape(n_frames, channels).astype(np.float64) * scale
    if not np.all(np.isfinite(x)):
        raise WavReadError(f"{path}: non-finite samples")
    mono = x.mean(axis=1)
    return Waveform(np.clip(mono, -1.0, 1.0), rate)


def write_wav(path, w: Waveform) -> None:
    """Write a waveform as 16-bit PCM mono."""
    pcm = np.clip(np.round(w.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(w.sample_rate)
        fh.writeframes(pcm.tobytes())


def _phase_table(up: int, down: int):
    """Kaiser-windowed sinc taps for each of the ``up`` fractional phases."""
    cutoff = min(1.0, up / down)
    half_width = (TAPS_PER_PHASE // 2) / cutoff
    k = int(math.ceil(half_width))
    offsets = np.arange(-k + 1, k + 1)
    frac = (np.arange(up) * down % up) / up
    tau = frac[:, None] - offsets[None, :]
    arg = np.clip(1.0 - (tau / half_width) ** 2, 0.0, None)
    window = np.where(np.abs(tau) <= half_width, i0(KAISER_BETA * np.sqrt(arg)) / i0(KAISER_BETA), 0.0)
    taps = cutoff * np.sinc(cutoff * tau) * window
    taps /= taps.sum(axis=1, keepdims=True)
    return taps, offsets


def resample(w: Waveform, target_rate: int, chunk: int = 8192) -> Waveform:
    """Band-limited rational resampling.

    Output length is ``round(len * target / source)``. Equal rates return the
    input unchanged.
    """
    target_rate = int(target_rate)
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == w.sample_rate:
        return w
    g = math.gcd(w.sample_rate, target_rate)
    up, down = target_rate // g, w.sample_rate // g
    taps, offsets = _phase_table(up, down)

    x = w.samples
    n_out = int(round(len(x) * target_rate / w.sample_rate))
    pad = offsets[-1] + 1
    xp = np.concatenate([np.zeros(pad), x, np.zeros(pad)])
    out = np.empty(n_out)
    for start in range(0, n_out, chunk):
        n = np.arange(start, min(start + chunk, n_out))
        base = (n * down) // up
        idx = base[:, None] + offsets[None, :] + pad
        out[start : start + len(n)] = np.einsum("ij,ij->i", xp[idx], taps[n % up])
    return Waveform(out, target_rate)


def random_segment(w: Waveform, spec: SegmentSpec) -> Waveform:
    """Draw a ``spec.duration_seconds`` window at a seeded uniform offset.

    Inputs shorter than the window are tiled cyclically, starting at a
    seeded phase.
    """
    if w.sample_rate != spec.target_rate:
        raise ValueError(f"waveform at {w.sample_rate} Hz, segment expects {spec.target_rate} Hz")
    if len(w) == 0:
        raise ValueError("cannot segment an empty waveform")
    need = spec.num_samples
    rng = np.random.default_rng(spec.seed)
    x = w.samples
    if len(x) >= need:
        offset = int(rng.integers(0, len(x) - need + 1))
        return Waveform(x[offset : offset + need].copy(), w.sample_rate)
    phase = int(rng.integers(0, len(x)))
    idx = (phase + np.arange(need)) % len(x)
    return Waveform(x[idx], w.sample_rate)


def center_segment(w: Waveform, spec: SegmentSpec) -> Waveform:
    """Deterministic inference-time window: centre crop, or tile from phase 0."""
    need = spec.num_samples
    x = w.samples
    if len(x) >= need:
        offset = (len(x) - need) // 2
        return Waveform(x[offset : offset + need].copy(), w.sample_rate)
    return Waveform(x[np.arange(need) % len(x)], w.sample_rate)


def prepare(w: Waveform, spec: SegmentSpec, seed: int | None = None) -> Waveform:
    """Resample to the model rate and cut a segment (random if ``seed`` given)."""
    w = resample(w, spec.target_rate)
    if seed is None:
        return center_segment(w, spec)
    return random_segment(w, SegmentSpec(spec.duration_seconds, spec.target_rate, seed))
