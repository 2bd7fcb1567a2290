"""Pipeline configuration: one flat ``key = value`` file with sections.

Every hyperparameter lives here. Unknown sections or keys are rejected so a
typo cannot silently fall back to a default, and the canonical dump is
hashed into checkpoints and reports.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import typing
from dataclasses import dataclass, field

from .errors import ConfigError


@dataclass
class AudioConfig:
    sample_rate: int = 24000
    segment_seconds: float = 4.0

    @property
    def segment_samples(self) -> int:
        return int(round(self.sample_rate * self.segment_seconds))


@dataclass
class CQTConfig:
    octaves: int = 8
    bins_per_octave: int = 64
    min_frequency: float = 32.7
    block_seconds: float = 1.0
    # must be divisible by 2**(octaves - 1) so every octave samples frames on-grid
    hop_length: int = 384

    @property
    def n_bins(self) -> int:
        return self.octaves * self.bins_per_octave


@dataclass
class MelConfig:
    n_fft: int = 1201
    win_length: int = 1201
    hop_length: int = 600
    n_mels: int = 128
    log_floor: float = 1e-10


@dataclass
class PitchConfig:
    f0_floor: float = 70.0
    f0_ceil: float = 400.0
    frame_period_ms: float = 5.0
    channels_in_octave: float = 2.0
    target_rate: int = 4000
    allowed_range: float = 0.1
    periodicity_threshold: float = 0.5
    min_scale: int = 1
    n_scales: int = 36


@dataclass
class EncoderConfig:
    spec_channels: tuple = (32, 32, 32, 32, 64, 64, 128, 128, 128, 128)
    dropout: float = 0.4
    embed_dim: int = 256
    hidden_dim: int = 512
    heads: int = 32
    layers: int = 3
    vit_out: int = 512
    mel_patch: int = 16
    pitch_patch: int = 9
    readout: str = "cls"
    embedding_dim: int = 2048


@dataclass
class LossConfig:
    kind: str = "am"
    scale: float = 30.0
    margin: float = 0.4
    # 0 means one class per training speaker
    num_classes: int = 0


@dataclass
class TrainConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 52
    steps: int = 22000
    steps_per_epoch: int = 0
    seed: int = 0
    precision: str = "float32"
    redraw_segments: bool = True
    val_fpr: float = 0.01
    val_fraction: float = 0.1


@dataclass
class DurationConfig:
    d_model: int = 128
    heads: int = 4
    layers: int = 2
    ff_dim: int = 256
    embedding_dim: int = 2048
    lr: float = 1e-3
    epochs: int = 20
    batch_size: int = 16
    sample_rate: int = 24000
    hop_length: int = 256
    test_fraction: float = 0.2


@dataclass
class PipelineConfig:
    audio: AudioConfig = field(default_factory=AudioConfig)
    cqt: CQTConfig = field(default_factory=CQTConfig)
    mel: MelConfig = field(default_factory=MelConfig)
    pitch: PitchConfig = field(default_factory=PitchConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    duration: DurationConfig = field(default_factory=DurationConfig)

    def dumps(self) -> str:
        return dumps(self)

    def hash(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()

    def replace(self, **sections) -> "PipelineConfig":
        """Copy with per-section overrides, e.g. ``replace(loss={"kind": "arc"})``."""
        new = loads(self.dumps())
        for name, values in sections.items():
            if name not in _section_types():
                raise ConfigError(f"unknown section [{name}]")
            sec = getattr(new, name)
            for key, value in values.items():
                if key not in {f.name for f in dataclasses.fields(sec)}:
                    raise ConfigError(f"unknown key {key!r} in [{name}]")
                setattr(sec, key, value)
        return new


def desk_config() -> PipelineConfig:
    """Narrow-width variant for CPU-scale training runs.

    Frontends keep their full-size geometry; only network widths shrink.
    """
    cfg = PipelineConfig()
    return cfg.replace(
        encoder=dict(
            spec_channels=(8, 8, 8, 8, 16, 16, 32, 32, 32, 32),
            embed_dim=64,
            hidden_dim=128,
            heads=4,
            layers=3,
            vit_out=128,
            embedding_dim=256,
        ),
        train=dict(lr=1e-3, batch_size=16),
    )


def _section_types():
    return {f.name: f.default_factory for f in dataclasses.fields(PipelineConfig)}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def _parse(raw: str, typ, where: str):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if typ is tuple:
            return tuple(int(v) for v in raw.split(",") if v.strip())
        return typ(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {typ.__name__}") from exc


def dumps(cfg: PipelineConfig) -> str:
    out = io.StringIO()
    for sec_field in dataclasses.fields(cfg):
        sec = getattr(cfg, sec_field.name)
        out.write(f"[{sec_field.name}]\n")
        for f in dataclasses.fields(sec):
            out.write(f"{f.name} = {_format(getattr(sec, f.name))}\n")
        out.write("\n")
    return out.getvalue()


def loads(text: str) -> PipelineConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    cfg = PipelineConfig()
    sections = _section_types()
    for name in parser.sections():
        if name not in sections:
            raise ConfigError(f"unknown section [{name}]")
        sec = getattr(cfg, name)
        hints = typing.get_type_hints(type(sec))
        known = {f.name for f in dataclasses.fields(sec)}
        for key, raw in parser.items(name):
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in [{name}]")
            setattr(sec, key, _parse(raw, hints[key], f"[{name}] {key}"))
    return cfg


def load(path) -> PipelineConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
