"""Speaker-classification training of the embedding network."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import config as config_mod
from .audio import SegmentSpec, Waveform, center_segment, load_wav, random_segment, resample
from .config import PipelineConfig
from .encoders import SpeakerEncoder, build_model, manifest
from .errors import DataError, FormatError, NumericError
from .frontends import extract_features
from .losses import MarginHead
from .metrics import ScoreSet, Trial, TrialList, eer, tpr_at_fpr
from .nn import Adam, no_grad
from .nn import checkpoint as ckpt


@dataclass
class LabeledClip:
    clip_id: str
    speaker: str
    waveform: Waveform


def scan_dataset(data_dir, sample_rate: int) -> list:
    """Load ``data_dir/<speaker>/*.wav`` (sorted) and resample to ``sample_rate``."""
    root = Path(data_dir)
    if not root.is_dir():
        raise DataError(f"{root} is not a directory")
    clips = []
    for spk_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for wav in sorted(spk_dir.glob("*.wav")):
            w = resample(load_wav(wav), sample_rate)
            clips.append(LabeledClip(f"{spk_dir.name}/{wav.name}", spk_dir.name, w))
    return clips


def _bucket(text: str) -> float:
    """Stable hash of a string mapped onto [0, 1)."""
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little") / 2.0**64


def split_validation(clips, fraction: float):
    """Hold out speakers whose id hashes below ``fraction``.

    Fewer than two held-out speakers cannot form negative trials, so in that
    case whole clips are held out by the hash of their id instead.
    """
    if fraction <= 0:
        return list(clips), []
    speakers = sorted({c.speaker for c in clips})
    held = {s for s in speakers if _bucket(s) < fraction}
    if len(held) >= 2 and len(held) < len(speakers) - 1:
        return [c for c in clips if c.speaker not in held], [c for c in clips if c.speaker in held]
    val = [c for c in clips if _bucket(c.clip_id) < fraction]
    return [c for c in clips if _bucket(c.clip_id) >= fraction], val


def all_pairs_trials(ids, speakers) -> TrialList:
    trials = []
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            trials.append(Trial(ids[i], ids[j], speakers[i] == speakers[j]))
    return TrialList(trials)


def pair_scores(vectors: np.ndarray, speakers) -> ScoreSet:
    """Cosine scores of every unordered pair, split by same/different speaker."""
    v = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(v, axis=1)
    if np.any(norms == 0):
        raise DataError("zero embedding")
    v = v / norms[:, None]
    sims = np.clip(v @ v.T, -1.0, 1.0)
    spk = np.asarray(speakers)
    iu = np.triu_indices(len(v), k=1)
    same = spk[iu[0]] == spk[iu[1]]
    return ScoreSet(sims[iu][same], sims[iu][~same])


def embed_waveforms(model: SpeakerEncoder, waves, cfg: PipelineConfig, batch: int = 16) -> np.ndarray:
    """Eval-mode embeddings of centre segments, ``[len(waves), dim]``."""
    spec = SegmentSpec(cfg.audio.segment_seconds, cfg.audio.sample_rate)
    was_training = model.training
    model.eval()
    out = []
    try:
        with no_grad():
            for start in range(0, len(waves), batch):
                feats = [extract_features(center_segment(w, spec), cfg) for w in waves[start : start + batch]]
                out.append(model.encode_features(feats).data.astype(np.float64))
    finally:
        model.train(was_training)
    return np.concatenate(out) if out else np.zeros((0, cfg.encoder.embedding_dim))


def validate(model, clips, cfg: PipelineConfig, fpr_level: float) -> dict:
    vecs = embed_waveforms(model, [c.waveform for c in clips], cfg)
    s = pair_scores(vecs, [c.speaker for c in clips])
    return {"tpr": tpr_at_fpr(s, fpr_level), "eer": eer(s)}


def manifest_hash(m: dict) -> str:
    return hashlib.sha256(json.dumps(m, sort_keys=True).encode("utf-8")).hexdigest()


def save_checkpoint(path, model: SpeakerEncoder, head: MarginHead, cfg: PipelineConfig, **extra) -> dict:
    params = {f"model.{k}": v for k, v in model.state_dict().items()}
    params.update({f"head.{k}": v for k, v in head.state_dict().items()})
    m = manifest(model, cfg, **extra)
    ckpt.save(path, params, m)
    return m


def load_checkpoint(path):
    """Rebuild the encoder from a checkpoint; returns ``(model, cfg, manifest)``."""
    params, m = ckpt.load(path)
    if m is None or "config" not in m:
        raise FormatError(f"{path}: checkpoint has no manifest")
    cfg = config_mod.loads(m["config"])
    if cfg.hash() != m.get("config_hash"):
        raise FormatError(f"{path}: config hash does not match its config text")
    model = build_model(cfg)
    model.load_state_dict({k[len("model.") :]: v for k, v in params.items() if k.startswith("model.")})
    model.eval()
    return model, cfg, m


@dataclass
class TrainResult:
    model: SpeakerEncoder
    head: MarginHead
    losses: list = field(default_factory=list)
    validation: list = field(default_factory=list)
    best_step: int | None = None
    checkpoints: list = field(default_factory=list)


class FeatureCache:
    """Frontend features keyed by clip id and segment offset seed."""

    def __init__(self):
        self._store = {}

    def get(self, key, compute):
        if key not in self._store:
            self._store[key] = compute()
        return self._store[key]

    def __len__(self):
        return len(self._store)


def _segment_seed(seed: int, clip_index: int, step: int, redraw: bool) -> int:
    entropy = [seed, clip_index, step] if redraw else [seed, clip_index]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def train(
    clips,
    cfg: PipelineConfig,
    val_clips=None,
    out_dir=None,
    log=None,
    cache: FeatureCache | None = None,
    prefix: str = "model",
) -> TrainResult:
    """Step-based training loop.

    Each epoch walks a seeded permutation of the clips in batches. Every
    sample is a seeded random segment; with ``redraw_segments`` off each
    clip keeps one segment, so its features are computed once. When
    ``out_dir`` is given a checkpoint is written after every epoch and
    whenever validation TPR at ``val_fpr`` improves.
    """
    clips = list(clips)
    if not clips:
        raise DataError("empty training set")
    speakers = sorted({c.speaker for c in clips})
    if len(speakers) < 2:
        raise DataError("training needs at least two speakers")
    label_of = {s: i for i, s in enumerate(speakers)}
    tc = cfg.train
    dtype = np.dtype(tc.precision)
    model = build_model(cfg, seed=tc.seed, dtype=dtype)
    n_classes = cfg.loss.num_classes or len(speakers)
    if n_classes < len(speakers):
        raise DataError(f"num_classes {n_classes} < {len(speakers)} speakers")
    head = MarginHead(cfg.encoder.embedding_dim, n_classes, cfg.loss.scale, cfg.loss.margin, cfg.loss.kind, seed=tc.seed + 1, dtype=dtype)
    opt = Adam(model.parameters() + head.parameters(), lr=tc.lr, betas=(tc.beta1, tc.beta2), eps=tc.adam_eps)
    spec = SegmentSpec(cfg.audio.segment_seconds, cfg.audio.sample_rate)
    cache = cache if cache is not None else FeatureCache()
    steps_per_epoch = tc.steps_per_epoch or math.ceil(len(clips) / tc.batch_size)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    result = TrainResult(model, head)
    best = -1.0
    order = None
    model.train()

    for step in range(tc.steps):
        epoch, within = divmod(step, steps_per_epoch)
        if within == 0:
            order = np.random.default_rng([tc.seed, epoch]).permutation(len(clips))
        pick = np.take(order, np.arange(within * tc.batch_size, (within + 1) * tc.batch_size), mode="wrap")
        feats = []
        for i in pick:
            i = int(i)
            seg_seed = _segment_seed(tc.seed, i, step, tc.redraw_segments)

            def compute(i=i, seg_seed=seg_seed):
                seg = random_segment(clips[i].waveform, SegmentSpec(spec.duration_seconds, spec.target_rate, seg_seed))
                return extract_features(seg, cfg).astype(dtype)

            feats.append(cache.get((clips[i].clip_id, seg_seed), compute))
        labels = np.array([label_of[clips[int(i)].speaker] for i in pick])
        emb = model.encode_features(feats, rng=np.random.default_rng([tc.seed, step, 1]))
        loss = head.loss(emb, labels)
        value = float(loss.data)
        if not math.isfinite(value):
            raise NumericError(f"loss became {value} at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        result.losses.append(value)
        if log is not None:
            log(f"step {step + 1} loss {value:.6f}")

        end_of_epoch = within == steps_per_epoch - 1 or step == tc.steps - 1
        if not end_of_epoch:
            continue
        info = {"epoch": epoch + 1, "step": step + 1, "speakers": speakers}
        if val_clips:
            v = validate(model, val_clips, cfg, tc.val_fpr)
            result.validation.append({"step": step + 1, **v})
            if log is not None:
                log(f"epoch {epoch + 1} val tpr@{tc.val_fpr} {v['tpr']:.4f} eer {v['eer']:.4f}")
            if v["tpr"] > best:
                best = v["tpr"]
                result.best_step = step + 1
                if out_dir is not None:
                    path = out_dir / f"{prefix}.best.ckpt"
                    save_checkpoint(path, model, head, cfg, **info, val_tpr=v["tpr"])
                    result.checkpoints.append(path)
        if out_dir is not None:
            path = out_dir / f"{prefix}.epoch{epoch + 1:03d}.ckpt"
            save_checkpoint(path, model, head, cfg, **info)
            result.checkpoints.append(path)
    model.eval()
    return result
