"""Phoneme duration prediction under different conditioning vectors.

A small attention model predicts per-phoneme frame counts from phoneme ids
plus one global conditioning vector. Running it with no vector, a noise
vector, a speaker embedding and an utterance embedding shows how much
timing information each vector carries.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import DurationConfig
from .encoders import TransformerLayer
from .errors import AlignmentError, ConfigError, ShapeError
from .metrics import ccc, mae, rmse, wder
from .nn import Adam, Module, Parameter, Tensor, layer_norm, linear, no_grad, softplus
from .nn.module import kaiming_uniform, ones, trunc_normal, zeros

ARPABET = (
    "AA AE AH AO AW AY B CH D DH EH ER EY F G HH IH IY JH K L M N NG OW OY P R S SH T TH UH UW V W Y Z ZH"
).split()
SPECIAL = ("sil", "sp", "spn")
DEFAULT_VOCAB = tuple(SPECIAL) + tuple(ARPABET)

MAX_GAP_SECONDS = 0.020
_OVERLAP_TOL = 1e-9
ALIGNMENT_HEADER = ("utt", "speaker", "phoneme", "start_s", "end_s")

# utterance-embedding row for the full-scale system, kept for reports only
REFERENCE_UTTERANCE_ROW = {"MAE": 1.869, "RMSE": 3.503, "WDER": 0.9501, "CCC": 0.8038}


class Vocabulary:
    """Closed phoneme inventory; trailing stress digits (``AH0``) are ignored on lookup."""

    def __init__(self, symbols=DEFAULT_VOCAB):
        self.symbols = tuple(symbols)
        self._index = {s: i for i, s in enumerate(self.symbols)}

    def __len__(self):
        return len(self.symbols)

    def __contains__(self, symbol):
        return self._key(symbol) in self._index

    @staticmethod
    def _key(symbol: str) -> str:
        return symbol.rstrip("012") if symbol[-1:].isdigit() and symbol[:-1] else symbol

    def id(self, symbol: str) -> int:
        try:
            return self._index[self._key(symbol)]
        except KeyError:
            raise AlignmentError(f"unknown phoneme {symbol!r}") from None


@dataclass(frozen=True)
class PhonemeSequence:
    symbols: tuple
    utterance_id: str
    speaker_id: str

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if not self.symbols:
            raise ShapeError("empty phoneme sequence")

    def __len__(self):
        return len(self.symbols)


@dataclass(frozen=True)
class AlignedUtterance:
    utterance_id: str
    speaker_id: str
    phonemes: tuple
    starts: tuple
    ends: tuple

    def sequence(self, vocab: Vocabulary) -> PhonemeSequence:
        return PhonemeSequence([vocab.id(p) for p in self.phonemes], self.utterance_id, self.speaker_id)

    def frames(self, sample_rate: int, hop: int = 256) -> np.ndarray:
        return np.array([duration_frames(a, b, sample_rate, hop) for a, b in zip(self.starts, self.ends)], dtype=np.int64)


def _half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def duration_frames(start_s: float, end_s: float, sample_rate: int, hop: int = 256) -> int:
    """Frames covered by ``[start_s, end_s)``.

    Both boundaries are rounded to the frame grid first, so per-phoneme
    counts of a contiguous segmentation sum to the whole-interval count.
    """
    if end_s < start_s:
        raise AlignmentError(f"interval ends before it starts: [{start_s}, {end_s})")
    return _half_up(end_s * sample_rate / hop) - _half_up(start_s * sample_rate / hop)


def _check_intervals(utt, starts, ends):
    """Sort, then reject overlaps and large gaps; small gaps are closed by extending the earlier phoneme."""
    order = sorted(range(len(starts)), key=lambda i: starts[i])
    starts = [starts[i] for i in order]
    ends = [ends[i] for i in order]
    for i, (a, b) in enumerate(zip(starts, ends)):
        if b < a:
            raise AlignmentError(f"{utt}: interval {i} ends before it starts")
    for i in range(1, len(starts)):
        gap = starts[i] - ends[i - 1]
        if gap < -_OVERLAP_TOL:
            raise AlignmentError(f"{utt}: intervals {i - 1} and {i} overlap by {-gap:.6f} s")
        if gap > MAX_GAP_SECONDS + _OVERLAP_TOL:
            raise AlignmentError(f"{utt}: gap of {gap:.6f} s before interval {i}")
        ends[i - 1] = starts[i]
    return order, starts, ends


def load_alignment(path, vocab: Vocabulary | None = None) -> list:
    """Read the alignment TSV into utterances, in first-appearance order."""
    vocab = vocab or Vocabulary()
    rows: dict = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != ALIGNMENT_HEADER:
            raise AlignmentError(f"{path}: header must be {'<TAB>'.join(ALIGNMENT_HEADER)}")
        for lineno, row in enumerate(reader, 2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 5:
                raise AlignmentError(f"{path}:{lineno}: expected 5 columns, got {len(row)}")
            utt, spk, ph, a, b = row
            if ph not in vocab:
                raise AlignmentError(f"{path}:{lineno}: unknown phoneme {ph!r}")
            try:
                a, b = float(a), float(b)
            except ValueError:
                raise AlignmentError(f"{path}:{lineno}: bad time value") from None
            entry = rows.setdefault(utt, {"speaker": spk, "ph": [], "a": [], "b": []})
            if entry["speaker"] != spk:
                raise AlignmentError(f"{path}:{lineno}: utterance {utt} has two speakers")
            entry["ph"].append(ph)
            entry["a"].append(a)
            entry["b"].append(b)
    out = []
    for utt, e in rows.items():
        order, starts, ends = _check_intervals(utt, e["a"], e["b"])
        out.append(AlignedUtterance(utt, e["speaker"], tuple(e["ph"][i] for i in order), tuple(starts), tuple(ends)))
    return out


def save_alignment(path, utterances) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(ALIGNMENT_HEADER)
        for u in utterances:
            for ph, a, b in zip(u.phonemes, u.starts, u.ends):
                writer.writerow([u.utterance_id, u.speaker_id, ph, repr(float(a)), repr(float(b))])


class ConditioningMode(enum.Enum):
    NONE = "none"
    NOISE = "noise"
    SPEAKER_EMB = "speaker_emb"
    UTTERANCE_EMB = "utterance_emb"

    @classmethod
    def parse(cls, name: str) -> "ConditioningMode":
        for m in cls:
            if name.lower() in (m.value, m.name.lower()):
                return m
        raise ConfigError(f"unknown conditioning mode {name!r}")


def _sinusoid(length: int, dim: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    rate = np.exp(-np.log(10000.0) * (np.arange(0, dim, 2) / dim))
    table = np.zeros((length, dim))
    table[:, 0::2] = np.sin(pos * rate)
    table[:, 1::2] = np.cos(pos * rate[: dim // 2])
    return table


class DurationPredictor(Module):
    """Phoneme embedding + projected conditioning -> attention -> softplus per token.

    The conditioning projection has no bias, so a zero conditioning vector
    contributes exactly nothing to the forward pass or its gradients.
    Outputs are durations in ``log(1 + frames)`` units.
    """

    def __init__(self, vocab_size: int, cfg: DurationConfig, seed: int = 0, dtype=np.float64):
        rng = np.random.default_rng(seed)
        d = cfg.d_model
        self.cond_dim = cfg.embedding_dim
        self.token = trunc_normal((vocab_size, d), rng, std=1.0, dtype=dtype)
        self.w_cond = kaiming_uniform((d, cfg.embedding_dim), cfg.embedding_dim, rng, dtype)
        self.layers = [TransformerLayer(d, cfg.ff_dim, cfg.heads, rng, dtype) for _ in range(cfg.layers)]
        self.ln_g, self.ln_b = ones(d, dtype), zeros(d, dtype)
        self.w_head = kaiming_uniform((1, d), d, rng, dtype)
        # softplus(b) = log(1 + 8): starts near a typical phoneme length
        self.b_head = Parameter(np.full(1, np.log(np.expm1(np.log1p(8.0))), dtype=dtype))
        self.dtype = np.dtype(dtype)

    def forward(self, ids, mask, cond) -> Tensor:
        """``ids``/``mask`` are ``[N, T]``, ``cond`` is ``[N, cond_dim]``; returns ``[N, T]``."""
        ids = np.asarray(ids)
        mask = np.asarray(mask, dtype=bool)
        cond = np.asarray(cond, dtype=self.dtype)
        if cond.shape != (ids.shape[0], self.cond_dim):
            raise ShapeError(f"conditioning must be [{ids.shape[0]}, {self.cond_dim}], got {cond.shape}")
        n, t = ids.shape
        h = self.token[ids] + _sinusoid(t, self.token.shape[1]).astype(self.dtype)
        c = linear(Tensor(cond), self.w_cond).reshape(n, 1, -1)
        h = h + c
        for layer in self.layers:
            h = layer(h, key_mask=mask)
        h = layer_norm(h, self.ln_g, self.ln_b)
        out = linear(h, self.w_head, self.b_head).reshape(n, t)
        return softplus(out)


def _pad_batch(seqs):
    t = max(len(s) for s in seqs)
    ids = np.zeros((len(seqs), t), dtype=np.int64)
    mask = np.zeros((len(seqs), t), dtype=bool)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
        mask[i, : len(s)] = True
    return ids, mask


def predict_durations(model: DurationPredictor, p: PhonemeSequence, mode: ConditioningMode, cond=None) -> np.ndarray:
    """Per-phoneme real-valued frame counts (eval mode, no gradient)."""
    if mode is ConditioningMode.NONE:
        cond = np.zeros(model.cond_dim)
    elif cond is None:
        raise ShapeError(f"mode {mode.name} needs a conditioning vector")
    cond = np.asarray(cond, dtype=np.float64)
    if cond.shape != (model.cond_dim,):
        raise ShapeError(f"conditioning has dim {cond.shape}, expected ({model.cond_dim},)")
    ids, mask = _pad_batch([p.symbols])
    with no_grad():
        out = model(ids, mask, cond[None])
    return np.expm1(out.data[0].astype(np.float64))


@dataclass
class DurationItem:
    sequence: PhonemeSequence
    frames: np.ndarray


@dataclass
class DurationDataset:
    """Aligned utterances with targets and the embedding of every utterance."""

    items: list
    embeddings: dict
    vocab_size: int

    @classmethod
    def from_alignments(cls, utterances, embeddings: dict, cfg: DurationConfig, vocab: Vocabulary | None = None):
        vocab = vocab or Vocabulary()
        items = [DurationItem(u.sequence(vocab), u.frames(cfg.sample_rate, cfg.hop_length)) for u in utterances]
        missing = [it.sequence.utterance_id for it in items if it.sequence.utterance_id not in embeddings]
        if missing:
            raise AlignmentError(f"no embedding for utterances {missing[:5]}")
        return cls(items, dict(embeddings), len(vocab))

    def speaker_vectors(self) -> dict:
        """Per utterance: mean embedding of the speaker's other utterances (its own if it is the only one)."""
        by_spk: dict = {}
        for it in self.items:
            by_spk.setdefault(it.sequence.speaker_id, []).append(it.sequence.utterance_id)
        out = {}
        for utts in by_spk.values():
            stack = np.stack([self.embeddings[u] for u in utts])
            total = stack.sum(axis=0)
            for i, u in enumerate(utts):
                out[u] = stack[i] if len(utts) == 1 else (total - stack[i]) / (len(utts) - 1)
        return out

    def conditioning(self, mode: ConditioningMode, dim: int, seed: int) -> np.ndarray:
        """``[len(items), dim]`` conditioning matrix for one mode."""
        ids = [it.sequence.utterance_id for it in self.items]
        if mode is ConditioningMode.NONE:
            return np.zeros((len(ids), dim))
        if mode is ConditioningMode.NOISE:
            # matched to the embeddings' per-vector scale so only the content differs
            scale = np.mean([np.linalg.norm(self.embeddings[u]) for u in ids]) / math.sqrt(dim)
            return np.random.default_rng([seed, 7]).normal(0.0, scale, size=(len(ids), dim))
        source = self.embeddings if mode is ConditioningMode.UTTERANCE_EMB else self.speaker_vectors()
        out = np.stack([np.asarray(source[u], dtype=np.float64) for u in ids])
        if out.shape[1] != dim:
            raise ShapeError(f"embeddings have dim {out.shape[1]}, predictor expects {dim}")
        return out

    def split(self, test_fraction: float, seed: int = 0):
        """Utterance-level split with a fixed permutation."""
        order = np.random.default_rng(seed).permutation(len(self.items))
        n_test = max(1, int(round(test_fraction * len(self.items))))
        return np.sort(order[n_test:]), np.sort(order[:n_test])


def train_predictor(data: DurationDataset, cond: np.ndarray, train_idx, cfg: DurationConfig, seed: int, dtype=np.float64):
    """MAE on ``log(1 + frames)``; returns the model and its per-epoch mean loss."""
    model = DurationPredictor(data.vocab_size, cfg, seed=seed, dtype=dtype)
    opt = Adam(model.parameters(), lr=cfg.lr)
    rng = np.random.default_rng([seed, 1])
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(train_idx)
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            ids, mask = _pad_batch([data.items[i].sequence.symbols for i in idx])
            target = np.zeros(ids.shape)
            for row, i in enumerate(idx):
                target[row, : len(data.items[i].frames)] = np.log1p(data.items[i].frames)
            pred = model(ids, mask, cond[idx])
            weight = mask / mask.sum()
            loss = ((pred - target.astype(model.dtype)).abs() * weight.astype(model.dtype)).sum()
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(float(loss.data))
        history.append(float(np.mean(losses)))
    model.eval()
    return model, history


def evaluate_predictor(model, data: DurationDataset, cond: np.ndarray, idx) -> dict:
    truth, pred = [], []
    for i in idx:
        item = data.items[i]
        ids, mask = _pad_batch([item.sequence.symbols])
        with no_grad():
            out = model(ids, mask, cond[i : i + 1]).data[0]
        pred.append(np.expm1(out.astype(np.float64)))
        truth.append(item.frames.astype(np.float64))
    x, x_hat = np.concatenate(truth), np.concatenate(pred)
    return {"MAE": mae(x, x_hat), "RMSE": rmse(x, x_hat), "WDER": wder(x, x_hat), "CCC": ccc(x, x_hat)}


def run_conditioning_experiment(data: DurationDataset, cfg: DurationConfig, seeds=(0,), modes=tuple(ConditioningMode), dtype=np.float64) -> dict:
    """Train and score one predictor per (mode, seed).

    Within a seed every mode shares the split, initialisation and batch
    order; only the conditioning matrix differs. The table holds the
    median over seeds.
    """
    runs = {m.value: [] for m in modes}
    for seed in seeds:
        train_idx, test_idx = data.split(cfg.test_fraction, seed)
        for mode in modes:
            cond = data.conditioning(mode, cfg.embedding_dim, seed)
            model, _ = train_predictor(data, cond, train_idx, cfg, seed, dtype)
            runs[mode.value].append(evaluate_predictor(model, data, cond, test_idx))
    table = {
        mode: {k: float(np.median([r[k] for r in rs])) for k in ("MAE", "RMSE", "WDER", "CCC")}
        for mode, rs in runs.items()
    }
    return {
        "table": table,
        "runs": runs,
        "seeds": [int(s) for s in seeds],
        "reference_full_scale": {"utterance_emb": REFERENCE_UTTERANCE_ROW},
    }


def make_tempo_dataset(
    n_speakers: int = 16,
    utts_per_speaker: int = 20,
    dim: int = 2048,
    seed: int = 0,
    sample_rate: int = 24000,
    hop: int = 256,
    tempo_spread: float = 0.35,
    utterance_spread: float = 0.08,
    duration_noise: float = 0.08,
):
    """Synthetic alignments whose timing depends on speaker and utterance tempo.

    Each phoneme has a base duration; each speaker a log-tempo offset; each
    utterance a small extra offset. The utterance embedding is a speaker
    code plus the utterance's log-tempo along a fixed direction plus noise,
    so tempo is recoverable from it.

    Returns ``(utterances, embeddings)``.
    """
    rng = np.random.default_rng(seed)
    vocab = DEFAULT_VOCAB
    base = rng.uniform(0.04, 0.16, size=len(vocab))
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    utterances, embeddings = [], {}
    for s in range(n_speakers):
        spk = f"spk{s:02d}"
        log_tempo = rng.normal(0.0, tempo_spread)
        code = rng.normal(0.0, 1.0 / math.sqrt(dim), size=dim)
        for u in range(utts_per_speaker):
            utt = f"{spk}_u{u:03d}"
            log_u = log_tempo + rng.normal(0.0, utterance_spread)
            n_ph = int(rng.integers(8, 21))
            ids = rng.integers(len(SPECIAL), len(vocab), size=n_ph)
            durs = base[ids] * np.exp(log_u + rng.normal(0.0, duration_noise, size=n_ph))
            edges = np.concatenate([[0.0], np.cumsum(durs)])
            # times on a 1 ms grid, as forced aligners emit them
            edges = np.round(edges, 3)
            utterances.append(
                AlignedUtterance(utt, spk, tuple(vocab[i] for i in ids), tuple(edges[:-1].tolist()), tuple(edges[1:].tolist()))
            )
            vec = code + 3.0 * log_u * direction + rng.normal(0.0, 0.3 / math.sqrt(dim), size=dim)
            embeddings[utt] = vec
    return utterances, embeddings
