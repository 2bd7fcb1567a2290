"""Fixed-weight score fusion of two verification systems."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .metrics import ScoreSet, eer


@dataclass(frozen=True)
class FusionConfig:
    """``y = w1 * (x1 - shift) * scale + w2 * x2``.

    ``shift`` and ``scale`` move cosine scores, which cluster just below
    1.0, into the second system's range.
    """

    w1: float
    w2: float
    shift: float = 0.99
    scale: float = 100.0


PRESETS = {
    "y1": FusionConfig(0.5, 0.5),
    "y2": FusionConfig(0.35, 0.65),
    "y3": FusionConfig(0.25, 0.75),
}

# EER % on the SSTC test subset for the full-scale system alone (x1) and fused
REFERENCE_EER = {"x1": 44.809, "y1": 23.625, "y2": 20.762, "y3": 20.669}


def fuse_scores(x1, x2, cfg: FusionConfig) -> np.ndarray:
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.shape != x2.shape:
        raise DataError(f"score vectors differ in length: {x1.shape} vs {x2.shape}")
    return cfg.w1 * (x1 - cfg.shift) * cfg.scale + cfg.w2 * x2


def evaluate_fusion(labels, x1, x2, presets: dict | None = None) -> dict:
    """EER of each fused system, plus both inputs alone.

    ``labels`` is the per-trial target flag (a TrialList's ``labels`` works).
    """
    presets = PRESETS if presets is None else presets
    labels = np.asarray(labels, dtype=bool)
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if not (len(labels) == len(x1) == len(x2)):
        raise DataError("labels and score vectors must be aligned by trial")
    out = {
        "x1": eer(ScoreSet.from_labels(x1, labels)),
        "x2": eer(ScoreSet.from_labels(x2, labels)),
    }
    for name, cfg in presets.items():
        out[name] = eer(ScoreSet.from_labels(fuse_scores(x1, x2, cfg), labels))
    return out


def read_scores(path) -> np.ndarray:
    """Read ``trial_index<TAB>score`` lines into a dense vector indexed by trial."""
    rows = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        try:
            idx, score = int(parts[0]), float(parts[1])
        except (ValueError, IndexError) as exc:
            raise DataError(f"{path}:{lineno}: expected 'trial_index<TAB>score'") from exc
        if idx in rows:
            raise DataError(f"{path}:{lineno}: duplicate trial index {idx}")
        rows[idx] = score
    if sorted(rows) != list(range(len(rows))):
        raise DataError(f"{path}: trial indices must cover 0..{len(rows) - 1} exactly")
    return np.array([rows[i] for i in range(len(rows))])


def write_scores(path, scores) -> None:
    lines = [f"{i}\t{float(s)!r}" for i, s in enumerate(scores)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
