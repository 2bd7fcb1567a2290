"""Verification and duration metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

FPR_LEVELS = (0.5, 0.2, 0.1, 0.05, 0.01)
# guards floor(N * count) against products like 0.29 * 100 = 28.999...
_FLOOR_SLACK = 1e-9


@dataclass
class Trial:
    id_a: str
    id_b: str
    is_target: bool


@dataclass
class TrialList:
    trials: list = field(default_factory=list)

    def __len__(self):
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    @property
    def labels(self) -> np.ndarray:
        return np.array([t.is_target for t in self.trials], dtype=bool)


@dataclass
class ScoreSet:
    positive_scores: np.ndarray
    negative_scores: np.ndarray

    def __post_init__(self):
        self.positive_scores = np.asarray(self.positive_scores, dtype=np.float64).ravel()
        self.negative_scores = np.asarray(self.negative_scores, dtype=np.float64).ravel()

    @classmethod
    def from_labels(cls, scores, labels) -> "ScoreSet":
        scores = np.asarray(scores, dtype=np.float64)
        labels = np.asarray(labels, dtype=bool)
        if scores.shape != labels.shape:
            raise DataError("scores and labels differ in length")
        return cls(scores[labels], scores[~labels])

    def _require_both(self):
        if len(self.positive_scores) == 0 or len(self.negative_scores) == 0:
            raise DataError("need at least one positive and one negative score")


def read_trials(path) -> TrialList:
    """Parse ``id_a<TAB>id_b<TAB>0|1`` lines; blank lines are skipped."""
    trials = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3 or parts[2].strip() not in ("0", "1"):
            raise DataError(f"{path}:{lineno}: expected 'id_a<TAB>id_b<TAB>0|1'")
        trials.append(Trial(parts[0], parts[1], parts[2].strip() == "1"))
    return TrialList(trials)


def write_trials(path, trials: TrialList) -> None:
    lines = [f"{t.id_a}\t{t.id_b}\t{int(t.is_target)}" for t in trials]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DataError(f"dimension mismatch {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise DataError("cosine similarity of a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def score_trials(store, trials: TrialList) -> ScoreSet:
    """Cosine score every trial; ``store`` maps ids to vectors."""
    if len(trials) == 0:
        raise DataError("empty trial list")
    pos, neg = [], []
    for t in trials:
        try:
            a, b = store[t.id_a], store[t.id_b]
        except KeyError as exc:
            raise DataError(f"no embedding for id {exc.args[0]!r}") from exc
        (pos if t.is_target else neg).append(cosine_similarity(a, b))
    return ScoreSet(pos, neg)


def tpr_at_fpr(s: ScoreSet, fpr_level: float) -> float:
    """True-positive rate at a fixed false-positive budget.

    ``k = floor(N * #negatives)``; the threshold is the k-th highest negative
    score and a positive counts when its score is strictly above it. With
    ``k == 0`` the threshold is the highest negative score.
    """
    s._require_both()
    if not 0.0 < fpr_level <= 1.0:
        raise ValueError("fpr_level must lie in (0, 1]")
    neg = np.sort(s.negative_scores)[::-1]
    k = math.floor(fpr_level * len(neg) + _FLOOR_SLACK)
    threshold = neg[max(k, 1) - 1]
    return float(np.count_nonzero(s.positive_scores > threshold) / len(s.positive_scores))


def roc_points(s: ScoreSet):
    """``(p_fa, p_miss)`` for every distinct threshold, accepting ``score >= t``."""
    scores = np.concatenate([s.positive_scores, s.negative_scores])
    labels = np.concatenate([np.ones(len(s.positive_scores)), np.zeros(len(s.negative_scores))])
    order = np.argsort(-scores, kind="mergesort")
    scores, labels = scores[order], labels[order]
    # last index of each run of tied scores
    cut = np.flatnonzero(np.diff(scores) != 0)
    ends = np.append(cut, len(scores) - 1)
    tp = np.cumsum(labels)[ends]
    fp = np.cumsum(1 - labels)[ends]
    p_fa = np.concatenate([[0.0], fp / len(s.negative_scores)])
    p_miss = np.concatenate([[1.0], 1.0 - tp / len(s.positive_scores)])
    return p_fa, p_miss


def _lower_hull(x, y):
    pts = sorted(set(zip(x.tolist(), y.tolist())))
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def eer(s: ScoreSet) -> float:
    """Equal error rate on the ROC convex hull.

    Adjacent hull vertices are joined linearly and the EER is where the hull
    crosses ``p_fa == p_miss``.
    """
    s._require_both()
    hull = _lower_hull(*roc_points(s))
    best = 1.0
    for (x1, y1), (x2, y2) in zip(hull[:-1], hull[1:]):
        denom = (x2 - x1) - (y2 - y1)
        if denom == 0:
            continue
        a = (y1 - x1) / denom
        if 0.0 <= a <= 1.0:
            best = min(best, x1 + a * (x2 - x1))
    return float(best)


def _pair(x, x_hat):
    x = np.asarray(x, dtype=np.float64).ravel()
    x_hat = np.asarray(x_hat, dtype=np.float64).ravel()
    if x.shape != x_hat.shape:
        raise DataError(f"length mismatch {len(x)} vs {len(x_hat)}")
    if len(x) == 0:
        raise DataError("empty input")
    return x, x_hat


def wder(x, x_hat) -> float:
    """Weighted duration error rate: 1 within one frame, else ``1/|error|``; averaged."""
    x, x_hat = _pair(x, x_hat)
    err = np.abs(x - x_hat)
    score = np.where(err <= 1.0, 1.0, 1.0 / np.maximum(err, 1.0))
    return float(score.mean())


def mae(x, x_hat) -> float:
    x, x_hat = _pair(x, x_hat)
    return float(np.mean(np.abs(x - x_hat)))


def rmse(x, x_hat) -> float:
    x, x_hat = _pair(x, x_hat)
    return float(np.sqrt(np.mean((x - x_hat) ** 2)))


def ccc(x, x_hat) -> float:
    """Lin's concordance correlation coefficient (population moments)."""
    x, x_hat = _pair(x, x_hat)
    if len(x) < 2:
        raise DataError("CCC needs at least two elements")
    mx, my = x.mean(), x_hat.mean()
    vx, vy = x.var(), x_hat.var()
    denom = vx + vy + (mx - my) ** 2
    if denom == 0:
        raise DataError("CCC undefined for two identical constant series")
    cov = np.mean((x - mx) * (x_hat - my))
    return float(2.0 * cov / denom)


def verification_report(s: ScoreSet, levels=FPR_LEVELS) -> dict:
    return {
        "tpr_at_fpr": {str(level): tpr_at_fpr(s, level) for level in levels},
        "eer": eer(s),
        "n_positive": int(len(s.positive_scores)),
        "n_negative": int(len(s.negative_scores)),
    }
