import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import eer_pairs

from vemb.ensemble import PRESETS, REFERENCE_EER, FusionConfig, evaluate_fusion, fuse_scores, read_scores, write_scores
from vemb.errors import DataError


def test_presets_are_fixed():
    assert [(p.w1, p.w2) for p in PRESETS.values()] == [(0.5, 0.5), (0.35, 0.65), (0.25, 0.75)]
    for p in PRESETS.values():
        assert p.w1 + p.w2 == pytest.approx(1.0, abs=1e-15)
        assert (p.shift, p.scale) == (0.99, 100.0)
    assert REFERENCE_EER == {"x1": 44.809, "y1": 23.625, "y2": 20.762, "y3": 20.669}


def test_fusion_hand_values():
    # y3: 0.25 * (x1 - 0.99) * 100 + 0.75 * x2
    y = fuse_scores([1.0, 0.99, 0.95], [0.0, 2.0, -1.0], PRESETS["y3"])
    np.testing.assert_allclose(y, [0.25, 1.5, -1.75], atol=1e-12)
    y = fuse_scores([0.99], [4.0], PRESETS["y1"])
    assert y[0] == 2.0


def test_fusion_matches_loop_oracle():
    rng = np.random.default_rng(0)
    x1, x2 = rng.uniform(0.9, 1.0, 100), rng.normal(size=100)
    for cfg in PRESETS.values():
        ref = [cfg.w1 * (a - 0.99) * 100 + cfg.w2 * b for a, b in zip(x1, x2)]
        assert np.max(np.abs(fuse_scores(x1, x2, cfg) - ref)) < 1e-12


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_fusion_is_affine(a1, a2, b1, b2):
    cfg = PRESETS["y2"]
    lam = 0.3
    mix = fuse_scores([lam * a1 + (1 - lam) * b1], [lam * a2 + (1 - lam) * b2], cfg)
    parts = lam * fuse_scores([a1], [a2], cfg) + (1 - lam) * fuse_scores([b1], [b2], cfg)
    np.testing.assert_allclose(mix, parts, atol=1e-9)


def test_perfect_second_system_helps():
    rng = np.random.default_rng(1)
    labels = np.repeat([True, False], 200)
    x2 = np.where(labels, 10.0, -10.0) + rng.uniform(-1, 1, 400)
    x1 = 0.97 + 0.01 * labels + rng.normal(0, 0.02, 400)
    r = evaluate_fusion(labels, x1, x2)
    assert r["x2"] == 0.0
    assert r["y3"] <= r["x1"]
    assert abs(r["x1"] - eer_pairs(x1[labels], x1[~labels])) < 1e-12


def test_identical_orderings_give_identical_eer():
    rng = np.random.default_rng(2)
    labels = rng.random(300) < 0.3
    x = rng.normal(size=300) + labels
    x1 = 0.99 + x / 100
    r = evaluate_fusion(labels, x1, x)
    assert abs(r["y1"] - r["x1"]) < 1e-12 and abs(r["y3"] - r["x2"]) < 1e-12


def test_custom_presets_and_errors():
    r = evaluate_fusion([True, False], [1.0, 0.0], [0.0, 1.0], {"only1": FusionConfig(1.0, 0.0)})
    assert set(r) == {"x1", "x2", "only1"} and r["only1"] == 0.0
    with pytest.raises(DataError):
        fuse_scores([1.0, 2.0], [1.0], PRESETS["y1"])
    with pytest.raises(DataError):
        evaluate_fusion([True], [1.0, 2.0], [1.0, 2.0])


def test_score_file_round_trip(tmp_path):
    scores = np.random.default_rng(3).normal(size=20)
    write_scores(tmp_path / "s.tsv", scores)
    assert read_scores(tmp_path / "s.tsv").tobytes() == scores.tobytes()


@pytest.mark.parametrize("text", ["0\t1.0\n2\t0.5\n", "0\t1.0\n0\t0.5\n", "0 1.0\n", "a\t1\n"])
def test_bad_score_files(tmp_path, text):
    (tmp_path / "s.tsv").write_text(text)
    with pytest.raises(DataError):
        read_scores(tmp_path / "s.tsv")
