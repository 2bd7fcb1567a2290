import json

import numpy as np
import pytest
from conftest import tiny_config

from vemb import vectors
from vemb.cli import main
from vemb.duration import make_tempo_dataset, save_alignment
from vemb.ensemble import PRESETS, evaluate_fusion, write_scores
from vemb.metrics import ScoreSet, Trial, TrialList, cosine_similarity, verification_report, write_trials


@pytest.fixture(scope="module")
def trained(tmp_path_factory, corpus_dir):
    out = tmp_path_factory.mktemp("run")
    (out / "tiny.ini").write_text(tiny_config(steps=3).dumps())
    code = main(["--deterministic", "train", "--config", str(out / "tiny.ini"), "--data", str(corpus_dir), "--out", str(out / "final.ckpt"), "--log", str(out / "log.txt")])
    assert code == 0
    return out / "final.ckpt"


def test_train_writes_checkpoint_and_log(trained):
    assert trained.exists()
    log = (trained.parent / "log.txt").read_text().splitlines()
    assert [line.split()[1] for line in log if line.startswith("step")] == ["1", "2", "3"]


def test_embed_and_verify(trained, corpus_dir, tmp_path, capsys):
    wavs = sorted(str(p) for p in corpus_dir.glob("*/*.wav"))[:3]
    assert main(["embed", "--checkpoint", str(trained), "--out", str(tmp_path / "a.vec"), *wavs]) == 0
    assert main(["embed", "--checkpoint", str(trained), "--out", str(tmp_path / "b.vec"), *wavs]) == 0
    ids, m = vectors.load(tmp_path / "a.vec")
    assert ids == wavs and m.shape == (3, 16)
    assert (tmp_path / "a.vec").read_bytes() == (tmp_path / "b.vec").read_bytes()

    capsys.readouterr()
    assert main(["verify", "--checkpoint", str(trained), wavs[0], wavs[0]]) == 0
    assert abs(float(capsys.readouterr().out) - 1.0) < 1e-6
    assert main(["verify", "--checkpoint", str(trained), wavs[0], wavs[1]]) == 0
    score = float(capsys.readouterr().out)
    assert abs(score - cosine_similarity(m[0], m[1])) < 1e-6


def test_eval_from_audio(trained, corpus_dir, tmp_path):
    wavs = sorted(p.relative_to(corpus_dir).as_posix() for p in corpus_dir.glob("*/*.wav"))
    trials = TrialList([Trial(a, b, a.split("/")[0] == b.split("/")[0]) for i, a in enumerate(wavs) for b in wavs[i + 1 :]])
    write_trials(tmp_path / "t.tsv", trials)
    args = ["eval", "--trials", str(tmp_path / "t.tsv"), "--checkpoint", str(trained), "--audio-root", str(corpus_dir), "--out", str(tmp_path / "r.json")]
    assert main(args) == 0
    r = json.loads((tmp_path / "r.json").read_text())
    assert len(r["config_hash"]) == 64 and len(r["manifest_hash"]) == 64
    assert set(r["tpr_at_fpr"]) == {"0.5", "0.2", "0.1", "0.05", "0.01"}


@pytest.fixture
def separable(tmp_path):
    rng = np.random.default_rng(0)
    centres = rng.normal(size=(4, 8)) * 10
    records, speakers = [], []
    for i in range(20):
        records.append((f"u{i}", centres[i % 4] + rng.normal(size=8) * 0.01))
        speakers.append(i % 4)
    vectors.save(tmp_path / "e.vec", records)
    trials = TrialList([Trial(f"u{i}", f"u{j}", speakers[i] == speakers[j]) for i in range(20) for j in range(i + 1, 20)])
    write_trials(tmp_path / "t.tsv", trials)
    return tmp_path, records, trials


def test_eval_with_embeddings_matches_library(separable):
    d, records, trials = separable
    assert main(["eval", "--trials", str(d / "t.tsv"), "--embeddings", str(d / "e.vec"), "--out", str(d / "r.json")]) == 0
    r = json.loads((d / "r.json").read_text())
    assert r["tpr_at_fpr"] == {k: 1.0 for k in ("0.5", "0.2", "0.1", "0.05", "0.01")}
    assert r["eer"] == 0.0
    assert r["reference_full_scale"]["tpr_at_fpr"]["0.01"] == 0.5920
    store = {k: np.asarray(v, np.float32) for k, v in records}
    pos = [cosine_similarity(store[t.id_a], store[t.id_b]) for t in trials if t.is_target]
    neg = [cosine_similarity(store[t.id_a], store[t.id_b]) for t in trials if not t.is_target]
    assert r["tpr_at_fpr"] == verification_report(ScoreSet(pos, neg))["tpr_at_fpr"]


def test_eval_custom_levels(separable):
    d, _, _ = separable
    assert main(["eval", "--trials", str(d / "t.tsv"), "--embeddings", str(d / "e.vec"), "--fpr", "0.3", "--out", str(d / "r.json")]) == 0
    assert list(json.loads((d / "r.json").read_text())["tpr_at_fpr"]) == ["0.3"]


def test_duration_command(tmp_path):
    utts, emb = make_tempo_dataset(n_speakers=3, utts_per_speaker=5, dim=12, seed=0)
    save_alignment(tmp_path / "a.tsv", utts)
    vectors.save(tmp_path / "e.vec", emb.items())
    (tmp_path / "c.ini").write_text("[duration]\nd_model = 16\nheads = 2\nlayers = 1\nff_dim = 16\nepochs = 1\n")
    args = ["duration", "--config", str(tmp_path / "c.ini"), "--alignments", str(tmp_path / "a.tsv"), "--embeddings", str(tmp_path / "e.vec")]
    assert main(args + ["--out", str(tmp_path / "r1.json")]) == 0
    assert main(args + ["--out", str(tmp_path / "r2.json")]) == 0
    r1 = json.loads((tmp_path / "r1.json").read_text())
    assert set(r1["table"]) == {"none", "noise", "speaker_emb", "utterance_emb"}
    for row in r1["table"].values():
        assert set(row) == {"MAE", "RMSE", "WDER", "CCC"}
    assert r1["duration_config"]["embedding_dim"] == 12
    assert r1 == json.loads((tmp_path / "r2.json").read_text())
    assert main(args + ["--mode", "noise", "--out", str(tmp_path / "r3.json")]) == 0
    assert list(json.loads((tmp_path / "r3.json").read_text())["table"]) == ["noise"]


@pytest.fixture
def score_files(tmp_path):
    rng = np.random.default_rng(5)
    labels = rng.random(200) < 0.4
    x1 = 0.97 + 0.01 * labels + rng.normal(0, 0.01, 200)
    x2 = 2.0 * labels + rng.normal(size=200)
    write_scores(tmp_path / "s1.tsv", x1)
    write_scores(tmp_path / "s2.tsv", x2)
    write_trials(tmp_path / "t.tsv", TrialList([Trial(f"a{i}", f"b{i}", bool(t)) for i, t in enumerate(labels)]))
    return tmp_path, labels, x1, x2


@pytest.mark.parametrize("preset", ["y1", "y2", "y3"])
def test_fuse_presets(score_files, preset):
    d, labels, x1, x2 = score_files
    args = ["fuse", "--scores1", str(d / "s1.tsv"), "--scores2", str(d / "s2.tsv"), "--trials", str(d / "t.tsv"), "--preset", preset, "--out", str(d / "f.json")]
    assert main(args) == 0
    r = json.loads((d / "f.json").read_text())
    expected = evaluate_fusion(labels, x1, x2, {preset: PRESETS[preset]})
    assert abs(r["eer"][preset] - expected[preset]) < 1e-12
    assert r["reference_full_scale"]["eer_percent"]["y3"] == 20.669


def test_fuse_all_and_fused_output(score_files):
    d, labels, x1, x2 = score_files
    args = ["fuse", "--scores1", str(d / "s1.tsv"), "--scores2", str(d / "s2.tsv"), "--trials", str(d / "t.tsv"), "--out", str(d / "f.json")]
    assert main(args + ["--preset", "y3", "--fused-out", str(d / "y.tsv")]) == 0
    assert main(args) == 0
    assert set(json.loads((d / "f.json").read_text())["eer"]) == {"x1", "x2", "y1", "y2", "y3"}
    from vemb.ensemble import fuse_scores, read_scores

    np.testing.assert_array_equal(read_scores(d / "y.tsv"), fuse_scores(x1, x2, PRESETS["y3"]))


def test_fuse_length_mismatch_exits_3(score_files):
    d, _, x1, _ = score_files
    write_scores(d / "short.tsv", x1[:-1])
    args = ["fuse", "--scores1", str(d / "short.tsv"), "--scores2", str(d / "s2.tsv"), "--trials", str(d / "t.tsv")]
    assert main(args) == 3


def test_exit_codes(tmp_path, capsys):
    (tmp_path / "bad.ini").write_text("[nosuch]\n")
    assert main(["train", "--config", str(tmp_path / "bad.ini"), "--data", str(tmp_path), "--out", str(tmp_path / "m.ckpt")]) == 2
    assert main(["train", "--data", str(tmp_path / "missing"), "--out", str(tmp_path / "m.ckpt")]) == 3
    assert main(["embed", "--checkpoint", str(tmp_path / "none.ckpt"), "--out", str(tmp_path / "e.vec"), "x.wav"]) == 3
    (tmp_path / "t.tsv").write_text("a\tb\t1\n")
    assert main(["eval", "--trials", str(tmp_path / "t.tsv")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["fuse", "--preset", "y9"])
    assert exc.value.code == 2


def test_config_command(capsys):
    assert main(["config", "--desk"]) == 0
    text = capsys.readouterr().out
    from vemb.config import desk_config, loads

    assert loads(text) == desk_config()


def test_make_synthetic(tmp_path):
    assert main(["make-synthetic", "--out", str(tmp_path), "--speakers", "2", "--clips", "2", "--seconds", "1"]) == 0
    assert len(list(tmp_path.glob("*/*.wav"))) == 4
