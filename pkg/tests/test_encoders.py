import numpy as np
import pytest

from vemb.audio import Waveform
from vemb.config import PipelineConfig, desk_config
from vemb.encoders import FUSION_ORDER, SpecBlockEncoder, SpeakerEncoder, ViT, build_model, embed, manifest, spec_block_channels
from vemb.errors import ShapeError
from vemb.nn import Tensor


def test_full_size_channel_plan():
    cfg = PipelineConfig()
    plan = spec_block_channels(cfg.encoder.spec_channels)
    assert plan[0] == (1, 32)
    assert plan[4] == (32, 64)
    assert plan[6] == (64, 128)
    assert plan[-1] == (128, 128)
    assert len(plan) == 10


def test_spec_block_spatial_trace():
    enc = SpecBlockEncoder((2, 2, 2), 0.4, np.random.default_rng(0))
    assert enc.trace(512, 252) == [(256, 126), (128, 63), (64, 32)]
    out = enc(np.zeros((3, 20, 9)), np.zeros((3, 20, 9)), np.random.default_rng(1))
    assert out.shape == (3, 4)


def test_full_size_patch_grids():
    cfg = PipelineConfig()
    model = build_model(cfg, dtype=np.float32)
    assert model.mel_encoder.grid == (8, 11)
    assert model.pitch_encoder.grid == (4, 89)
    assert model.pitch_encoder.num_patches == 356
    assert model.concat_dim == 256 + 512 + 512
    assert model.w_fuse.shape == (2048, 1280)


def test_vit_patchify_order():
    cfg = desk_config().encoder
    vit = ViT((4, 6), 2, cfg, np.random.default_rng(0))
    x = Tensor(np.arange(24.0).reshape(1, 4, 6))
    p = vit.patchify(x).data
    assert p.shape == (1, 6, 4)
    np.testing.assert_array_equal(p[0, 0], [0, 1, 6, 7])
    np.testing.assert_array_equal(p[0, 5], [16, 17, 22, 23])


def test_vit_pads_partial_patches():
    cfg = desk_config().encoder
    vit = ViT((5, 7), 3, cfg, np.random.default_rng(0))
    assert vit.grid == (2, 3)
    assert vit(np.ones((2, 5, 7))).shape == (2, cfg.vit_out)
    with pytest.raises(ShapeError):
        vit(np.ones((2, 7, 5)))


def _small():
    cfg = PipelineConfig().replace(
        encoder=dict(spec_channels=(2, 3), dropout=0.4, embed_dim=8, hidden_dim=8, heads=2, layers=1, vit_out=4, mel_patch=3, pitch_patch=2, embedding_dim=6)
    )
    shapes = {"cqt": (8, 6), "mel": (6, 6), "pitch": (4, 6)}
    return cfg, SpeakerEncoder(cfg, seed=0, shapes=shapes)


def test_fusion_output_is_elu_range():
    _, model = _small()
    rng = np.random.default_rng(0)
    out = model(rng.normal(size=(3, 8, 6)), rng.normal(size=(3, 8, 6)), rng.normal(size=(3, 6, 6)), rng.normal(size=(3, 4, 6)), rng)
    assert out.shape == (3, 6)
    assert np.all(out.data > -1.0)


def test_eval_mode_is_deterministic_and_train_mode_is_not():
    _, model = _small()
    rng = np.random.default_rng(0)
    inputs = [rng.normal(size=(2, 8, 6)), rng.normal(size=(2, 8, 6)), rng.normal(size=(2, 6, 6)), rng.normal(size=(2, 4, 6))]
    model.eval()
    a = model(*inputs).data
    b = model(*inputs).data
    np.testing.assert_array_equal(a, b)
    model.train()
    c = model(*inputs, rng=np.random.default_rng(1)).data
    assert not np.allclose(a, c)


def test_same_seed_same_weights():
    cfg = desk_config()
    a, b = build_model(cfg, seed=4), build_model(cfg, seed=4)
    for (na, pa), (nb, pb) in zip(a.named_parameters(), b.named_parameters()):
        assert na == nb
        np.testing.assert_array_equal(pa.data, pb.data)


def test_manifest_records_config_and_order():
    cfg = desk_config()
    model = build_model(cfg)
    m = manifest(model, cfg, step=3)
    assert m["config_hash"] == cfg.hash()
    assert m["fusion_order"] == list(FUSION_ORDER) == ["cqt", "mel", "pitch"]
    assert m["parameter_count"] == model.parameter_count()
    assert m["step"] == 3


def test_embed_checks_input_and_is_repeatable():
    cfg = desk_config()
    model = build_model(cfg)
    t = np.arange(96000) / 24000
    w = Waveform(0.3 * np.sin(2 * np.pi * 150 * t) + 0.1 * np.sin(2 * np.pi * 300 * t), 24000)
    e1, e2 = embed(w, model, cfg), embed(w, model, cfg)
    assert e1.vector.shape == (cfg.encoder.embedding_dim,)
    np.testing.assert_array_equal(e1.vector, e2.vector)
    assert model.training
    with pytest.raises(ShapeError):
        embed(Waveform(w.samples[:1000], 24000), model, cfg)
