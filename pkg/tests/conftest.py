import numpy as np
import pytest
from hypothesis import settings

from vemb.config import PipelineConfig
from vemb.synth import make_speaker_corpus

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tiny_config(**train) -> PipelineConfig:
    """Full-geometry frontends with a very small network, for fast end-to-end runs."""
    base = dict(batch_size=2, steps=10, lr=1e-3, redraw_segments=False, val_fraction=0.0)
    base.update(train)
    return PipelineConfig().replace(
        encoder=dict(
            spec_channels=(2, 2, 2, 2),
            embed_dim=8,
            hidden_dim=16,
            heads=2,
            layers=1,
            vit_out=8,
            embedding_dim=16,
        ),
        train=base,
    )


@pytest.fixture(scope="session")
def small_corpus():
    """Two speakers, three 4.5 s clips each."""
    return make_speaker_corpus(n_speakers=2, clips_per_speaker=3, seed=3)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory, small_corpus):
    from vemb.audio import write_wav

    root = tmp_path_factory.mktemp("corpus")
    for spk, clip, w in small_corpus:
        (root / spk).mkdir(exist_ok=True)
        write_wav(root / spk / f"{clip}.wav", w)
    return root
