import pytest
import os
import logging
import numpy as np
from dotenv import load_dotenv
from pathlib import Path

load_dotenv()

logger = logging.getLogger(__name__)


@pytest.fixture(scope="session")
def tiny_arch():
    from rss2onbody.config import ArchConfig

    return ArchConfig(
        name="tiny",
        conv_channels=(2, 2, 4, 4, 4, 4, 4, 4),
        conv_strides=(1, 2, 1, 2, 1, 2, 1, 2),
        representation_dim=8,
        predictor_hidden=(8, 8),
        discriminator_hidden=(8, 8),
    )


@pytest.fixture(scope="session")
def short_synth_config():
    from rss2onbody.config import SynthConfig, default_synth_config

    cfg = default_synth_config()
    return SynthConfig.model_validate({**cfg.model_dump(), "duration_s": 10.0})


@pytest.fixture(scope="session")
def toy_dataset():
    """Separable on / off profiles over 2 motions, motion shifts a different feature block"""
    from .utils import toy_dataset

    return toy_dataset(200, seed=3)


@pytest.fixture(scope="session")
def synth_features(short_synth_config):
    """Real profiles: 2 traces per (link, controlled motion) cell plus uncontrolled ones"""
    from rss2onbody.ban_synth import balanced_counts, synth_dataset
    from rss2onbody.feature_store import FeatureDataset
    from rss2onbody.features import profile_traces
    from rss2onbody.labels import DeviceLabel, MotionLabel

    counts = balanced_counts(2)
    counts.update({(link, MotionLabel.Uncontrolled): 2 for link in DeviceLabel})
    traces = synth_dataset(short_synth_config, counts, seed=11)
    return FeatureDataset.from_profiles(profile_traces(traces))


@pytest.fixture
def out_dir(tmp_path: Path):
    p = tmp_path / "out"
    p.mkdir()
    return p


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def no_env_defaults(monkeypatch):
    if os.getenv("RSS2ONBODY_KEEP_ENV", "0") == "1":  # can be handy during development
        return
    monkeypatch.delenv("RSS2ONBODY_SEED", raising=False)
    monkeypatch.delenv("RSS2ONBODY_LOG_LEVEL", raising=False)
