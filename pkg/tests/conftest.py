"""
Shared fixtures: seeded generators and tiny model configurations.
"""

import numpy as np
import pytest

from bendr.app.config import ModelConfig, RunConfig
from bendr.app.core.ingest import Component, SyntheticSpec


@pytest.fixture
def rng():
    """ Seeded generator, fresh for every test. """
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    """ A model small enough for gradient tests and few-step training runs. """
    return ModelConfig(encoder_dim=32, groupnorm_groups=8, model_dim=32, heads=4, layers=2, ff_dim=64,
                       position_groups=16)


@pytest.fixture
def tiny_run(tiny_config, tmp_path):
    """ Run configuration around the tiny model, writing into a temporary directory. """
    config = RunConfig(seed=3, model=tiny_config)
    config.paths.out = str(tmp_path / "out")
    config.paths.training_log = str(tmp_path / "out" / "training.log")
    config.pretrain.batch_size = 2
    config.pretrain.total_steps = 4
    config.pretrain.checkpoint_every = 2
    return config


@pytest.fixture
def two_class_spec():
    """ Short two-class synthetic recording: 10 Hz against 22 Hz bursts. """
    return SyntheticSpec(
        sampling_rate=256, duration_s=60, noise_level=1.0, trial_length_s=2, interval_s=1,
        classes={"left": [Component(frequency=10.0, amplitude=40.0)],
                 "right": [Component(frequency=22.0, amplitude=40.0)]},
    )
