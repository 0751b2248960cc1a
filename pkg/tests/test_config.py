"""
Unit tests for the run configuration and process settings.
"""

from pathlib import Path

import pytest

from bendr.app.config import ModelConfig, RunConfig, Settings
from bendr.app.core.exceptions import ConfigError
from bendr.app.core.ingest import SyntheticSpec


CONFIGS = Path(__file__).resolve().parents[1] / "configs"


class TestRunConfig:

    def test_defaults_are_published_values(self):
        config = RunConfig()
        assert config.model == ModelConfig()
        assert (config.model.encoder_dim, config.model.model_dim, config.model.layers) == (512, 1536, 8)
        assert config.model.downsampling == 96
        assert (config.pretrain.p_mask, config.pretrain.span, config.pretrain.num_distractors) == (0.065, 10, 20)
        assert config.pretrain.temperature == 0.1
        assert (config.finetune.time_mask_p, config.finetune.channel_drop_p) == (0.01, 0.005)

    def test_desk_preset(self):
        assert RunConfig(model_preset="desk").model == ModelConfig.desk()

    def test_explicit_model_wins_over_preset(self, tiny_config):
        assert RunConfig(model_preset="desk", model=tiny_config).model == tiny_config

    def test_toml_round_trip(self, tiny_run):
        restored = RunConfig.from_toml(tiny_run.to_toml())
        assert restored == tiny_run

    def test_sections_from_toml(self):
        config = RunConfig.from_toml(
            'command = "finetune"\nseed = 4\n\n[finetune]\nvariant = 6\ndataset = "ERN"\n'
            'held_out_subjects = ["s17", "s18"]\n')
        assert config.command == "finetune"
        assert config.finetune.variant == 6
        assert config.finetune.held_out_subjects == ["s17", "s18"]

    @pytest.mark.parametrize("text", [
        "seed = [",
        'command = "train"\n',
        "[finetune]\nvariant = 7\n",
        "[pretrain]\np_mask = 1.5\n",
        "[model]\nencoder_dim = 100\ngroupnorm_groups = 32\n",
        "[model]\nposition_kernel = 24\n",
        "[paths]\nunknown = 1\n",
    ])
    def test_invalid(self, text):
        with pytest.raises(ConfigError):
            RunConfig.from_toml(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.load(tmp_path / "absent.toml")

    def test_echo_is_json_compatible(self, tiny_run):
        echo = tiny_run.echo()
        assert echo["seed"] == 3
        assert echo["model"]["encoder_widths"] == [3, 2, 2, 2, 2, 2]


class TestBundledConfigs:

    def test_run_configs_load(self):
        desk = RunConfig.load(CONFIGS / "desk.toml")
        assert desk.model == ModelConfig.desk()
        assert desk.pretrain.checkpoint_every == 500
        mmi = RunConfig.load(CONFIGS / "mmi.toml")
        assert (mmi.command, mmi.preprocess.dataset, mmi.finetune.folds) == ("finetune", "MMI", 2)

    def test_synthetic_sessions_load(self):
        specs = sorted((CONFIGS / "synthetic").rglob("*.toml"))
        assert len(specs) == 2
        for path in specs:
            spec = SyntheticSpec.load(path)
            assert sorted(spec.classes) == ["left", "right"]


class TestSettings:

    def test_environment(self, monkeypatch):
        monkeypatch.setenv("LOG_LEVEL", "DEBUG")
        monkeypatch.setenv("BENDR_SESSION_SOURCE", "synthetic")
        monkeypatch.setenv("BENDR_WORKERS", "4")
        settings = Settings(_env_file=None)
        assert (settings.log_level, settings.session_source, settings.workers) == ("debug", "synthetic", 4)

    def test_invalid_log_level(self, monkeypatch):
        monkeypatch.setenv("LOG_LEVEL", "chatty")
        with pytest.raises(ValueError):
            Settings(_env_file=None)
