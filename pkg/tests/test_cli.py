"""
Tests for the `bendr` command line: argument handling, exit codes and the preprocess command.
"""

import numpy as np
import pytest

from bendr import manage
from bendr.app.config import ModelConfig, RunConfig, settings
from bendr.app.core.exceptions import NonFiniteError
from bendr.app.core.ingest import SyntheticSpec, load_chunk
from bendr.app.core.preprocess import DatasetManifest


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    """ Run from an empty directory with the synthetic session source. """
    monkeypatch.chdir(tmp_path)
    monkeypatch.setattr(settings, "session_source", "synthetic")


@pytest.fixture
def data_dir(tmp_path):
    """ Two subjects with one 300 s synthetic session each. """
    root = tmp_path / "data"
    for subject in ("s1", "s2"):
        (root / subject).mkdir(parents=True)
        spec = SyntheticSpec(duration_s=300, noise_level=5.0)
        (root / subject / "rest.toml").write_text(spec.to_toml())
    return root


def write_config(path, config: RunConfig):
    path.write_text(config.to_toml())
    return str(path)


# ===================================================================
# Argument handling
# ===================================================================

class TestResolveConfig:

    def test_flags_override_defaults(self):
        args = manage.build_parser().parse_args(
            ["evaluate", "--seed", "7", "--out", "elsewhere", "--checkpoint", "m.ckpt", "--data-dir", "raw"])
        config = manage.resolve_config(args)
        assert config.command == "evaluate"
        assert config.seed == 7
        assert (config.paths.out, config.paths.checkpoint, config.paths.data_dir) == ("elsewhere", "m.ckpt", "raw")

    def test_config_file_and_override(self, tmp_path):
        path = write_config(tmp_path / "run.toml", RunConfig(seed=11, model_preset="desk"))
        config = manage.resolve_config(manage.build_parser().parse_args(["pretrain", "--config", path]))
        assert config.seed == 11
        assert config.model == ModelConfig.desk()

        config = manage.resolve_config(manage.build_parser().parse_args(["pretrain", "--config", path, "--seed", "2"]))
        assert config.seed == 2

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            manage.build_parser().parse_args(["train"])


# ===================================================================
# Exit codes
# ===================================================================

class TestExitCodes:

    def test_missing_config_file(self):
        assert manage.main(["pretrain", "--config", "absent.toml", "--no-color"]) == manage.EXIT_USER_ERROR

    def test_invalid_config_file(self, tmp_path):
        (tmp_path / "bad.toml").write_text('seed = "many"\n')
        assert manage.main(["pretrain", "--config", "bad.toml"]) == manage.EXIT_USER_ERROR

    def test_evaluate_without_checkpoint(self):
        assert manage.main(["evaluate"]) == manage.EXIT_USER_ERROR

    def test_evaluate_with_absent_checkpoint(self):
        assert manage.main(["evaluate", "--checkpoint", "missing.ckpt"]) == manage.EXIT_USER_ERROR

    def test_unknown_dataset(self, tmp_path):
        config = RunConfig()
        config.finetune.dataset = "NOPE"
        path = write_config(tmp_path / "run.toml", config)
        assert manage.main(["finetune", "--config", path]) == manage.EXIT_USER_ERROR

    def test_pretrain_without_manifest(self):
        assert manage.main(["pretrain", "--out", "runs"]) == manage.EXIT_USER_ERROR

    def test_empty_data_dir(self, tmp_path):
        (tmp_path / "empty").mkdir()
        assert manage.main(["preprocess", "--data-dir", "empty"]) == manage.EXIT_USER_ERROR

    def test_non_finite_failure(self, monkeypatch):
        def explode(config):
            raise NonFiniteError("loss is nan")

        monkeypatch.setattr(manage, "run", explode)
        assert manage.main(["pretrain"]) == manage.EXIT_NON_FINITE


# ===================================================================
# Preprocess command
# ===================================================================

class TestPreprocessCommand:

    def test_chunks_and_manifest(self, data_dir, tmp_path):
        assert manage.main(["preprocess", "--data-dir", str(data_dir), "--out", "prep"]) == manage.EXIT_OK

        manifest = DatasetManifest.load(tmp_path / "prep" / "manifest.toml")
        assert manifest.chunk_count == 10
        assert manifest.subjects() == ["s1", "s2"]
        assert [s.session_id for s in manifest.sessions] == ["s1/rest", "s2/rest"]
        chunk = load_chunk(tmp_path / "prep" / manifest.sessions[0].chunks[0])
        assert chunk.shape == (20, 15360)
        assert np.all(np.abs(chunk[:19]) <= 1.0 + 1e-9)

    def test_rerun_gives_same_hash(self, data_dir, tmp_path):
        manage.main(["preprocess", "--data-dir", str(data_dir), "--out", "first"])
        manage.main(["preprocess", "--data-dir", str(data_dir), "--out", "second"])
        first = DatasetManifest.load(tmp_path / "first" / "manifest.toml")
        second = DatasetManifest.load(tmp_path / "second" / "manifest.toml")
        assert first.content_hash == second.content_hash

    def test_bad_file_is_skipped(self, data_dir, tmp_path):
        (data_dir / "s3").mkdir()
        (data_dir / "s3" / "broken.toml").write_text("duration_s = -1\n")
        assert manage.main(["preprocess", "--data-dir", str(data_dir), "--out", "prep"]) == manage.EXIT_OK
        assert DatasetManifest.load(tmp_path / "prep" / "manifest.toml").subjects() == ["s1", "s2"]
