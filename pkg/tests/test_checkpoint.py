"""
Unit tests for checkpoint persistence.
"""

import json

import numpy as np
import pytest

from bendr.app.core.exceptions import CheckpointError
from bendr.app.core.model import BendrModel, load_checkpoint, save_checkpoint
from bendr.app.core.tensor import AdamState, adam_step


@pytest.fixture
def saved(tiny_run, tmp_path):
    model = BendrModel(tiny_run.model, seed=9)
    params = list(model.parameters())
    adam = AdamState.for_parameters(params)
    adam_step(params, [np.ones_like(p.data) for p in params], adam, lr=1e-3)
    path = save_checkpoint(tmp_path / "model.ckpt", model, tiny_run, step=1, adam=adam, extra={"variant": 2})
    return model, adam, path


class TestRoundTrip:

    def test_parameters_and_metadata(self, saved, tiny_run):
        model, _, path = saved
        checkpoint = load_checkpoint(path)
        assert checkpoint.step == 1
        assert checkpoint.extra == {"variant": 2}
        assert checkpoint.model_config == tiny_run.model
        assert checkpoint.config["seed"] == tiny_run.seed
        for name, values in model.state_dict().items():
            np.testing.assert_array_equal(checkpoint.parameters[name], values)

    def test_build_model(self, saved, rng):
        model, _, path = saved
        restored = load_checkpoint(path).build_model().eval()
        x = rng.standard_normal((20, 480))
        np.testing.assert_array_equal(restored(x)[1].projected.data, model.eval()(x)[1].projected.data)

    def test_adam_state(self, saved):
        _, adam, path = saved
        restored = load_checkpoint(path).adam_state(weight_decay=0.01)
        assert restored.step == 1
        for a, b in zip(restored.first_moments, adam.first_moments):
            np.testing.assert_array_equal(a, b)

    def test_no_temporary_file_left(self, saved):
        _, _, path = saved
        assert [p.name for p in path.parent.iterdir()] == ["model.ckpt"]

    def test_restore_into_other_architecture(self, saved, tiny_config):
        _, _, path = saved
        other = BendrModel(tiny_config.model_copy(update={"ff_dim": 48}))
        with pytest.raises(CheckpointError):
            load_checkpoint(path).restore(other)


class TestCorruption:

    def test_missing(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "absent.ckpt")

    def test_bad_magic(self, saved):
        _, _, path = saved
        path.write_bytes(b"XXXXXXXX" + path.read_bytes()[8:])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_truncated(self, saved):
        _, _, path = saved
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_config_tampering(self, saved):
        _, _, path = saved
        data = path.read_bytes()
        assert data.count(b'"seed": 3') == 1
        path.write_bytes(data.replace(b'"seed": 3', b'"seed": 4'))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_major_version(self, saved):
        _, _, path = saved
        path.write_bytes(path.read_bytes().replace(b'"format_version": "1.0.0"', b'"format_version": "2.0.0"'))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    @pytest.mark.parametrize("key", ["config", "sections", "step"])
    def test_metadata_key_missing(self, saved, key):
        _, _, path = saved
        data = path.read_bytes()
        size = int(np.frombuffer(data, dtype="<u4", count=1, offset=8)[0])
        metadata = json.loads(data[12:12 + size])
        del metadata[key]
        header = json.dumps(metadata).encode("utf-8")
        path.write_bytes(data[:8] + np.array([len(header)], dtype="<u4").tobytes() + header + data[12 + size:])
        with pytest.raises(CheckpointError, match=key):
            load_checkpoint(path)
