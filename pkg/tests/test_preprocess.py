"""
Unit tests for channel mapping, resampling, filtering, scaling, manifests and the preprocessing pipeline.
"""

import numpy as np
import pytest

from bendr.app.config import PreprocessConfig
from bendr.app.core.exceptions import ConfigError, ShapeError
from bendr.app.core.ingest import Annotation, RawSession, RawSignal
from bendr.app.core.preprocess import (
    MISSING, TARGET_CHANNELS, DatasetManifest, ManifestSession, compute_dataset_range, integer_factor, lowpass,
    map_channels, map_labels, normalize_label, prepare_session, resample, scale_array, scale_sequence,
    standardize_session, standardize_trials,
)


def _rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


# ============================================================
# Channel mapping
# ============================================================

class TestChannelMapping:

    def test_standard_montage_is_identity(self):
        mapping = map_labels(list(TARGET_CHANNELS))
        assert mapping.assignment == list(range(19))
        assert mapping.missing == []

    def test_sleep_montage(self):
        mapping = map_labels(["EEG FPz-Cz", "EEG Pz-Oz", "EOG horizontal", "Resp oro-nasal"])
        assert len(mapping.missing) == 17
        assert mapping.as_dict()["Pz"] == "EEG Pz-Oz"
        assert mapping.as_dict()["Fp1"] == "EEG FPz-Cz"

    def test_midline_fallback_only_when_target_absent(self):
        mapping = map_labels(["FPz", "Fp1"])
        assert mapping.as_dict()["Fp1"] == "Fp1"

    def test_legacy_temporal_names(self):
        assert normalize_label("T3") == "T7"
        assert map_labels(["T3", "T6"]).as_dict()["P8"] == "T6"

    def test_label_normalization(self):
        assert normalize_label("EEG Fp1-REF") == "FP1"
        assert normalize_label("Fc5.") == "FC5"

    def test_duplicate_resolution(self):
        with pytest.raises(ValueError):
            map_labels(["T3", "T7"])

    def test_apply_zero_fills_missing(self, rng):
        mapping = map_channels(["Cz", "EOG"])
        out = mapping.apply(rng.standard_normal((2, 8)))
        assert out.shape == (19, 8)
        present = mapping.present
        assert present.sum() == 1
        np.testing.assert_array_equal(out[~present], 0.0)
        assert mapping.assignment[TARGET_CHANNELS.index("Cz")] == 0
        assert mapping.assignment[0] == MISSING

    def test_apply_shape_mismatch(self):
        with pytest.raises(ShapeError):
            map_labels(["Cz"]).apply(np.zeros((2, 4)))


# ============================================================
# Resampling and filtering
# ============================================================

class TestResample:

    def test_integer_factors(self):
        assert integer_factor(160) == ("up", 2)
        assert integer_factor(2048) == ("down", 8)
        assert integer_factor(256) == ("up", 1)

    def test_identity_at_target_rate(self, rng):
        x = rng.standard_normal((2, 300))
        np.testing.assert_array_equal(resample(x, 256), x)

    def test_decimation_is_exact(self, rng):
        x = rng.standard_normal(2048)
        np.testing.assert_array_equal(resample(x, 2048), x[::8])

    def test_output_length(self, rng):
        for rate in (100, 160, 200, 250, 1000):
            x = rng.standard_normal(int(rate * 3))
            assert resample(x, rate).shape == (768,)

    def test_oversampled_values_come_from_input(self, rng):
        x = rng.standard_normal(160)
        assert set(resample(x, 160)) <= set(x)


class TestLowpass:

    @staticmethod
    def _tone(frequency, rate, seconds=4.0):
        t = np.arange(int(rate * seconds)) / rate
        return np.sin(2 * np.pi * frequency * t)

    def test_stopband_tone_removed(self):
        x = self._tone(200, 2048)
        y = lowpass(x, 120, 2048)
        core = slice(1024, -1024)
        assert _rms(y[core]) < 0.01 * _rms(x[core])

    def test_passband_tone_kept(self):
        x = self._tone(10, 2048)
        y = lowpass(x, 120, 2048)
        core = slice(1024, -1024)
        assert _rms(y[core]) == pytest.approx(_rms(x[core]), rel=0.01)

    def test_dc_unchanged(self):
        np.testing.assert_allclose(lowpass(np.full(4096, 3.0), 120, 2048), 3.0, atol=1e-9)

    def test_cutoff_above_nyquist(self):
        with pytest.raises(ValueError):
            lowpass(np.zeros(100), 130, 256)


# ============================================================
# Scaling
# ============================================================

class TestScaling:

    def test_affine_map(self):
        x = np.array([[-37.5, 0.0, 12.5]])
        out = scale_array(x, dataset_range=200.0)
        np.testing.assert_allclose(out[0], [-1.0, 0.5, 1.0])

    def test_amplitude_channel(self):
        x = np.array([[-37.5, 0.0, 12.5]])
        assert scale_sequence(x, dataset_range=200.0).amplitude == pytest.approx(0.25)

    def test_fixed_point(self):
        x = np.array([[-1.0, 0.2], [0.4, 1.0]])
        out = scale_array(x, dataset_range=8.0)
        np.testing.assert_allclose(out[:2], x)
        np.testing.assert_allclose(out[2], 0.25)

    def test_constant_input(self):
        out = scale_array(np.full((3, 5), 4.0), dataset_range=10.0)
        np.testing.assert_array_equal(out, 0.0)

    def test_missing_channels_stay_zero(self, rng):
        x = rng.standard_normal((3, 10)) * 20
        x[1] = 1000.0
        out = scale_array(x, dataset_range=100.0, present=np.array([True, False, True]))
        np.testing.assert_array_equal(out[1], 0.0)
        assert out[[0, 2]].min() == pytest.approx(-1.0)
        assert out[[0, 2]].max() == pytest.approx(1.0)

    def test_channel_mode(self):
        x = np.array([[0.0, 10.0], [0.0, 1.0]])
        out = scale_array(x, dataset_range=10.0, mode="channel")
        np.testing.assert_allclose(out[:2], [[-1.0, 1.0], [-1.0, 1.0]])
        assert out[2, 0] == pytest.approx(1.0)

    def test_invalid_range(self):
        with pytest.raises(ValueError):
            scale_array(np.ones((1, 2)), dataset_range=0.0)


# ============================================================
# Manifest
# ============================================================

class TestManifest:

    @staticmethod
    def _manifest():
        return DatasetManifest(dataset="pretrain", dataset_range=412.5, sessions=[
            ManifestSession(session_id="S01/rec", subject="S01", native_rates={"Cz": 256.0},
                            channels={"Cz": "EEG Cz-REF"}, chunks=["chunks/S01_rec_0000.bin"]),
        ])

    def test_hash_is_reproducible(self):
        assert self._manifest().compute_hash() == self._manifest().compute_hash()

    def test_save_and_load(self, tmp_path):
        path = self._manifest().save(tmp_path / "manifest.toml")
        loaded = DatasetManifest.load(path)
        assert loaded.chunk_count == 1
        assert loaded.subjects() == ["S01"]
        assert loaded.content_hash == self._manifest().compute_hash()

    def test_tampering_detected(self, tmp_path):
        path = self._manifest().save(tmp_path / "manifest.toml")
        path.write_text(path.read_text().replace("412.5", "512.5"))
        with pytest.raises(ConfigError):
            DatasetManifest.load(path)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ConfigError):
            DatasetManifest.load(tmp_path / "absent.toml")


# ============================================================
# Pipeline
# ============================================================

class TestPipeline:

    @pytest.fixture
    def session(self, rng):
        signals = [
            RawSignal(label="EEG Fp1-REF", sampling_rate=1024, samples=rng.standard_normal(1024 * 10) * 50),
            RawSignal(label="EEG T3-REF", sampling_rate=1024, samples=rng.standard_normal(1024 * 10) * 50),
            RawSignal(label="EOG", sampling_rate=1024, samples=rng.standard_normal(1024 * 10) * 500),
        ]
        events = [Annotation(onset=2.0, label="a"), Annotation(onset=5.0, label="b"), Annotation(onset=9.5, label="a")]
        return RawSession(signals=signals, annotations=events, subject="S01", session_id="S01/rec")

    def test_prepare_session(self, session):
        prepared = prepare_session(session, PreprocessConfig())
        assert prepared.data.shape == (19, 2560)
        assert prepared.present.sum() == 2
        assert prepared.native_rates == {"Fp1": 1024.0, "T7": 1024.0}

    def test_dataset_range_covers_all_sessions(self, session):
        prepared = prepare_session(session, PreprocessConfig())
        low, high = prepared.value_range()
        shifted = prepare_session(session, PreprocessConfig())
        shifted.data = shifted.data + 1000.0 * shifted.present[:, None]
        assert compute_dataset_range([prepared, shifted]) == pytest.approx(high + 1000.0 - low)

    def test_undefined_dataset_range(self):
        with pytest.raises(ValueError):
            compute_dataset_range([])

    def test_standardize_windows(self, session):
        config = PreprocessConfig(window_s=4, stride_s=4)
        prepared = prepare_session(session, config)
        sequences = standardize_session(prepared, compute_dataset_range([prepared]), config)
        assert len(sequences) == 2
        for s in sequences:
            assert s.data.shape == (20, 1024)
            assert s.subject == "S01"
            assert np.abs(s.data).max() <= 1.0
            assert 0.0 < s.amplitude <= 1.0

    def test_standardize_trials(self, session):
        config = PreprocessConfig()
        prepared = prepare_session(session, config)
        trials = standardize_trials(prepared, compute_dataset_range([prepared]), config, window=(0.0, 1.0))
        assert [t.label for t in trials] == ["a", "b"]
        assert all(t.data.shape == (20, 256) for t in trials)
