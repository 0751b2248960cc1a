"""
Unit tests for downstream fine-tuning: pooling, regularization, balanced sampling,
metrics, subject-grouped folds and the transfer variants.
"""

from itertools import product

import numpy as np
import pytest

from bendr.app.config import FinetuneConfig, RunConfig
from bendr.app.core.exceptions import CheckpointError, SequenceTooShortError
from bendr.app.core.finetune import (
    LabelledTrials, LinearClassifier, MetricsReport, ReportRow, TrainingPlan, TransformerClassifier, auroc,
    balance_sampler, bootstrap_ci, build_variant, chance_level, classifier_from_checkpoint, compute_metric,
    fold_splits, normalize_metric, pool_bendr, predict_probabilities, regularize_sequence, run_folds, segment_bounds,
    train_classifier, trainable_mask,
)
from bendr.app.core.ingest.datasets import DatasetDescriptor
from bendr.app.core.model import BendrModel, load_checkpoint, save_checkpoint
from bendr.app.core.preprocess.scaling import StandardizedSequence
from bendr.app.core.tensor import Tensor, cross_entropy


TRIAL_SAMPLES = 768


class SingleStart:
    """ Generator stand-in whose uniform draws start exactly one span, at `index`. """

    def __init__(self, index):
        self.index = index

    def random(self, size):
        draws = np.ones(size)
        draws[self.index] = 0.0
        return draws


@pytest.fixture
def checkpoint(tiny_run, tmp_path):
    model = BendrModel(tiny_run.model, seed=5)
    return load_checkpoint(save_checkpoint(tmp_path / "pretrained.ckpt", model, tiny_run))


@pytest.fixture
def toy_trials():
    """ Four subjects with four trials each, two per class; class 1 carries an offset. """
    generator = np.random.default_rng(8)
    sequences = []
    for subject, trial in product(range(4), range(4)):
        label = "right" if trial % 2 else "left"
        data = generator.standard_normal((20, TRIAL_SAMPLES)) * 0.1
        if label == "right":
            data[:19] += 0.3
        sequences.append(StandardizedSequence(data=data, subject=f"s{subject}", label=label))
    return LabelledTrials.from_sequences(sequences)


@pytest.fixture
def toy_descriptor():
    return DatasetDescriptor(name="TOY", paradigm="toy", native_rate=256, channels=20, subjects=4, targets=2,
                             folds=2, trial_window=(0.0, 3.0), metric="BAC", batch_size=4, epochs=1,
                             peak_lr=1e-3)


# ===================================================================
# Pooling and regularization
# ===================================================================

class TestPooling:

    def test_near_equal_segments(self):
        assert np.diff(segment_bounds(53)).tolist() == [14, 13, 13, 13]
        assert np.diff(segment_bounds(160)).tolist() == [40, 40, 40, 40]

    def test_constant_sequence_repeats_vector(self, rng):
        v = rng.standard_normal(8)
        pooled = pool_bendr(np.repeat(v[:, None], 21, axis=1))
        assert pooled.shape == (32,)
        np.testing.assert_allclose(pooled.data, np.tile(v, 4))

    def test_invariant_to_permutation_within_segment(self, rng):
        b = rng.standard_normal((6, 53))
        shuffled = b.copy()
        shuffled[:, :14] = b[:, rng.permutation(14)]
        np.testing.assert_allclose(pool_bendr(shuffled).data, pool_bendr(b).data)

    def test_gradient_spreads_over_segment(self, rng):
        b = Tensor(rng.standard_normal((3, 53)), requires_grad=True)
        pool_bendr(b).sum().backward()
        np.testing.assert_allclose(b.grad[:, :14], 1 / 14)
        np.testing.assert_allclose(b.grad[:, 14:], 1 / 13)

    def test_too_short(self, rng):
        with pytest.raises(SequenceTooShortError):
            pool_bendr(rng.standard_normal((4, 3)))


class TestRegularization:

    def test_zero_probabilities_are_identity(self, rng):
        b = rng.standard_normal((8, 30))
        out = regularize_sequence(b, np.zeros(8), rng, time_p=0.0, channel_p=0.0)
        np.testing.assert_array_equal(out.data, b)

    def test_time_span_is_tenth_of_sequence(self, rng):
        b = rng.standard_normal((4, 160))
        mask_vector = np.full(4, 7.0)
        out = regularize_sequence(b, mask_vector, SingleStart(20), time_p=0.5, channel_p=0.0).data
        masked = np.flatnonzero(np.all(out == 7.0, axis=0))
        assert masked.tolist() == list(range(20, 36))
        np.testing.assert_array_equal(np.delete(out, masked, axis=1), np.delete(b, masked, axis=1))

    def test_channel_span_of_51(self, rng):
        b = rng.standard_normal((512, 12)) + 10.0
        out = regularize_sequence(b, np.zeros(512), SingleStart(100), time_p=0.0, channel_p=0.5).data
        dropped = np.flatnonzero(np.all(out == 0.0, axis=1))
        assert dropped.tolist() == list(range(100, 151))

    def test_every_start_masks_everything(self, rng):
        b = rng.standard_normal((5, 20))
        mask_vector = rng.standard_normal(5)
        out = regularize_sequence(b, mask_vector, rng, time_p=1.0, channel_p=0.0).data
        np.testing.assert_array_equal(out, np.repeat(mask_vector[:, None], 20, axis=1))

    def test_dropped_channels_are_zero_rows(self, rng):
        b = rng.standard_normal((40, 10)) + 5.0
        out = regularize_sequence(b, np.zeros(40), rng, time_p=0.0, channel_p=0.3).data
        zero_rows = np.all(out == 0.0, axis=1)
        assert zero_rows.any()
        np.testing.assert_array_equal(out[~zero_rows], b[~zero_rows])


# ===================================================================
# Balanced sampling
# ===================================================================

class TestBalanceSampler:

    @pytest.mark.parametrize("counts", [(100, 10), (50, 20, 20), (6, 6)])
    def test_per_class_draws_equal_min_count(self, counts):
        labels = np.concatenate([np.full(n, cls) for cls, n in enumerate(counts)])
        for seed in range(1000):
            epoch = balance_sampler(labels, np.random.default_rng(seed))
            assert np.bincount(labels[epoch]).tolist() == [min(counts)] * len(counts)

    def test_minority_class_drawn_once_each(self, rng):
        labels = np.array([0] * 30 + [1] * 5)
        epoch = balance_sampler(labels, rng)
        assert sorted(epoch[labels[epoch] == 1].tolist()) == list(range(30, 35))

    def test_missing_expected_class(self, rng):
        with pytest.raises(ValueError):
            balance_sampler([0, 0, 2, 2], rng, num_classes=3)

    def test_single_class(self, rng):
        with pytest.raises(ValueError):
            balance_sampler([1, 1, 1], rng)


# ===================================================================
# Metrics
# ===================================================================

def brute_force_auroc(labels, scores):
    pos = scores[labels == 1][:, None]
    neg = scores[labels == 0][None, :]
    return float(np.mean((pos > neg) + 0.5 * (pos == neg)))


class TestMetrics:

    def test_auroc_perfect(self):
        assert auroc([1, 1, 0, 0], [0.9, 0.8, 0.2, 0.1]) == 1.0

    def test_auroc_one_discordant_pair(self):
        assert auroc([1, 1, 0, 0], [0.9, 0.3, 0.4, 0.1]) == pytest.approx(0.75)

    def test_auroc_ties_get_half_credit(self):
        assert auroc([1, 0], [0.5, 0.5]) == pytest.approx(0.5)

    def test_auroc_matches_pairwise_count(self):
        for seed in range(1000):
            generator = np.random.default_rng(seed)
            size = int(generator.integers(2, 200))
            labels = generator.integers(0, 2, size=size)
            labels[:2] = [0, 1]
            scores = np.round(generator.random(size), int(generator.integers(1, 4)))
            assert auroc(labels, scores) == pytest.approx(brute_force_auroc(labels, scores), abs=1e-12), seed

    def test_auroc_single_class(self):
        with pytest.raises(ValueError):
            auroc([1, 1, 1], [0.2, 0.5, 0.9])

    def test_balanced_accuracy(self):
        probs = np.array([[0.9, 0.1], [0.8, 0.2], [0.3, 0.7], [0.6, 0.4]])
        assert compute_metric("BAC", [0, 0, 1, 1], probs) == pytest.approx(0.75)
        assert compute_metric("accuracy", [0, 0, 1, 1], probs) == pytest.approx(0.75)

    def test_auroc_uses_class_one_probability(self):
        probs = np.array([[0.2, 0.8], [0.9, 0.1]])
        assert compute_metric("AUROC", [1, 0], probs) == 1.0

    def test_unknown_metric(self):
        with pytest.raises(ValueError):
            compute_metric("F1", [0, 1], np.eye(2))

    def test_normalization(self):
        assert chance_level("BAC", 4) == 0.25
        assert chance_level("AUROC", 2) == 0.5
        assert normalize_metric(0.75, "BAC", 2) == pytest.approx(0.5)
        assert normalize_metric(0.5, "AUROC", 2) == 0.0
        assert normalize_metric(1.0, "accuracy", 4) == 1.0
        assert normalize_metric(0.1, "accuracy", 4) == 0.0

    def test_bootstrap_degenerate(self):
        assert bootstrap_ci([0.7]) == (0.7, 0.7)
        assert bootstrap_ci([0.6, 0.6, 0.6]) == (0.6, 0.6)

    def test_bootstrap_brackets_mean(self):
        values = [0.55, 0.62, 0.71, 0.8, 0.9]
        low, high = bootstrap_ci(values, resamples=500, seed=1)
        assert low <= np.mean(values) <= high
        assert low < high

    def test_bootstrap_seeds_overlap(self):
        values = [0.55, 0.62, 0.71, 0.8, 0.9]
        a = bootstrap_ci(values, resamples=500, seed=1)
        b = bootstrap_ci(values, resamples=500, seed=2)
        assert a[0] <= b[1] and b[0] <= a[1]


# ===================================================================
# Folds and the report
# ===================================================================

class TestFolds:

    def test_leave_one_subject_out(self):
        subjects = np.repeat([f"s{i}" for i in range(9)], 3)
        splits = list(fold_splits(subjects, 9))
        assert len(splits) == 9
        assert all(len(set(subjects[test])) == 1 for _, test in splits)

    def test_grouped_folds_keep_subjects_apart(self):
        subjects = np.repeat([f"s{i}" for i in range(10)], 4)
        splits = list(fold_splits(subjects, 5))
        assert len(splits) == 5
        tested = []
        for train, test in splits:
            assert not set(subjects[train]) & set(subjects[test])
            assert len(set(subjects[test])) == 2
            tested.extend(set(subjects[test]))
        assert sorted(tested) == sorted(set(subjects))

    def test_fewer_subjects_than_folds(self):
        with pytest.raises(ValueError):
            list(fold_splits(["a", "a", "b"], 3))


class TestLabelledTrials:

    def test_classes_sorted_by_default(self, toy_trials):
        assert toy_trials.classes == ["left", "right"]
        assert toy_trials.num_classes == 2
        assert len(toy_trials) == 16
        assert toy_trials.labels[:4].tolist() == [0, 1, 0, 1]

    def test_select(self, toy_trials):
        subset = toy_trials.select([0, 5])
        assert subset.subjects.tolist() == ["s0", "s1"]
        assert subset.data[1] is toy_trials.data[5]

    def test_errors(self):
        data = np.zeros((20, 10))
        with pytest.raises(ValueError):
            LabelledTrials.from_sequences([])
        with pytest.raises(ValueError):
            LabelledTrials.from_sequences([StandardizedSequence(data=data, subject="a")])
        with pytest.raises(ValueError):
            LabelledTrials.from_sequences([StandardizedSequence(data=data, subject="a", label="x")],
                                          classes=["y"])


class TestMetricsReport:

    def test_tsv_layout(self):
        report = MetricsReport(dataset="TOY", variant=5, metric="BAC", num_classes=2)
        report.rows = [ReportRow("0", "s0", "BAC", 0.75, 0.5), ReportRow("1", "s1", "BAC", 0.75, 0.5)]
        summary = report.summarize(resamples=100)
        assert (summary.value, summary.ci_low, summary.ci_high) == (0.75, 0.75, 0.75)

        lines = report.to_tsv().splitlines()
        assert lines[0] == "# dataset: TOY\tvariant: 5\tclasses: 2"
        assert lines[1] == "# selection: final-epoch model"
        assert lines[2].split("\t") == ["fold", "subject", "metric", "value", "normalized", "ci_low", "ci_high"]
        assert lines[3].split("\t") == ["0", "s0", "BAC", "0.750000", "0.500000", "", ""]
        assert lines[-1].startswith("summary\tall\tBAC\t0.750000")

    def test_subject_means_average_over_folds(self):
        report = MetricsReport(dataset="TOY", variant=5, metric="AUROC", num_classes=2)
        report.rows = [ReportRow("0", "h", "AUROC", 0.6, 0.2), ReportRow("1", "h", "AUROC", 0.8, 0.6)]
        assert report.subject_means() == {"h": pytest.approx(0.7)}

    def test_empty_report(self):
        with pytest.raises(ValueError):
            MetricsReport(dataset="TOY", variant=5, metric="BAC", num_classes=2).summarize()

    def test_write(self, tmp_path):
        report = MetricsReport(dataset="TOY", variant=5, metric="BAC", num_classes=2)
        path = report.write(tmp_path / "reports" / "toy.tsv")
        assert path.read_text(encoding="utf-8") == report.to_tsv()


# ===================================================================
# Transfer variants and training
# ===================================================================

class TestVariants:

    def test_linear_head_only(self, checkpoint):
        model = build_variant(6, 3, checkpoint=checkpoint)
        assert isinstance(model, LinearClassifier)
        assert model.num_parameters(trainable_only=True) == 4 * 32 * 3 + 3
        assert [name for name, trained in trainable_mask(model).items() if trained] == ["head_weight", "head_bias"]

    def test_pretrained_encoder_is_restored(self, checkpoint):
        model = build_variant(2, 2, checkpoint=checkpoint)
        for name, values in model.encoder.state_dict().items():
            np.testing.assert_array_equal(values, checkpoint.parameters[f"encoder.{name}"])

    def test_frozen_encoder_has_zero_gradient(self, checkpoint, rng):
        model = build_variant(4, 2, checkpoint=checkpoint)
        assert isinstance(model, TransformerClassifier)
        model.train()
        model.zero_grad()
        x = rng.standard_normal((2, 20, TRIAL_SAMPLES))
        cross_entropy(model.logits(list(x)), np.array([0, 1])).backward()
        assert all(np.abs(p.grad).sum() == 0 for p in model.encoder.parameters())
        assert np.abs(model.head_weight.grad).sum() > 0

    @pytest.mark.parametrize("variant", [1, 2, 3, 4, 5, 6])
    def test_mask_vector_never_trained(self, variant, checkpoint):
        model = build_variant(variant, 2, checkpoint=checkpoint)
        assert not model.mask_vector.requires_grad

    @pytest.mark.parametrize("variant", [1, 2, 4, 6])
    def test_pretrained_variants_need_checkpoint(self, variant, tiny_config):
        with pytest.raises(CheckpointError):
            build_variant(variant, 2, model_config=tiny_config)

    @pytest.mark.parametrize("variant", [3, 5])
    def test_random_variants_build_without_checkpoint(self, variant, tiny_config):
        model = build_variant(variant, 2, model_config=tiny_config, seed=1)
        assert all(p.requires_grad for name, p in model.named_parameters() if "mask_vector" not in name)

    def test_unknown_variant(self, tiny_config):
        with pytest.raises(ValueError):
            build_variant(7, 2, model_config=tiny_config)


class TestTraining:

    def test_plan_prefers_config(self, toy_descriptor):
        plan = TrainingPlan.resolve(FinetuneConfig(epochs=3), toy_descriptor)
        assert plan == TrainingPlan(batch_size=4, epochs=3, peak_lr=1e-3)

    def test_train_and_predict(self, toy_trials, tiny_config):
        model = build_variant(5, 2, model_config=tiny_config, seed=2)
        plan = TrainingPlan(batch_size=4, epochs=2, peak_lr=1e-3)
        losses = train_classifier(model, toy_trials.data[:8], toy_trials.labels[:8], FinetuneConfig(), plan, 2,
                                  np.random.default_rng(0))
        assert len(losses) == 2
        assert np.all(np.isfinite(losses))

        probs = predict_probabilities(model, toy_trials.data[:5], batch_size=2)
        assert probs.shape == (5, 2)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0)

    def test_prediction_is_deterministic(self, toy_trials, tiny_config):
        model = build_variant(3, 2, model_config=tiny_config, seed=2)
        a = predict_probabilities(model, toy_trials.data[:3])
        b = predict_probabilities(model, toy_trials.data[:3])
        np.testing.assert_array_equal(a, b)

    def test_run_folds_grouped(self, toy_trials, toy_descriptor, tiny_config):
        config = RunConfig(seed=3, model=tiny_config)
        config.finetune.variant = 5
        config.finetune.bootstrap_resamples = 50
        report = run_folds(toy_trials, config, model_config=tiny_config, descriptor=toy_descriptor)
        assert sorted(row.subject for row in report.rows) == ["s0", "s1", "s2", "s3"]
        assert {row.fold for row in report.rows} == {"0", "1"}
        assert report.summary.ci_low <= report.summary.value <= report.summary.ci_high
        assert 0.0 <= report.summary.normalized <= 1.0

    def test_run_folds_with_held_out_subject(self, toy_trials, toy_descriptor, tiny_config):
        config = RunConfig(seed=3, model=tiny_config)
        config.finetune.variant = 5
        config.finetune.folds = 3
        config.finetune.held_out_subjects = ["s3"]
        config.finetune.bootstrap_resamples = 50
        report = run_folds(toy_trials, config, model_config=tiny_config, descriptor=toy_descriptor)
        assert [row.subject for row in report.rows if row.subject == "s3"] == ["s3"] * 3
        assert sorted(row.subject for row in report.rows if row.subject != "s3") == ["s0", "s1", "s2"]

    def test_run_folds_saves_fold_classifiers(self, toy_trials, toy_descriptor, checkpoint, tiny_run, tmp_path):
        tiny_run.finetune.variant = 6
        tiny_run.finetune.bootstrap_resamples = 50
        run_folds(toy_trials, tiny_run, checkpoint=checkpoint, descriptor=toy_descriptor, out_dir=tmp_path / "ft")
        assert sorted(p.name for p in (tmp_path / "ft").glob("*.ckpt")) == ["fold_0.ckpt", "fold_1.ckpt"]

        saved = load_checkpoint(tmp_path / "ft" / "fold_0.ckpt")
        assert saved.extra["variant"] == 6
        assert saved.extra["classes"] == ["left", "right"]
        assert saved.adam_state().step > 0
        assert {"head_weight", "head_bias", "mask_vector"} <= set(saved.parameters)
        np.testing.assert_array_equal(saved.parameters["encoder.blocks.0.weight"],
                                      checkpoint.parameters["encoder.blocks.0.weight"])
        np.testing.assert_array_equal(saved.parameters["mask_vector"], checkpoint.parameters["contextualizer.mask_vector"])

        restored = classifier_from_checkpoint(saved)
        assert isinstance(restored, LinearClassifier)
        np.testing.assert_array_equal(restored.head_weight.data, saved.parameters["head_weight"])

    @pytest.mark.parametrize("variant", [1, 2])
    def test_restored_classifier_predicts_the_same(self, variant, checkpoint, toy_trials, tiny_run, tmp_path):
        model = build_variant(variant, 2, checkpoint=checkpoint, seed=4)
        path = save_checkpoint(tmp_path / "clf.ckpt", model, tiny_run, model_config=model.config,
                               extra={"variant": variant, "targets": 2})
        restored = classifier_from_checkpoint(load_checkpoint(path))
        np.testing.assert_array_equal(predict_probabilities(restored, toy_trials.data[:3]),
                                      predict_probabilities(model, toy_trials.data[:3]))

    def test_pretraining_checkpoint_is_not_a_classifier(self, checkpoint):
        with pytest.raises(CheckpointError):
            classifier_from_checkpoint(checkpoint)

    def test_run_folds_too_many_folds(self, toy_trials, toy_descriptor, tiny_config):
        config = RunConfig(seed=3, model=tiny_config)
        config.finetune.variant = 5
        config.finetune.folds = 5
        with pytest.raises(ValueError):
            run_folds(toy_trials, config, model_config=tiny_config, descriptor=toy_descriptor)
