"""
Unit tests for span masking, the contrastive objective, the pretraining loop and contrastive evaluation.
"""

import math

import numpy as np
import pytest

from bendr.app.config import PretrainConfig
from bendr.app.core.exceptions import SequenceTooShortError, TrainingAbortedError
from bendr.app.core.model import BendrModel, ContextSequence, load_checkpoint
from bendr.app.core.pretrain import (
    SequenceSampler, accuracy_from_similarities, contrastive_accuracy, contrastive_loss,
    contrastive_loss_from_similarities, evaluate_contrastive, evaluation_plan, evaluation_starts, length_sweep,
    pretrain_loop, sample_distractors, sample_mask_spans, spans_to_positions, write_contrastive_table,
    write_sweep_table,
)
from bendr.app.core.pretrain import loop
from bendr.app.core.tensor import Tensor, concat


# ============================================================
# Fixtures
# ============================================================

@pytest.fixture
def sequences(rng):
    """ Four standardized-looking 20 x 1920 sequences (20 tokens each). """
    return [np.clip(rng.standard_normal((20, 1920)) * 0.3, -1, 1) for _ in range(4)]


@pytest.fixture
def eval_config():
    """ Denser masking so 20-token sequences hold evaluation spans. """
    return PretrainConfig(p_mask=0.2, span=5)


def _oracle_context(b: Tensor) -> ContextSequence:
    projected = concat([Tensor(np.ones((1, b.shape[0]))), b.T], axis=0)
    return ContextSequence(hidden=projected, projected=projected)


# ============================================================
# Masking
# ============================================================

class TestMaskSpans:

    def test_no_masking(self):
        assert sample_mask_spans(160, 0.0, 10, seed=0).is_empty

    def test_full_overlap(self):
        plan = sample_mask_spans(20, 1.0, 10, seed=0)
        np.testing.assert_array_equal(plan.masked, np.arange(20))

    def test_expected_span_count(self):
        counts = [len(sample_mask_spans(160, 0.065, 10, seed=s, num_distractors=1).starts) for s in range(10000)]
        assert np.mean(counts) == pytest.approx(10.4, abs=0.3)

    def test_spans_clipped_at_end(self):
        np.testing.assert_array_equal(spans_to_positions(np.array([2, 7]), 4, 9), [2, 3, 4, 5, 7, 8])

    def test_sequence_not_longer_than_span(self):
        with pytest.raises(SequenceTooShortError):
            sample_mask_spans(10, 0.5, 10, seed=0)

    def test_plan_shapes(self):
        plan = sample_mask_spans(160, 0.065, 10, seed=3)
        assert plan.distractors.shape == (len(plan.masked), 20)
        assert plan.candidates().shape == (len(plan.masked), 21)
        assert plan.masked.max() < 160


class TestDistractors:

    def test_never_the_target(self):
        masked = np.arange(50)
        draws = sample_distractors(50, masked, 200, seed=1)
        assert draws.shape == (50, 200)
        assert not (draws == masked[:, None]).any()
        assert draws.min() >= 0 and draws.max() < 50

    def test_uniform_over_other_positions(self):
        draws = sample_distractors(11, np.array([5]), 10000, seed=2)[0]
        counts = np.bincount(draws, minlength=11)
        assert counts[5] == 0
        others = np.delete(counts, 5)
        assert others.min() > 800 and others.max() < 1200

    def test_single_token_sequence(self):
        with pytest.raises(SequenceTooShortError):
            sample_distractors(1, np.array([0]), 5)


class TestEvaluationPlan:

    def test_sixty_second_starts(self):
        np.testing.assert_array_equal(evaluation_starts(160, 0.065), [0, 32, 64, 96, 128])

    def test_twenty_second_starts(self):
        np.testing.assert_array_equal(evaluation_starts(53, 0.065), [0])

    def test_too_short_to_evaluate(self):
        with pytest.raises(SequenceTooShortError):
            evaluation_starts(10, 0.065)

    def test_deterministic(self):
        a, b = evaluation_plan(160, 0.065, 10, seed=4), evaluation_plan(160, 0.065, 10, seed=4)
        np.testing.assert_array_equal(a.distractors, b.distractors)
        assert len(a.masked) == 50


# ============================================================
# Contrastive objective
# ============================================================

class TestContrastiveLoss:

    def test_uniform_similarities(self):
        loss = contrastive_loss_from_similarities(Tensor(np.zeros((3, 21))), 0.1)
        assert loss.item() == pytest.approx(math.log(21), abs=1e-12)

    def test_target_most_similar(self):
        sims = np.zeros((1, 21))
        sims[0, 0] = 1.0
        loss = contrastive_loss_from_similarities(Tensor(sims), 0.1)
        assert loss.item() == pytest.approx(math.log(1 + 20 * math.exp(-10)), rel=1e-9)
        assert loss.item() == pytest.approx(9.08e-4, rel=1e-3)

    def test_distractors_most_similar(self):
        sims = np.ones((1, 21))
        sims[0, 0] = 0.0
        loss = contrastive_loss_from_similarities(Tensor(sims), 0.1)
        assert loss.item() == pytest.approx(12.996, abs=1e-3)

    def test_invalid_temperature(self):
        with pytest.raises(ValueError):
            contrastive_loss_from_similarities(Tensor(np.zeros((1, 3))), 0.0)

    def test_accuracy_counts_argmax(self):
        sims = np.array([[0.9, 0.1, 0.2], [0.1, 0.8, 0.3]])
        assert accuracy_from_similarities(sims) == 0.5

    def test_collapsed_similarities_score_zero(self):
        assert accuracy_from_similarities(np.ones((10, 21))) == 0.0

    def test_tie_with_one_distractor_is_a_miss(self):
        sims = np.array([[0.5, 0.5, 0.1], [0.6, 0.5, 0.1]])
        assert accuracy_from_similarities(sims) == 0.5

    def test_oracle_accuracy(self, rng):
        b = Tensor(rng.standard_normal((16, 30)))
        plan = evaluation_plan(30, 0.2, 5, seed=0)
        assert contrastive_accuracy(_oracle_context(b), b, plan) == 1.0

    def test_empty_plan_rejected(self, rng):
        b = Tensor(rng.standard_normal((16, 30)))
        with pytest.raises(ValueError):
            contrastive_loss(_oracle_context(b), b, sample_mask_spans(30, 0.0, 5, seed=0), 0.1)

    def test_penalty_is_added(self, rng):
        b = Tensor(rng.standard_normal((16, 30)))
        output = contrastive_loss(_oracle_context(b), b, evaluation_plan(30, 0.2, 5, seed=0), 0.1, activation_weight=2.0)
        assert output.loss.item() == pytest.approx(output.contrastive.item() + 2.0 * np.mean(b.data ** 2))

    def test_mask_vector_receives_gradient(self, tiny_config, sequences):
        model = BendrModel(tiny_config).eval()
        model.zero_grad()
        b = model.encoder(sequences[0])
        plan = evaluation_plan(b.shape[1], 0.2, 5, seed=0)
        context = model.contextualizer(b, masked=plan.masked)
        contrastive_loss(context, b, plan, 0.1).loss.backward()
        assert np.abs(model.contextualizer.mask_vector.grad).sum() > 0


# ============================================================
# Training loop
# ============================================================

class TestSequenceSampler:

    def test_every_pass_visits_all(self, rng):
        items = [np.full(1, i) for i in range(5)]
        sampler = SequenceSampler(items, rng)
        seen = [int(x[0]) for x in sampler.batch(5)]
        assert sorted(seen) == list(range(5))

    def test_empty(self, rng):
        with pytest.raises(ValueError):
            SequenceSampler([], rng)


class TestPretrainLoop:

    def test_zero_learning_rate_keeps_parameters(self, tiny_run, sequences):
        tiny_run.pretrain.peak_lr = 0.0
        model = BendrModel(tiny_run.model, seed=1)
        before = model.state_dict()
        pretrain_loop(model, sequences, tiny_run)
        for name, values in model.state_dict().items():
            np.testing.assert_array_equal(values, before[name], err_msg=name)

    def test_fixed_seed_is_reproducible(self, tiny_run, sequences):
        first = pretrain_loop(BendrModel(tiny_run.model, seed=1), sequences, tiny_run)
        second = pretrain_loop(BendrModel(tiny_run.model, seed=1), sequences, tiny_run)
        assert first.losses == second.losses
        assert len(first.history) == tiny_run.pretrain.total_steps

    def test_checkpoints_and_log(self, tiny_run, sequences, tmp_path):
        out = tmp_path / "run"
        result = pretrain_loop(BendrModel(tiny_run.model, seed=1), sequences, tiny_run, out_dir=out)
        assert sorted(p.name for p in out.glob("*.ckpt")) == ["final.ckpt", "step_000002.ckpt", "step_000004.ckpt"]
        assert result.checkpoint_path == out / "final.ckpt"
        assert load_checkpoint(result.checkpoint_path).step == 4
        lines = (tmp_path / "out" / "training.log").read_text().splitlines()
        assert [line.split("\t")[0] for line in lines] == ["1", "2", "3", "4"]

    def test_resume_continues_step_counter(self, tiny_run, sequences, tmp_path):
        model = BendrModel(tiny_run.model, seed=1)
        pretrain_loop(model, sequences, tiny_run, out_dir=tmp_path / "run")
        checkpoint = load_checkpoint(tmp_path / "run" / "step_000002.ckpt")
        resumed = pretrain_loop(checkpoint.build_model(), sequences, tiny_run,
                                adam=checkpoint.adam_state(weight_decay=0.01), start_step=checkpoint.step)
        assert [r["step"] for r in resumed.history] == [3, 4]

    def test_resume_matches_uninterrupted_run(self, tiny_run, sequences, tmp_path):
        uninterrupted = pretrain_loop(BendrModel(tiny_run.model, seed=1), sequences, tiny_run, out_dir=tmp_path / "run")
        checkpoint = load_checkpoint(tmp_path / "run" / "step_000002.ckpt")
        assert "sampler" in checkpoint.extra
        resumed = pretrain_loop(checkpoint.build_model(), sequences, tiny_run,
                                adam=checkpoint.adam_state(weight_decay=tiny_run.pretrain.weight_decay),
                                start_step=checkpoint.step, sampler_state=checkpoint.extra["sampler"])
        np.testing.assert_allclose(resumed.losses, uninterrupted.losses[2:], rtol=1e-12)

    def test_non_finite_aborts(self, tiny_run, sequences):
        model = BendrModel(tiny_run.model, seed=1)
        model.encoder.blocks[0].weight.data[:] = np.inf
        with pytest.raises(TrainingAbortedError) as info:
            pretrain_loop(model, sequences, tiny_run)
        assert info.value.step == 1
        assert info.value.last_checkpoint is None

    def test_abort_at_first_step_leaves_last_good_checkpoint(self, tiny_run, sequences, tmp_path):
        model = BendrModel(tiny_run.model, seed=1)
        initial = model.state_dict()
        poisoned = [s.copy() for s in sequences]
        for s in poisoned:
            s[0, 100] = np.nan
        with pytest.raises(TrainingAbortedError) as info:
            pretrain_loop(model, poisoned, tiny_run, out_dir=tmp_path / "run")
        assert info.value.step == 1
        assert info.value.last_checkpoint == str(tmp_path / "run" / "last_good.ckpt")
        checkpoint = load_checkpoint(info.value.last_checkpoint)
        assert checkpoint.step == 0
        restored = checkpoint.build_model().state_dict()
        for name, values in initial.items():
            np.testing.assert_array_equal(restored[name], values, err_msg=name)

    def test_abort_after_updates_keeps_previous_step(self, tiny_run, sequences, tmp_path, monkeypatch):
        tiny_run.pretrain.checkpoint_every = 100
        real_step = loop.pretrain_step
        calls = []

        def failing_third_step(model, batch, config, rng):
            calls.append(1)
            loss, accuracy = real_step(model, batch, config, rng)
            return (loss * float("nan") if len(calls) == 3 else loss), accuracy

        monkeypatch.setattr(loop, "pretrain_step", failing_third_step)
        model = BendrModel(tiny_run.model, seed=1)
        with pytest.raises(TrainingAbortedError) as info:
            pretrain_loop(model, sequences, tiny_run, out_dir=tmp_path / "run")
        assert info.value.step == 3
        checkpoint = load_checkpoint(info.value.last_checkpoint)
        assert checkpoint.step == 2
        assert checkpoint.adam_state().step == 2
        for name, values in model.state_dict().items():
            np.testing.assert_array_equal(checkpoint.parameters[name], values, err_msg=name)


# ============================================================
# Evaluation
# ============================================================

class TestEvaluation:

    def test_deterministic_accuracies(self, tiny_config, sequences, eval_config):
        model = BendrModel(tiny_config, seed=2)
        first = evaluate_contrastive(model, sequences, eval_config, seed=5)
        second = evaluate_contrastive(model, sequences, eval_config, seed=5)
        np.testing.assert_array_equal(first, second)
        assert first.shape == (4,)
        assert ((first >= 0) & (first <= 1)).all()

    def test_truncation_too_long(self, tiny_config, sequences, eval_config):
        with pytest.raises(SequenceTooShortError):
            evaluate_contrastive(BendrModel(tiny_config), sequences, eval_config, length=4000)

    def test_length_sweep_rows(self, tiny_config, sequences, eval_config, tmp_path):
        rows = length_sweep(BendrModel(tiny_config), sequences, [3.75, 7.5], eval_config, rate=256.0)
        assert [(r.length_s, r.tokens, r.n_sequences) for r in rows] == [(3.75, 10, 4), (7.5, 20, 4)]
        lines = write_sweep_table(rows, tmp_path / "sweep.tsv").read_text().splitlines()
        assert lines[0].split("\t") == ["length_s", "tokens", "mean_accuracy", "n_sequences"]
        assert len(lines) == 3

    def test_single_length(self, tiny_config, sequences, eval_config):
        assert len(length_sweep(BendrModel(tiny_config), sequences, [7.5], eval_config)) == 1

    def test_contrastive_table(self, tmp_path):
        lines = write_contrastive_table([0.5, 1.0], 160, tmp_path / "c.tsv").read_text().splitlines()
        assert lines == ["sequence\ttokens\taccuracy", "0\t160\t0.500000", "1\t160\t1.000000"]
