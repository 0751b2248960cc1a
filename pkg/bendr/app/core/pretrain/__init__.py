"""
Masked contrastive pretraining and contrastive evaluation.
"""

from bendr.app.core.pretrain.masking import (
    MaskPlan, evaluation_plan, evaluation_starts, sample_distractors, sample_mask_spans, spans_to_positions,
)
from bendr.app.core.pretrain.loss import (
    ContrastiveOutput, accuracy_from_similarities, candidate_similarities, contrastive_accuracy, contrastive_loss,
    contrastive_loss_from_similarities,
)
from bendr.app.core.pretrain.loop import PretrainResult, SequenceSampler, pretrain_loop, pretrain_step
from bendr.app.core.pretrain.evaluation import (
    SweepRow, evaluate_contrastive, length_sweep, write_contrastive_table, write_sweep_table,
)

__all__ = [
    "MaskPlan", "evaluation_plan", "evaluation_starts", "sample_distractors", "sample_mask_spans", "spans_to_positions",
    "ContrastiveOutput", "accuracy_from_similarities", "candidate_similarities", "contrastive_accuracy",
    "contrastive_loss", "contrastive_loss_from_similarities",
    "PretrainResult", "SequenceSampler", "pretrain_loop", "pretrain_step",
    "SweepRow", "evaluate_contrastive", "length_sweep", "write_contrastive_table", "write_sweep_table",
]
