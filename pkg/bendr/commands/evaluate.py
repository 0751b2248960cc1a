"""
Evaluate command: per-sequence contrastive accuracy of a pretrained checkpoint.

Writes `contrastive.tsv` to `paths.out`.

Usage:
    bendr evaluate --config run.toml --checkpoint runs/final.ckpt
"""

from pathlib import Path

from bendr.app.config import RunConfig
from bendr.app.core.logger import get_logger
from bendr.app.core.pretrain import evaluate_contrastive, write_contrastive_table
from bendr.commands.common import load_checkpoint_arg, load_manifest_sequences, out_dir


logger = get_logger("evaluate")


def main(config: RunConfig) -> Path:
    model = load_checkpoint_arg(config).build_model()
    manifest, sequences = load_manifest_sequences(config)
    length = int(round(config.evaluate.sequence_s * manifest.target_rate))
    accuracies = evaluate_contrastive(model, [s.data for s in sequences], config.pretrain, length=length,
                                      seed=config.evaluate.seed)
    path = write_contrastive_table(accuracies, model.encoder.output_length(length), out_dir(config) / "contrastive.tsv")
    logger.info(f"Mean contrastive accuracy {accuracies.mean():.4f} over {len(accuracies)} sequences -> '{path}'")
    return path
