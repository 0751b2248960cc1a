"""
Sweep command: contrastive accuracy of a pretrained checkpoint as the sequence length grows.

Every length evaluates the same sequences truncated from their start. Writes `sweep.tsv`.

Usage:
    bendr sweep --config run.toml --checkpoint runs/final.ckpt
"""

from pathlib import Path

from bendr.app.config import RunConfig
from bendr.app.core.logger import get_logger
from bendr.app.core.pretrain import length_sweep, write_sweep_table
from bendr.commands.common import load_checkpoint_arg, load_manifest_sequences, out_dir


logger = get_logger("sweep")


def main(config: RunConfig) -> Path:
    model = load_checkpoint_arg(config).build_model()
    manifest, sequences = load_manifest_sequences(config)
    rows = length_sweep(model, [s.data for s in sequences], config.sweep.lengths_s, config.pretrain,
                        rate=manifest.target_rate, seed=config.evaluate.seed)
    path = write_sweep_table(rows, out_dir(config) / "sweep.tsv")
    logger.info(f"Wrote {len(rows)} sweep rows to '{path}'")
    return path
