"""
Finetune command: cross-validate one transfer variant on a preprocessed downstream dataset.

The manifest must come from a preprocessing run of a named dataset, so every chunk is a
labelled trial. Writes `report.tsv` and one `fold_<k>.ckpt` per fold to `paths.out`.

Usage:
    bendr finetune --config run.toml [--checkpoint runs/final.ckpt]
"""

from bendr.app.config import RunConfig
from bendr.app.core.exceptions import ConfigError
from bendr.app.core.finetune import PRETRAINED_VARIANTS, LabelledTrials, MetricsReport, run_folds
from bendr.app.core.ingest import get_dataset
from bendr.app.core.logger import get_logger
from bendr.commands.common import load_checkpoint_arg, load_manifest_sequences, out_dir


logger = get_logger("finetune")


def main(config: RunConfig) -> MetricsReport:
    cfg = config.finetune
    try:
        descriptor = get_dataset(cfg.dataset)
    except KeyError as err:
        raise ConfigError(str(err)) from err

    checkpoint = load_checkpoint_arg(config, required=cfg.variant in PRETRAINED_VARIANTS)
    _, sequences = load_manifest_sequences(config)
    if any(s.label is None for s in sequences):
        raise ConfigError("The manifest holds unlabelled sequences; preprocess a named downstream dataset first")
    trials = LabelledTrials.from_sequences(sequences)

    root = out_dir(config)
    report = run_folds(trials, config, checkpoint=checkpoint, model_config=config.model, descriptor=descriptor,
                       out_dir=root)
    path = report.write(root / "report.tsv")
    logger.info(f"Wrote fine-tuning report '{path}'")
    return report
