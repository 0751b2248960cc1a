"""
Pretrain command.

Loads the chunks of a preprocessing run and runs masked contrastive pretraining, writing
`step_XXXXXX.ckpt` checkpoints, `final.ckpt` and the training log to `paths.out`. With
`--checkpoint` the model, optimizer state, step counter and sampler state resume from that
checkpoint. An aborted run leaves `last_good.ckpt` to resume from.

Usage:
    bendr pretrain --config run.toml [--checkpoint runs/step_000500.ckpt]
"""

from bendr.app.config import RunConfig
from bendr.app.core.logger import get_logger
from bendr.app.core.model import BendrModel
from bendr.app.core.pretrain import PretrainResult, pretrain_loop
from bendr.commands.common import load_checkpoint_arg, load_manifest_sequences, out_dir


logger = get_logger("pretrain")


def main(config: RunConfig) -> PretrainResult:
    cfg = config.pretrain
    manifest, sequences = load_manifest_sequences(config)
    samples = int(round(cfg.sequence_s * manifest.target_rate))
    data = [s.data[:, :samples] for s in sequences]

    checkpoint = load_checkpoint_arg(config, required=False)
    if checkpoint is not None:
        model = checkpoint.build_model()
        adam = checkpoint.adam_state(weight_decay=cfg.weight_decay)
        start_step = checkpoint.step
        sampler_state = checkpoint.extra.get("sampler")
        logger.info(f"Resuming pretraining at step {start_step}")
    else:
        model = BendrModel(config.model, seed=config.seed)
        adam, start_step, sampler_state = None, 0, None

    root = out_dir(config)
    result = pretrain_loop(model, data, config, out_dir=root, adam=adam, start_step=start_step,
                           sampler_state=sampler_state)
    logger.info(f"Pretraining finished; final checkpoint '{result.checkpoint_path}'")
    return result
