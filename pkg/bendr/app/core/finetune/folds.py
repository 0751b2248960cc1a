"""
Subject-grouped cross-validation and the metrics report.

Folds never share a subject between training and test. With as many folds as subjects
every fold holds out one subject; otherwise subjects are grouped into k folds. Subjects
listed as held out never train and are tested by every fold. Each fold trains a fresh
classifier and keeps its final-epoch parameters; given an output directory, every fold
saves its classifier (head included) and optimizer state to `fold_<k>.ckpt`.
"""

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.model_selection import GroupKFold, LeaveOneGroupOut

from bendr.app.config import ModelConfig, RunConfig
from bendr.app.core.finetune.classifiers import build_variant
from bendr.app.core.finetune.metrics import bootstrap_ci, compute_metric, normalize_metric
from bendr.app.core.finetune.training import TrainingPlan, predict_probabilities, train_classifier
from bendr.app.core.ingest.datasets import DatasetDescriptor, get_dataset
from bendr.app.core.logger import get_logger
from bendr.app.core.model import Checkpoint, save_checkpoint
from bendr.app.core.preprocess.scaling import StandardizedSequence
from bendr.app.core.tensor import AdamState


logger = get_logger(__name__)

REPORT_HEADER = ["fold", "subject", "metric", "value", "normalized", "ci_low", "ci_high"]
SELECTION_RULE = "final-epoch model"


@dataclass
class LabelledTrials:
    """
    Trials with integer labels and subject ids.

    Attributes:
        data (List[np.ndarray]): 20 x W standardized trials.
        labels (np.ndarray): Class index of every trial.
        subjects (np.ndarray): Subject id of every trial.
        classes (List[str]): Class names; index i names label i.
    """

    data: List[np.ndarray]
    labels: np.ndarray
    subjects: np.ndarray
    classes: List[str]

    @classmethod
    def from_sequences(cls, sequences: Sequence[StandardizedSequence],
                       classes: Optional[Sequence[str]] = None) -> "LabelledTrials":
        """ Collect labelled sequences; classes default to the sorted distinct labels. """
        if not sequences:
            raise ValueError("No labelled trials to fine-tune on")
        if any(s.label is None for s in sequences):
            raise ValueError("Every fine-tuning sequence needs a class label")
        classes = list(classes) if classes is not None else sorted({s.label for s in sequences})
        index = {name: i for i, name in enumerate(classes)}
        unknown = sorted({s.label for s in sequences} - set(index))
        if unknown:
            raise ValueError(f"Labels {unknown} are not among the classes {classes}")
        return cls(data=[s.data for s in sequences],
                   labels=np.array([index[s.label] for s in sequences], dtype=np.int64),
                   subjects=np.array([s.subject for s in sequences]),
                   classes=classes)

    def __len__(self) -> int:
        return len(self.data)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def select(self, indices) -> "LabelledTrials":
        indices = np.asarray(indices, dtype=np.int64)
        return LabelledTrials(data=[self.data[i] for i in indices], labels=self.labels[indices],
                              subjects=self.subjects[indices], classes=self.classes)


def fold_splits(subjects, folds: int) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """
    Subject-grouped (train, test) index pairs.

    Raises:
        ValueError: If there are fewer subjects than folds, or a split shares a subject.
    """
    subjects = np.asarray(subjects)
    n_subjects = len(np.unique(subjects))
    if n_subjects < folds:
        raise ValueError(f"{n_subjects} subjects cannot fill {folds} folds")
    splitter = LeaveOneGroupOut() if folds == n_subjects else GroupKFold(n_splits=folds)
    placeholder = np.zeros(len(subjects))
    for train, test in splitter.split(placeholder, groups=subjects):
        shared = set(subjects[train]) & set(subjects[test])
        if shared:
            raise ValueError(f"Subjects {sorted(shared)} appear in both train and test partitions")
        yield train, test


@dataclass
class ReportRow:
    """ One line of the metrics report. """

    fold: str
    subject: str
    metric: str
    value: float
    normalized: float
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None

    def cells(self) -> List[str]:
        def fmt(v):
            return "" if v is None else f"{v:.6f}"
        return [self.fold, self.subject, self.metric, fmt(self.value), fmt(self.normalized), fmt(self.ci_low),
                fmt(self.ci_high)]


@dataclass
class MetricsReport:
    """
    Per-fold, per-subject test metrics and their summary.

    Attributes:
        dataset (str): Dataset name.
        variant (int): Fine-tuning variant.
        metric (str): BAC, AUROC or accuracy.
        num_classes (int): Nominal class count used for chance normalization.
        rows (List[ReportRow]): One row per fold and tested subject.
        summary (Optional[ReportRow]): Mean over subject means, with the bootstrap interval.
    """

    dataset: str
    variant: int
    metric: str
    num_classes: int
    rows: List[ReportRow] = field(default_factory=list)
    summary: Optional[ReportRow] = None

    def subject_means(self) -> Dict[str, float]:
        """ Mean raw metric of every subject over the folds that tested it. """
        values: Dict[str, List[float]] = {}
        for row in self.rows:
            values.setdefault(row.subject, []).append(row.value)
        return {subject: float(np.mean(v)) for subject, v in values.items()}

    def summarize(self, resamples: int = 1000, confidence_level: float = 0.95, seed: int = 0) -> ReportRow:
        means = self.subject_means()
        if not means:
            raise ValueError("The report has no subject rows to summarize")
        values = np.array(list(means.values()))
        low, high = bootstrap_ci(values, resamples=resamples, confidence_level=confidence_level, seed=seed)
        normalized = np.mean([normalize_metric(v, self.metric, self.num_classes) for v in values])
        self.summary = ReportRow(fold="summary", subject="all", metric=self.metric, value=float(values.mean()),
                                 normalized=float(normalized), ci_low=low, ci_high=high)
        return self.summary

    def to_tsv(self) -> str:
        buffer = io.StringIO()
        buffer.write(f"# dataset: {self.dataset}\tvariant: {self.variant}\tclasses: {self.num_classes}\n")
        buffer.write(f"# selection: {SELECTION_RULE}\n")
        writer = csv.writer(buffer, delimiter="\t", lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for row in self.rows:
            writer.writerow(row.cells())
        if self.summary is not None:
            writer.writerow(self.summary.cells())
        return buffer.getvalue()

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_tsv(), encoding="utf-8")
        return path


def _score_subjects(report: MetricsReport, fold: int, trials: LabelledTrials, probabilities: np.ndarray) -> None:
    for subject in sorted(set(trials.subjects.tolist())):
        rows = trials.subjects == subject
        try:
            value = compute_metric(report.metric, trials.labels[rows], probabilities[rows])
        except ValueError as err:
            logger.warning(f"Fold {fold}: subject {subject} not scored ({err})")
            continue
        report.rows.append(ReportRow(fold=str(fold), subject=str(subject), metric=report.metric, value=value,
                                     normalized=normalize_metric(value, report.metric, report.num_classes)))


def run_folds(trials: LabelledTrials, config: RunConfig, checkpoint: Optional[Checkpoint] = None,
              model_config: Optional[ModelConfig] = None,
              descriptor: Optional[DatasetDescriptor] = None,
              out_dir: Optional[Union[str, Path]] = None) -> MetricsReport:
    """
    Cross-validate one fine-tuning variant.

    Args:
        trials (LabelledTrials): All labelled trials, held-out subjects included.
        config (RunConfig): Run configuration (finetune section and seed are used).
        checkpoint (Optional[Checkpoint]): Pretrained model for variants 1, 2, 4 and 6.
        model_config (Optional[ModelConfig]): Architecture of randomly initialized variants.
        descriptor (Optional[DatasetDescriptor]): Dataset preset; looked up by name when None.
        out_dir (Optional[Union[str, Path]]): Directory for the `fold_<k>.ckpt` checkpoints;
            nothing is saved when None.

    Returns:
        MetricsReport: Per-subject rows and the summary row.

    Raises:
        ValueError: If there are fewer cross-validated subjects than folds.
        CheckpointError: If a pretrained variant gets no checkpoint.
    """
    cfg = config.finetune
    descriptor = descriptor or get_dataset(cfg.dataset)
    plan = TrainingPlan.resolve(cfg, descriptor)
    folds = cfg.folds or descriptor.folds

    held_out = np.isin(trials.subjects, list(cfg.held_out_subjects))
    pool = trials.select(np.flatnonzero(~held_out))
    held_out_trials = trials.select(np.flatnonzero(held_out)) if held_out.any() else None

    report = MetricsReport(dataset=descriptor.name, variant=cfg.variant, metric=descriptor.metric,
                           num_classes=trials.num_classes)
    for fold, (train, test) in enumerate(fold_splits(pool.subjects, folds)):
        train_trials, test_trials = pool.select(train), pool.select(test)
        logger.info(f"Fold {fold + 1}/{folds}: {len(train_trials)} train trials, {len(test_trials)} test trials, "
                    f"test subjects {sorted(set(test_trials.subjects.tolist()))}")
        model = build_variant(cfg.variant, trials.num_classes, checkpoint=checkpoint, model_config=model_config,
                              seed=config.seed + fold)
        rng = np.random.default_rng([config.seed, fold])
        adam = AdamState.for_parameters(list(model.trainable_parameters()), weight_decay=cfg.weight_decay)
        train_classifier(model, train_trials.data, train_trials.labels, cfg, plan, trials.num_classes, rng, adam=adam)
        if out_dir is not None:
            extra = {"variant": cfg.variant, "targets": trials.num_classes, "classes": trials.classes, "fold": fold,
                     "test_subjects": sorted(str(s) for s in set(test_trials.subjects.tolist()))}
            save_checkpoint(Path(out_dir) / f"fold_{fold}.ckpt", model, config, step=adam.step, adam=adam,
                            model_config=model.config, extra=extra)

        _score_subjects(report, fold, test_trials, predict_probabilities(model, test_trials.data, plan.batch_size))
        if held_out_trials is not None:
            _score_subjects(report, fold, held_out_trials,
                            predict_probabilities(model, held_out_trials.data, plan.batch_size))

    summary = report.summarize(cfg.bootstrap_resamples, cfg.confidence_level, seed=config.seed)
    logger.info(f"{descriptor.name} variant {cfg.variant}: {report.metric} {summary.value:.4f} "
                f"(normalized {summary.normalized:.4f}, CI [{summary.ci_low:.4f}, {summary.ci_high:.4f}])")
    return report
