"""
Descriptors of the downstream dataset battery and their fine-tuning presets.

Values reproduce the published dataset summary, per-dataset trial windows and metrics,
and the per-dataset fine-tuning hyperparameters. Loaders accept any EDF-like data; the
descriptors only fix how a dataset is windowed, split, trained and scored.
"""

from typing import Dict, Literal, Tuple

from pydantic import BaseModel, ConfigDict


Metric = Literal["BAC", "AUROC", "accuracy"]


class DatasetDescriptor(BaseModel):
    """
    Static description of a downstream dataset.

    Attributes:
        name (str): Short dataset name.
        paradigm (str): Experimental paradigm.
        native_rate (float): Native sampling rate in Hz.
        channels (int): Number of recorded channels.
        subjects (int): Number of cross-validated subjects.
        held_out_subjects (int): Additional test-only subjects evaluated in every fold.
        targets (int): Number of classes.
        folds (int): Cross-validation folds (LOSO when equal to `subjects`).
        trial_window (Tuple[float, float]): (start s relative to the event, length s).
        metric (Metric): Reported metric.
        batch_size (int): Fine-tuning batch size.
        epochs (int): Fine-tuning epochs.
        peak_lr (float): Fine-tuning peak learning rate.
    """

    model_config = ConfigDict(frozen=True)

    name: str
    paradigm: str
    native_rate: float
    channels: int
    subjects: int
    held_out_subjects: int = 0
    targets: int
    folds: int
    trial_window: Tuple[float, float]
    metric: Metric
    batch_size: int
    epochs: int
    peak_lr: float

    @property
    def scheme(self) -> str:
        """ "LOSO" when every fold holds out one subject, else "grouped". """
        return "LOSO" if self.folds == self.subjects else "grouped"


DATASETS: Dict[str, DatasetDescriptor] = {
    "MMI": DatasetDescriptor(name="MMI", paradigm="MI (L/R)", native_rate=160, channels=64, subjects=105,
                             targets=2, folds=5, trial_window=(0.0, 6.0), metric="BAC",
                             batch_size=4, epochs=7, peak_lr=1e-5),
    "BCIC": DatasetDescriptor(name="BCIC", paradigm="MI (L/R/F/T)", native_rate=250, channels=22, subjects=9,
                              targets=4, folds=9, trial_window=(-2.0, 6.0), metric="accuracy",
                              batch_size=60, epochs=15, peak_lr=5e-5),
    "ERN": DatasetDescriptor(name="ERN", paradigm="Error Related Negativity", native_rate=200, channels=56,
                             subjects=16, held_out_subjects=10, targets=2, folds=4, trial_window=(-0.7, 2.0),
                             metric="AUROC", batch_size=32, epochs=15, peak_lr=1e-5),
    "P300": DatasetDescriptor(name="P300", paradigm="Donchin Speller", native_rate=2048, channels=64, subjects=9,
                              targets=2, folds=9, trial_window=(-0.7, 2.0), metric="AUROC",
                              batch_size=80, epochs=20, peak_lr=1e-5),
    "SSC": DatasetDescriptor(name="SSC", paradigm="Sleep Staging", native_rate=100, channels=2, subjects=83,
                             targets=5, folds=10, trial_window=(0.0, 30.0), metric="BAC",
                             batch_size=64, epochs=40, peak_lr=5e-5),
}


def get_dataset(name: str) -> DatasetDescriptor:
    """
    Look up a bundled dataset descriptor by (case-insensitive) name.

    Raises:
        KeyError: If the dataset is unknown.
    """
    for key, descriptor in DATASETS.items():
        if key.lower() == name.lower():
            return descriptor
    raise KeyError(f"Unknown dataset '{name}'; known datasets: {sorted(DATASETS)}")
