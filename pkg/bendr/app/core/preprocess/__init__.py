"""
Preprocessing: channel mapping, resampling, filtering, scaling and dataset manifests.
"""

from bendr.app.core.preprocess.channels import MISSING, TARGET_CHANNELS, ChannelMap, map_channels, map_labels, normalize_label
from bendr.app.core.preprocess.signal import TARGET_RATE, integer_factor, lowpass, lowpass_taps, resample
from bendr.app.core.preprocess.scaling import StandardizedSequence, scale_array, scale_sequence
from bendr.app.core.preprocess.manifest import DatasetManifest, ManifestSession
from bendr.app.core.preprocess.pipeline import (
    PreparedSession, compute_dataset_range, prepare_session, standardize_session, standardize_trials,
)

__all__ = [
    "MISSING", "TARGET_CHANNELS", "ChannelMap", "map_channels", "map_labels", "normalize_label",
    "TARGET_RATE", "integer_factor", "lowpass", "lowpass_taps", "resample",
    "StandardizedSequence", "scale_array", "scale_sequence",
    "DatasetManifest", "ManifestSession",
    "PreparedSession", "compute_dataset_range", "prepare_session", "standardize_session", "standardize_trials",
]
