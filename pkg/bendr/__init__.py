"""
BENDR toolkit: self-supervised pretraining and downstream fine-tuning on raw EEG.
"""

__version__ = "0.1.0"
