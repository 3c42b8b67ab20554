"""Python bindings for the sthyper forecaster.

Arrays are float64 with variables on the first axis and time on the second.
Configurations are passed as dicts with ModelConfig field names.
"""

import json

import torch  # noqa: F401  loads libtorch before the extension

from . import _sthyper
from ._sthyper import Error, dtw_affinity, dtw_distance, generate_synthetic, set_num_threads

__all__ = [
    "Error",
    "default_config",
    "dtw_affinity",
    "dtw_distance",
    "evaluate",
    "export_structures",
    "generate_synthetic",
    "metrics",
    "predict",
    "set_num_threads",
    "train",
    "validate_config",
]


def default_config():
    return json.loads(_sthyper.default_config())


def validate_config(config, n_vars):
    """Raises Error for invalid configs; returns the list of warnings."""
    return _sthyper.validate_config(json.dumps(config), n_vars)


def train(config, values, checkpoint_dir, max_steps=-1):
    """Trains on values and writes the best checkpoint to checkpoint_dir."""
    return _sthyper.train(json.dumps(config), values, str(checkpoint_dir), max_steps)


def evaluate(checkpoint_dir, values, split="test"):
    return _sthyper.evaluate(str(checkpoint_dir), values, split)


def predict(checkpoint_dir, window):
    return _sthyper.predict(str(checkpoint_dir), window)


def export_structures(checkpoint_dir, out_dir):
    return _sthyper.export_structures(str(checkpoint_dir), str(out_dir))


def metrics(prediction, target):
    return _sthyper.compute_metrics(prediction, target)
