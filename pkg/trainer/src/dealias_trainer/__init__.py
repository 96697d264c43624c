"""Standalone trainer for the compact spectral-mask U-Net.

Consumes scene corpora (JSON-lines manifest plus WAV files), trains mask
predictors with a power-compressed amplitude + phasor loss, and exports
weight bundles and parity fixtures in the shared binary container format.
"""

from .dalw import Bundle, architecture_shapes, load_bundle, mask_channels, save_bundle
from .errors import ConfigError, DataError, DivergenceError, TrainerError
from .fixture import export_parity_fixture, reference_forward, verify_fixture
from .frontend import pack_features, preprocess_record, virtual_mics
from .model import MaskUNet, bundle_to_model, init_model, model_to_bundle
from .presets import encoder_matrix, preset
from .train import TrainResult, default_hyperparams, train

__all__ = [
    "Bundle",
    "ConfigError",
    "DataError",
    "DivergenceError",
    "MaskUNet",
    "TrainResult",
    "TrainerError",
    "architecture_shapes",
    "bundle_to_model",
    "default_hyperparams",
    "encoder_matrix",
    "export_parity_fixture",
    "init_model",
    "load_bundle",
    "mask_channels",
    "model_to_bundle",
    "pack_features",
    "preprocess_record",
    "preset",
    "reference_forward",
    "save_bundle",
    "train",
    "verify_fixture",
    "virtual_mics",
]
