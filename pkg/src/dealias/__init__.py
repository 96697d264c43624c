"""Desk-scale laboratory for spatial-aliasing reduction in beamformed capture."""

from .core import (
    SPEED_OF_SOUND,
    ArrayGeometry,
    Direction,
    MonoSignal,
    MultichannelSignal,
    Spectrogram,
    aliasing_frequency,
    cross_array,
    direction_from_azimuth,
)
from .errors import (
    CorruptWeightsError,
    DataFormatError,
    DealiasError,
    InvalidArgumentError,
    NotAWeightFileError,
    NumericError,
    UndefinedMetricError,
    UnsupportedConfigurationError,
)
from .experiments import Pipeline, PipelineConfig, preset, run_experiment
from .metrics import band_partition, c_si_snr, pattern_deviation_db, phasen_loss, spatial_sweep
from .nnmask import WeightBundle, load_weights, save_weights
from .simulate import SceneConfig, SourceScene, generate_dataset, load_manifest, sample_scene
from .stft import stft_forward, stft_inverse

__version__ = "0.1.0"
