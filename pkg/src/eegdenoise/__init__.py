"""Convolutional removal of muscle (EMG) artifacts from single-channel EEG epochs."""

from .estimator import EEGDenoiser
from .exceptions import (ConfigError, DegenerateSignalError, EEGDenoiseError, FormatError, LengthError,
                         NumericError, ShapeError, TapeError)
from .models import ModelGraph, LayerSpec, build_fcnn_baseline, build_novel_cnn, init_params
from .checkpoint import load_checkpoint, save_checkpoint
from .training import TrainConfig, LossCurve, train, denoise

__version__ = "0.1.0"

__all__ = [
    "EEGDenoiser", "ModelGraph", "LayerSpec", "build_novel_cnn", "build_fcnn_baseline", "init_params",
    "load_checkpoint", "save_checkpoint", "TrainConfig", "LossCurve", "train", "denoise",
    "EEGDenoiseError", "ShapeError", "LengthError", "DegenerateSignalError", "TapeError", "NumericError",
    "FormatError", "ConfigError",
]
