"""Sine-wave probing toolkit for convolutional speech feature encoders."""

__version__ = "0.1.0"

from .encoder import Representation, conv1d, encode, gelu, normalize
from .errors import SineprobeError
from .experiments import ExperimentConfig, run_experiment
from .metrics import (
    DistanceMatrix,
    FrequencyScale,
    bark_scale,
    build_encoder_scale,
    consistency_matrix,
    cosine_distance,
    cosine_similarity,
    linear_cka,
    mds_2d,
    mel_scale,
    ordering_stats,
    pairwise_cosine_distance,
    spectrogram_features,
    time_average,
)
from .signals import (
    BurstSpec,
    SignalSpec,
    SineComponent,
    Waveform,
    burst_overlap_steps,
    quantize_pcm16,
    synth,
    tone,
)
from .weightfile import EncoderModel, LayerConfig, derive_window_stride, load_model, save_model

__all__ = [
    "__version__",
    "BurstSpec",
    "DistanceMatrix",
    "EncoderModel",
    "ExperimentConfig",
    "FrequencyScale",
    "LayerConfig",
    "Representation",
    "SignalSpec",
    "SineComponent",
    "SineprobeError",
    "Waveform",
    "bark_scale",
    "build_encoder_scale",
    "burst_overlap_steps",
    "consistency_matrix",
    "conv1d",
    "cosine_distance",
    "cosine_similarity",
    "derive_window_stride",
    "encode",
    "gelu",
    "linear_cka",
    "load_model",
    "mds_2d",
    "mel_scale",
    "normalize",
    "ordering_stats",
    "pairwise_cosine_distance",
    "quantize_pcm16",
    "run_experiment",
    "save_model",
    "spectrogram_features",
    "synth",
    "time_average",
    "tone",
]
