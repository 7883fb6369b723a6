"""Forward pass for stacked strided-conv feature encoders.

Per layer: conv1d (no padding) -> optional normalization -> exact GELU.
Checkpoints store float32 tensors; activations stay float32 with float64
accumulation inside the kernels.  ``encode`` is a pure function of
``(model, waveform)``: repeated calls are bitwise identical and a loaded
model may be shared across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from . import kernels
from .errors import InputTooShort, NonFiniteActivation, SampleRateMismatch, ShapeMismatch
from .signals import SignalSpec, Waveform
from .weightfile import EncoderModel

EXPECTED_SAMPLE_RATE = 16000
SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class Representation:
    """T x D encoder output with step/window provenance."""

    matrix: np.ndarray
    window: int
    stride: int
    source: SignalSpec | None = None

    @property
    def timesteps(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def output_length(input_length: int, window: int, stride: int) -> int:
    """Length law: T = floor((L - window) / stride) + 1."""
    if input_length < window:
        raise InputTooShort(f"need at least {window} samples, got {input_length}")
    return (input_length - window) // stride + 1


def conv1d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None = None,
           stride: int = 1) -> np.ndarray:
    """Valid (un-padded) strided convolution.

    ``out[o, t] = bias[o] + sum_{i,k} weight[o, i, k] * x[i, t*stride + k]``.
    Output dtype follows the inputs; accumulation runs in float64.
    """
    x = np.asarray(x)
    weight = np.asarray(weight)
    if x.ndim != 2 or weight.ndim != 3:
        raise ShapeMismatch(f"conv1d wants (C_in, L) and (C_out, C_in, K), got {x.shape} and {weight.shape}")
    if x.shape[0] != weight.shape[1]:
        raise ShapeMismatch(f"input has {x.shape[0]} channels, weight expects {weight.shape[1]}")
    if x.shape[1] < weight.shape[2]:
        raise InputTooShort(f"input length {x.shape[1]} shorter than kernel {weight.shape[2]}")
    if stride < 1:
        raise ShapeMismatch(f"stride must be >= 1, got {stride}")
    out_dtype = np.result_type(x.dtype, weight.dtype)
    # attribute lookup keeps the backend swappable (benchmarks, fallback tests)
    out = kernels.conv1d_core(x.astype(np.float64, copy=False),
                              weight.astype(np.float64, copy=False), stride)
    if bias is not None:
        bias = np.asarray(bias)
        if bias.shape != (weight.shape[0],):
            raise ShapeMismatch(f"bias shape {bias.shape} does not match {weight.shape[0]} channels")
        out = out + bias.astype(np.float64)[:, None]
    return out.astype(out_dtype, copy=False)


def normalize(x: np.ndarray, mode: str, scale: np.ndarray | None = None,
              shift: np.ndarray | None = None, epsilon: float = 1e-5) -> np.ndarray:
    """Standardize a (C, L) activation map, then apply the per-channel affine.

    ``group_per_channel``: each channel over its time axis (GroupNorm with one
    group per channel).  ``layer_over_channels``: each time step over the
    channel axis.  ``none``: identity.  Variance is the biased estimator and
    ``epsilon`` guards the zero-variance case.
    """
    x = np.asarray(x)
    if mode == "none":
        return x
    work = x.astype(np.float64, copy=False)
    if mode == "group_per_channel":
        mean = work.mean(axis=1, keepdims=True)
        var = work.var(axis=1, keepdims=True)
    elif mode == "layer_over_channels":
        mean = work.mean(axis=0, keepdims=True)
        var = work.var(axis=0, keepdims=True)
    else:
        raise ShapeMismatch(f"unknown normalization mode {mode!r}")
    normed = (work - mean) / np.sqrt(var + epsilon)
    if scale is not None:
        normed = normed * np.asarray(scale, dtype=np.float64)[:, None]
    if shift is not None:
        normed = normed + np.asarray(shift, dtype=np.float64)[:, None]
    return normed.astype(x.dtype, copy=False)


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact GELU, 0.5*x*(1 + erf(x/sqrt(2))); not the tanh approximation."""
    x = np.asarray(x)
    work = x.astype(np.float64, copy=False)
    return (0.5 * work * (1.0 + erf(work / SQRT2))).astype(x.dtype, copy=False)


def znormalize(samples: np.ndarray, epsilon: float = 1e-5) -> np.ndarray:
    """Zero-mean unit-variance normalization of the raw waveform."""
    samples = np.asarray(samples, dtype=np.float64)
    return (samples - samples.mean()) / np.sqrt(samples.var() + epsilon)


def encode(model: EncoderModel, wave: Waveform,
           source: SignalSpec | None = None) -> Representation:
    """Run the full stack on one waveform; returns the T x D representation."""
    if wave.sample_rate != EXPECTED_SAMPLE_RATE:
        raise SampleRateMismatch(
            f"encoder expects {EXPECTED_SAMPLE_RATE} Hz input, got {wave.sample_rate} Hz"
        )
    if model.layers[0].in_channels != 1:
        raise ShapeMismatch(
            f"layer 0 expects {model.layers[0].in_channels} input channels, waveforms have 1"
        )
    length = wave.samples.shape[0]
    if length < model.window:
        raise InputTooShort(f"need at least {model.window} samples, got {length}")

    samples = np.asarray(wave.samples, dtype=np.float64)
    if model.input_normalize:
        samples = znormalize(samples, model.epsilon)
    current = samples.astype(np.float32)[None, :]
    for i, layer in enumerate(model.layers):
        weight = model.tensors[f"conv.{i}.weight"]
        bias = model.tensors.get(f"conv.{i}.bias") if layer.has_bias else None
        current = conv1d(current, weight, bias, layer.stride)
        if layer.norm != "none":
            current = normalize(
                current,
                layer.norm,
                model.tensors[f"norm.{i}.weight"],
                model.tensors[f"norm.{i}.bias"],
                model.epsilon,
            )
        current = gelu(current)
    matrix = np.ascontiguousarray(current.T)
    if not np.all(np.isfinite(matrix)):
        raise NonFiniteActivation(f"model {model.name!r} produced non-finite outputs")
    return Representation(matrix=matrix, window=model.window, stride=model.stride, source=source)
