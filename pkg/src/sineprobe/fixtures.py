"""Random-weight desk-scale models for tests, benchmarks and demos.

The canonical 7-layer geometry (kernels 10,3,3,3,3,2,2 / strides 5,2,2,2,2,2,2)
reproduces the real encoders' 400-sample window and 320-sample stride while the
channel width stays small enough for fast runs.
"""

from __future__ import annotations

import numpy as np

from .weightfile import DEFAULT_EPSILON, EncoderModel, LayerConfig

BASE_KERNELS = (10, 3, 3, 3, 3, 2, 2)
BASE_STRIDES = (5, 2, 2, 2, 2, 2, 2)


def standard_layers(channels: int = 16, norm: str = "layer_over_channels",
                    has_bias: bool = True) -> tuple[LayerConfig, ...]:
    """The 7-layer stack at a configurable width.

    ``norm="group_per_channel"`` mimics the Base-style stack: group norm on
    layer 0 only, no conv bias anywhere.  ``norm="layer_over_channels"`` puts
    layer norm on every layer, as the bigger models do.
    """
    layers = []
    in_channels = 1
    for i, (kernel, stride) in enumerate(zip(BASE_KERNELS, BASE_STRIDES)):
        if norm == "group_per_channel":
            layer_norm = "group_per_channel" if i == 0 else "none"
            layer_bias = False
        else:
            layer_norm = norm
            layer_bias = has_bias
        layers.append(
            LayerConfig(
                in_channels=in_channels,
                out_channels=channels,
                kernel=kernel,
                stride=stride,
                has_bias=layer_bias,
                norm=layer_norm,
            )
        )
        in_channels = channels
    return tuple(layers)


def make_random_model(layers: tuple[LayerConfig, ...], *, seed: int = 0,
                      name: str = "fixture", input_normalize: bool = True,
                      epsilon: float = DEFAULT_EPSILON) -> EncoderModel:
    """He-scaled random conv weights; norm affines near identity but not exact."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for i, layer in enumerate(layers):
        fan_in = layer.in_channels * layer.kernel
        shape = (layer.out_channels, layer.in_channels, layer.kernel)
        tensors[f"conv.{i}.weight"] = rng.normal(0.0, np.sqrt(2.0 / fan_in), shape).astype(np.float32)
        if layer.has_bias:
            tensors[f"conv.{i}.bias"] = rng.normal(0.0, 0.05, layer.out_channels).astype(np.float32)
        if layer.norm != "none":
            tensors[f"norm.{i}.weight"] = rng.uniform(0.7, 1.3, layer.out_channels).astype(np.float32)
            tensors[f"norm.{i}.bias"] = rng.normal(0.0, 0.2, layer.out_channels).astype(np.float32)
    return EncoderModel(
        name=name,
        input_normalize=input_normalize,
        epsilon=epsilon,
        layers=layers,
        tensors=tensors,
    )


def layer_norm_fixture(channels: int = 16, seed: int = 0) -> EncoderModel:
    """Layer-norm-everywhere fixture with input z-normalization (Large-style)."""
    return make_random_model(
        standard_layers(channels, "layer_over_channels"),
        seed=seed,
        name=f"fixture-layernorm-{channels}",
        input_normalize=True,
    )


def group_norm_fixture(channels: int = 16, seed: int = 1) -> EncoderModel:
    """Group-norm-on-layer-0 fixture without input normalization (Base-style)."""
    return make_random_model(
        standard_layers(channels, "group_per_channel"),
        seed=seed,
        name=f"fixture-groupnorm-{channels}",
        input_normalize=False,
    )
