"""Portable "W2VFE" container for feature-encoder weights.

Byte layout (bit-exact):

* bytes 0-7: ASCII magic ``W2VFE001`` (5-byte family tag + 3-digit version),
* bytes 8-11: unsigned 32-bit little-endian header length ``H``,
* bytes 12..12+H-1: UTF-8 JSON header with ``model_name``,
  ``input_normalize``, ``epsilon``, ``layers`` and ``tensors`` entries,
* data section immediately after the header; each tensor stored at its
  declared byte offset (relative to the data-section start) as little-endian
  float32 in row-major order.

Tensor naming: ``conv.{i}.weight`` ([out, in, kernel]), ``conv.{i}.bias``
([out]), ``norm.{i}.weight`` / ``norm.{i}.bias`` ([out]).
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    BadMagic,
    MalformedHeader,
    ShapeMismatch,
    TruncatedData,
    UnsupportedVersion,
)

MAGIC_FAMILY = b"W2VFE"
MAGIC = b"W2VFE001"
NORM_MODES = ("group_per_channel", "layer_over_channels", "none")
DEFAULT_EPSILON = 1e-5


@dataclass(frozen=True)
class LayerConfig:
    in_channels: int
    out_channels: int
    kernel: int
    stride: int
    has_bias: bool
    norm: str

    def validate(self, index: int) -> None:
        for fieldname in ("in_channels", "out_channels", "kernel", "stride"):
            value = getattr(self, fieldname)
            if not isinstance(value, int) or value < 1:
                raise MalformedHeader(f"layers[{index}].{fieldname} must be a positive integer")
        if self.norm not in NORM_MODES:
            raise MalformedHeader(f"layers[{index}].norm must be one of {NORM_MODES}")


def derive_window_stride(layers: tuple[LayerConfig, ...]) -> tuple[int, int]:
    """Effective receptive field and hop of the composed stack, in samples."""
    window = 1
    for layer in reversed(layers):
        window = (window - 1) * layer.stride + layer.kernel
    stride = 1
    for layer in layers:
        stride *= layer.stride
    return window, stride


def expected_tensors(layers: tuple[LayerConfig, ...]) -> dict[str, tuple[int, ...]]:
    """Tensor name -> shape demanded by the layer configuration."""
    shapes: dict[str, tuple[int, ...]] = {}
    for i, layer in enumerate(layers):
        shapes[f"conv.{i}.weight"] = (layer.out_channels, layer.in_channels, layer.kernel)
        if layer.has_bias:
            shapes[f"conv.{i}.bias"] = (layer.out_channels,)
        if layer.norm != "none":
            shapes[f"norm.{i}.weight"] = (layer.out_channels,)
            shapes[f"norm.{i}.bias"] = (layer.out_channels,)
    return shapes


@dataclass(frozen=True)
class EncoderModel:
    """Parsed feature-encoder weights plus layer configuration."""

    name: str
    input_normalize: bool
    epsilon: float
    layers: tuple[LayerConfig, ...]
    tensors: dict[str, np.ndarray]

    @cached_property
    def window(self) -> int:
        return derive_window_stride(self.layers)[0]

    @cached_property
    def stride(self) -> int:
        return derive_window_stride(self.layers)[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_channels

    def tensor_checksums(self) -> dict[str, str]:
        """SHA-256 of each tensor's on-disk little-endian float32 bytes."""
        return {
            name: hashlib.sha256(np.ascontiguousarray(arr, dtype="<f4").tobytes()).hexdigest()
            for name, arr in sorted(self.tensors.items())
        }

    def header_dict(self) -> dict:
        """Canonical JSON header (tensors packed contiguously in sorted order)."""
        tensors = []
        offset = 0
        for name in sorted(self.tensors):
            arr = self.tensors[name]
            tensors.append(
                {"name": name, "shape": list(arr.shape), "dtype": "f32", "offset": offset}
            )
            offset += arr.size * 4
        return {
            "model_name": self.name,
            "input_normalize": self.input_normalize,
            "epsilon": self.epsilon,
            "layers": [
                {
                    "in_channels": layer.in_channels,
                    "out_channels": layer.out_channels,
                    "kernel": layer.kernel,
                    "stride": layer.stride,
                    "has_bias": layer.has_bias,
                    "norm": layer.norm,
                }
                for layer in self.layers
            ],
            "tensors": tensors,
        }


def _check_model(layers: tuple[LayerConfig, ...], tensors: dict[str, np.ndarray]) -> None:
    for i in range(len(layers) - 1):
        if layers[i].out_channels != layers[i + 1].in_channels:
            raise ShapeMismatch(
                f"layers[{i}].out_channels={layers[i].out_channels} does not feed "
                f"layers[{i + 1}].in_channels={layers[i + 1].in_channels}"
            )
    for name, shape in expected_tensors(layers).items():
        if name not in tensors:
            raise MalformedHeader(f"tensor {name} required by layer config but not declared")
        actual = tuple(tensors[name].shape)
        if actual != shape:
            raise ShapeMismatch(f"tensor {name}: declared shape {actual}, layer config needs {shape}")


def load_model(path: str) -> EncoderModel:
    """Parse a W2VFE file, rejecting wrong magic, truncation and shape drift."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8 or blob[:5] != MAGIC_FAMILY:
        raise BadMagic(f"{path}: expected magic {MAGIC!r}, got {blob[:8]!r}")
    if blob[:8] != MAGIC:
        raise UnsupportedVersion(f"{path}: format version {blob[5:8]!r} not supported")
    if len(blob) < 12:
        raise TruncatedData(f"{path}: missing header length field")
    (header_len,) = struct.unpack_from("<I", blob, 8)
    if len(blob) < 12 + header_len:
        raise TruncatedData(
            f"{path}: header declares {header_len} bytes, file holds {len(blob) - 12}"
        )
    try:
        header = json.loads(blob[12:12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedHeader(f"{path}: header is not valid UTF-8 JSON ({exc})") from exc

    for fieldname in ("model_name", "input_normalize", "epsilon", "layers", "tensors"):
        if fieldname not in header:
            raise MalformedHeader(f"{path}: header field {fieldname} missing")

    layers = []
    for i, entry in enumerate(header["layers"]):
        try:
            layer = LayerConfig(
                in_channels=int(entry["in_channels"]),
                out_channels=int(entry["out_channels"]),
                kernel=int(entry["kernel"]),
                stride=int(entry["stride"]),
                has_bias=bool(entry["has_bias"]),
                norm=str(entry["norm"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedHeader(f"layers[{i}]: {exc}") from exc
        layer.validate(i)
        layers.append(layer)
    if not layers:
        raise MalformedHeader(f"{path}: layer list is empty")

    data = blob[12 + header_len:]
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        try:
            name = str(entry["name"])
            shape = tuple(int(d) for d in entry["shape"])
            dtype = str(entry["dtype"])
            offset = int(entry["offset"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedHeader(f"tensor entry {entry!r}: {exc}") from exc
        if dtype != "f32":
            raise MalformedHeader(f"tensor {name}: dtype {dtype!r} unsupported (only f32)")
        if offset < 0 or any(d < 0 for d in shape):
            raise MalformedHeader(f"tensor {name}: negative offset or dimension")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        end = offset + count * 4
        if end > len(data):
            raise TruncatedData(
                f"tensor {name}: needs data bytes [{offset}, {end}), section has {len(data)}"
            )
        flat = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
        tensors[name] = flat.reshape(shape).astype(np.float32)

    model = EncoderModel(
        name=str(header["model_name"]),
        input_normalize=bool(header["input_normalize"]),
        epsilon=float(header["epsilon"]),
        layers=tuple(layers),
        tensors=tensors,
    )
    _check_model(model.layers, model.tensors)
    return model


def save_model(path: str, model: EncoderModel) -> None:
    """Write a model in canonical form: sorted tensor names, contiguous data."""
    _check_model(model.layers, model.tensors)
    header = model.header_dict()
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for name in sorted(model.tensors):
            fh.write(np.ascontiguousarray(model.tensors[name], dtype="<f4").tobytes())
