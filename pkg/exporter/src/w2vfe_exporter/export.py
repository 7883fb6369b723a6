"""Extract wav2vec2-style feature-encoder weights into W2VFE files.

Layer structure is discovered from checkpoint configuration, never
hard-coded, so Base / Large / XLS-R (and local fine-tunes) export uniformly.
Only the convolutional feature encoder is kept; the transformer weights are
discarded after extraction.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .w2vfe import file_checksum, tensor_checksum, write_w2vfe

# torch norm layers default to 1e-5; recorded in the header for parity
NORM_EPSILON = 1e-5


class ExportError(Exception):
    code = "export_error"


class ModelNotFound(ExportError):
    code = "model_not_found"


class UnexpectedArchitecture(ExportError):
    code = "unexpected_architecture"


@dataclass
class ExportManifest:
    """Provenance record written next to every exported file."""

    source_model: str
    revision: str | None
    model_name: str
    out_path: str
    input_normalize: bool
    input_normalize_source: str
    epsilon: float
    window: int
    stride: int
    layers: list[dict]
    tensor_map: dict[str, str]
    checksums: dict[str, str]
    file_sha256: str
    reference_outputs: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "source_model": self.source_model,
            "revision": self.revision,
            "model_name": self.model_name,
            "out_path": self.out_path,
            "input_normalize": self.input_normalize,
            "input_normalize_source": self.input_normalize_source,
            "epsilon": self.epsilon,
            "window": self.window,
            "stride": self.stride,
            "layers": self.layers,
            "tensor_map": self.tensor_map,
            "checksums": self.checksums,
            "file_sha256": self.file_sha256,
            "reference_outputs": self.reference_outputs,
        }

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_checkpoint(source: str, revision: str | None = None):
    """Load a Wav2Vec2 checkpoint from a hub id or local directory."""
    from transformers import Wav2Vec2Model

    try:
        model = Wav2Vec2Model.from_pretrained(source, revision=revision)
    except (OSError, ValueError) as exc:
        raise ModelNotFound(f"cannot load {source!r}: {exc}") from exc
    model.eval()
    return model


def discover_layers(config) -> list[dict]:
    """Layer configs from checkpoint metadata; rejects non conv+norm+gelu stacks."""
    activation = getattr(config, "feat_extract_activation", "gelu")
    if activation != "gelu":
        raise UnexpectedArchitecture(f"activation {activation!r} is not a plain GELU stack")
    norm_mode = getattr(config, "feat_extract_norm", None)
    if norm_mode not in ("group", "layer"):
        raise UnexpectedArchitecture(f"feature-extractor norm mode {norm_mode!r} unknown")
    dims = list(config.conv_dim)
    kernels = list(config.conv_kernel)
    strides = list(config.conv_stride)
    n = int(config.num_feat_extract_layers)
    if not (len(dims) == len(kernels) == len(strides) == n):
        raise UnexpectedArchitecture(
            f"conv_dim/conv_kernel/conv_stride lengths {len(dims)}/{len(kernels)}/{len(strides)} "
            f"do not match num_feat_extract_layers={n}"
        )
    layers = []
    for i in range(n):
        if norm_mode == "layer":
            norm = "layer_over_channels"
        else:
            norm = "group_per_channel" if i == 0 else "none"
        layers.append({
            "in_channels": 1 if i == 0 else dims[i - 1],
            "out_channels": dims[i],
            "kernel": kernels[i],
            "stride": strides[i],
            "has_bias": bool(config.conv_bias),
            "norm": norm,
        })
    return layers


def derive_window_stride(layers: list[dict]) -> tuple[int, int]:
    window = 1
    for layer in reversed(layers):
        window = (window - 1) * layer["stride"] + layer["kernel"]
    stride = 1
    for layer in layers:
        stride *= layer["stride"]
    return window, stride


def resolve_input_normalize(source: str, config, override: bool | None) -> tuple[bool, str]:
    """Processor config when available, else the released-model convention."""
    if override is not None:
        return override, "cli-override"
    try:
        from transformers import Wav2Vec2FeatureExtractor

        extractor = Wav2Vec2FeatureExtractor.from_pretrained(source)
        return bool(extractor.do_normalize), "preprocessor-config"
    except Exception:
        # layer-normalized stacks (Large, XLS-R) ship with do_normalize=True
        return config.feat_extract_norm == "layer", "norm-mode-heuristic"


def extract_tensors(feature_encoder, layers: list[dict]):
    """Map source state-dict entries onto W2VFE tensor names, strictly."""
    state = {k: v.detach().cpu().numpy() for k, v in feature_encoder.state_dict().items()}
    tensors: dict[str, np.ndarray] = {}
    tensor_map: dict[str, str] = {}

    def take(source_key: str, target: str, shape: tuple[int, ...]) -> None:
        if source_key not in state:
            raise UnexpectedArchitecture(f"checkpoint lacks expected tensor {source_key}")
        arr = state.pop(source_key)
        if tuple(arr.shape) != shape:
            raise UnexpectedArchitecture(
                f"{source_key} has shape {tuple(arr.shape)}, layer config implies {shape}"
            )
        tensors[target] = arr.astype(np.float32)
        tensor_map[target] = source_key

    for i, layer in enumerate(layers):
        base = f"conv_layers.{i}"
        take(f"{base}.conv.weight", f"conv.{i}.weight",
             (layer["out_channels"], layer["in_channels"], layer["kernel"]))
        if layer["has_bias"]:
            take(f"{base}.conv.bias", f"conv.{i}.bias", (layer["out_channels"],))
        if layer["norm"] != "none":
            take(f"{base}.layer_norm.weight", f"norm.{i}.weight", (layer["out_channels"],))
            take(f"{base}.layer_norm.bias", f"norm.{i}.bias", (layer["out_channels"],))
    if state:
        raise UnexpectedArchitecture(
            f"checkpoint carries tensors outside the conv+norm stack: {sorted(state)}"
        )
    return tensors, tensor_map


def short_name(source: str) -> str:
    return os.path.basename(source.rstrip("/")) or source


def export(source: str, out_path: str, *, revision: str | None = None,
           input_normalize: bool | None = None, model_name: str | None = None,
           model=None) -> ExportManifest:
    """Export one checkpoint to ``out_path`` and return its manifest."""
    if model is None:
        model = load_checkpoint(source, revision)
    config = model.config
    layers = discover_layers(config)
    normalize_flag, normalize_source = resolve_input_normalize(source, config, input_normalize)
    tensors, tensor_map = extract_tensors(model.feature_extractor, layers)
    name = model_name or short_name(source)
    write_w2vfe(
        out_path,
        model_name=name,
        input_normalize=normalize_flag,
        epsilon=NORM_EPSILON,
        layers=layers,
        tensors=tensors,
    )
    window, stride = derive_window_stride(layers)
    return ExportManifest(
        source_model=source,
        revision=revision or getattr(config, "_commit_hash", None),
        model_name=name,
        out_path=os.path.abspath(out_path),
        input_normalize=normalize_flag,
        input_normalize_source=normalize_source,
        epsilon=NORM_EPSILON,
        window=window,
        stride=stride,
        layers=layers,
        tensor_map=tensor_map,
        checksums={k: tensor_checksum(v) for k, v in sorted(tensors.items())},
        file_sha256=file_checksum(out_path),
    )
