from __future__ import annotations

import json
import shutil
import subprocess
import sys

import pytest

KERNELS = [10, 3, 3, 3, 3, 2, 2]
STRIDES = [5, 2, 2, 2, 2, 2, 2]


def build_local_checkpoint(path: str, *, norm: str, conv_bias: bool, channels: int = 16,
                           seed: int = 0, activation: str = "gelu") -> str:
    """Construct a random-weight wav2vec2-style checkpoint on disk, no network."""
    import torch
    from transformers import Wav2Vec2Config, Wav2Vec2Model

    config = Wav2Vec2Config(
        conv_dim=[channels] * 7,
        conv_kernel=KERNELS,
        conv_stride=STRIDES,
        num_feat_extract_layers=7,
        feat_extract_norm=norm,
        conv_bias=conv_bias,
        feat_extract_activation=activation,
        hidden_size=32,
        num_hidden_layers=1,
        num_attention_heads=2,
        intermediate_size=32,
    )
    torch.manual_seed(seed)
    model = Wav2Vec2Model(config)
    model.save_pretrained(path)
    return path


@pytest.fixture(scope="session")
def layer_checkpoint(tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "layer-style"
    return build_local_checkpoint(str(path), norm="layer", conv_bias=True, seed=1)


@pytest.fixture(scope="session")
def group_checkpoint(tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "group-style"
    return build_local_checkpoint(str(path), norm="group", conv_bias=False, seed=2)


def sineprobe_cli(*args: str) -> subprocess.CompletedProcess:
    """Invoke the probing toolkit strictly through its CLI surface."""
    executable = shutil.which("sineprobe")
    command = [executable, *args] if executable else [sys.executable, "-m", "sineprobe.cli", *args]
    return subprocess.run(command, capture_output=True, text=True)


def sineprobe_inspect(model_path: str) -> dict:
    result = sineprobe_cli("inspect-model", model_path)
    assert result.returncode == 0, result.stderr
    return json.loads(result.stdout)
