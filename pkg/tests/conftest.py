from __future__ import annotations

import os

import pytest
from hypothesis import settings

from sineprobe.fixtures import group_norm_fixture, layer_norm_fixture
from sineprobe.weightfile import save_model

settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")

# Real exported weights are optional: the suite looks for base.w2vfe /
# large.w2vfe / xlsr.w2vfe under $SINEPROBE_MODEL_DIR or ./models and skips
# the weight-gated checks when they are absent.
REAL_MODEL_FILES = {"base": "base.w2vfe", "large": "large.w2vfe", "xlsr": "xlsr.w2vfe"}


def real_model_path(kind: str) -> str | None:
    candidates = []
    env_dir = os.environ.get("SINEPROBE_MODEL_DIR")
    if env_dir:
        candidates.append(os.path.join(env_dir, REAL_MODEL_FILES[kind]))
    here = os.path.dirname(os.path.abspath(__file__))
    candidates.append(os.path.join(os.path.dirname(here), "models", REAL_MODEL_FILES[kind]))
    for path in candidates:
        if os.path.exists(path):
            return path
    return None


def require_real_model(kind: str) -> str:
    path = real_model_path(kind)
    if path is None:
        pytest.skip(
            f"real {kind} weights not available (export with the w2vfe-exporter "
            f"and point SINEPROBE_MODEL_DIR at them)"
        )
    return path


@pytest.fixture(scope="session")
def layer_model():
    return layer_norm_fixture(channels=16, seed=7)


@pytest.fixture(scope="session")
def group_model():
    return group_norm_fixture(channels=16, seed=11)


@pytest.fixture(scope="session")
def layer_model_path(layer_model, tmp_path_factory):
    path = tmp_path_factory.mktemp("models") / "layer.w2vfe"
    save_model(str(path), layer_model)
    return str(path)


@pytest.fixture(scope="session")
def group_model_path(group_model, tmp_path_factory):
    path = tmp_path_factory.mktemp("models") / "group.w2vfe"
    save_model(str(path), group_model)
    return str(path)


# one pass/fail line per acceptance criterion, printed after the run
ACCEPTANCE_LOG: list[tuple[str, str]] = []


def record_acceptance(name: str, outcome: str) -> None:
    ACCEPTANCE_LOG.append((name, outcome))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in ACCEPTANCE_LOG:
        terminalreporter.write_line(f"{outcome:5s}  {name}")
