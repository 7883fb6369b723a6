"""Reference encoder outputs for inference-parity testing.

Runs the fixed probe set through the checkpoint's own feature encoder
(torch, float32) and dumps each output as CSV, together with the probe's
signal-spec JSON in the schema the probing toolkit consumes.
"""

from __future__ import annotations

import json
import os

import numpy as np

SAMPLE_RATE = 16000

# fixed probe set: two pure tones plus one formant-style triad
PROBE_SPECS: tuple[tuple[str, dict], ...] = (
    ("tone100", {
        "components": [{"frequency": 100.0, "amplitude": 1.0}],
        "bias": 0.0, "duration": 1.0, "sample_rate": SAMPLE_RATE,
    }),
    ("tone800", {
        "components": [{"frequency": 800.0, "amplitude": 1.0}],
        "bias": 0.0, "duration": 1.0, "sample_rate": SAMPLE_RATE,
    }),
    ("triad", {
        "components": [
            {"frequency": 120.0, "amplitude": 0.5},
            {"frequency": 500.0, "amplitude": 0.35},
            {"frequency": 1500.0, "amplitude": 0.15},
        ],
        "bias": 0.0, "duration": 1.0, "sample_rate": SAMPLE_RATE,
    }),
)


def synth_probe(spec: dict) -> np.ndarray:
    """Render a probe spec (zero-phase sines plus bias) in float64."""
    total = round(spec["duration"] * spec["sample_rate"])
    n = np.arange(total, dtype=np.float64)
    out = np.zeros(total, dtype=np.float64)
    for comp in spec["components"]:
        out += comp["amplitude"] * np.sin(2.0 * np.pi * comp["frequency"] * n / spec["sample_rate"])
    return out + spec.get("bias", 0.0)


def encoder_output(model, samples: np.ndarray, input_normalize: bool) -> np.ndarray:
    """T x D float32 output of the checkpoint's feature encoder."""
    import torch

    if input_normalize:
        # the reference framework's zero-mean unit-variance normalization
        samples = (samples - samples.mean()) / np.sqrt(samples.var() + 1e-7)
    batch = torch.from_numpy(samples.astype(np.float32))[None, :]
    with torch.no_grad():
        out = model.feature_extractor(batch)
    return out[0].T.contiguous().numpy()


def dump_reference(model, out_dir: str, input_normalize: bool,
                   probe_specs=PROBE_SPECS) -> list[dict]:
    """Write spec JSON + reference CSV per probe; returns manifest entries."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for probe_name, spec in probe_specs:
        spec_path = os.path.join(out_dir, f"{probe_name}.spec.json")
        csv_path = os.path.join(out_dir, f"{probe_name}.reference.csv")
        with open(spec_path, "w", encoding="utf-8") as fh:
            json.dump(spec, fh, indent=2, sort_keys=True)
            fh.write("\n")
        matrix = encoder_output(model, synth_probe(spec), input_normalize)
        with open(csv_path, "w", encoding="utf-8") as fh:
            for row in matrix:
                fh.write(",".join(repr(float(v)) for v in row))
                fh.write("\n")
        entries.append({
            "probe": probe_name,
            "spec": os.path.abspath(spec_path),
            "reference": os.path.abspath(csv_path),
            "shape": list(matrix.shape),
        })
    return entries
