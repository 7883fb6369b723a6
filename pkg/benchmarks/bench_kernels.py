#!/usr/bin/env python3
"""Benchmark the numba conv kernel against the pure-numpy fallback.

Times each conv layer of the 7-layer geometry on a 1-second input, then a
full encode per backend.  Run after installing the package:

    python3 benchmarks/bench_kernels.py --channels 64 --repeats 3
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sineprobe import kernels
from sineprobe.encoder import EXPECTED_SAMPLE_RATE, encode
from sineprobe.fixtures import layer_norm_fixture
from sineprobe.signals import synth, tone


def best_of(fn, repeats: int) -> float:
    timings = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        timings.append(time.perf_counter() - start)
    return min(timings)


def bench_layers(model, samples, repeats):
    backends = {"numpy": kernels.conv1d_numpy}
    if kernels.HAVE_NUMBA:
        backends["numba"] = kernels.conv1d_numba
    x = samples[None, :].astype(np.float64)
    print(f"{'layer':>6} {'shape':>22} " + " ".join(f"{n + ' ms':>12}" for n in backends)
          + ("   speedup" if len(backends) == 2 else ""))
    activations = x
    for i, layer in enumerate(model.layers):
        weight = model.tensors[f"conv.{i}.weight"].astype(np.float64)
        results = {}
        for name, fn in backends.items():
            fn(activations, weight, layer.stride)  # warm up / JIT compile
            results[name] = best_of(lambda: fn(activations, weight, layer.stride), repeats)
        shape = f"{weight.shape[0]}x{weight.shape[1]}x{weight.shape[2]} s{layer.stride}"
        row = f"{i:>6} {shape:>22} " + " ".join(f"{results[n] * 1e3:>12.2f}" for n in backends)
        if len(results) == 2:
            row += f"   {results['numpy'] / results['numba']:>6.2f}x"
        print(row)
        activations = backends["numpy"](activations, weight, layer.stride)


def bench_encode(model, wave, repeats):
    print()
    saved = kernels.conv1d_core
    try:
        for name in ("numpy", "numba"):
            if name == "numba" and not kernels.HAVE_NUMBA:
                continue
            kernels.conv1d_core = kernels.conv1d_numpy if name == "numpy" else kernels.conv1d_numba
            encode(model, wave)  # warm up
            elapsed = best_of(lambda: encode(model, wave), repeats)
            rate = len(wave.samples) / EXPECTED_SAMPLE_RATE / elapsed
            print(f"full encode [{name:>5}]: {elapsed * 1e3:8.1f} ms  ({rate:.1f}x real time)")
    finally:
        kernels.conv1d_core = saved


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--channels", type=int, default=64,
                        help="conv width (512 matches the real encoders)")
    parser.add_argument("--seconds", type=float, default=1.0)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    model = layer_norm_fixture(channels=args.channels, seed=0)
    wave = synth(tone(200.0, duration=args.seconds))
    print(f"backend selected by SINEPROBE_KERNEL: {kernels.BACKEND} "
          f"(numba available: {kernels.HAVE_NUMBA})")
    print(f"model: 7 conv layers, {args.channels} channels, window 400 / stride 320")
    print(f"input: {len(wave.samples)} samples\n")
    bench_layers(model, wave.samples, args.repeats)
    bench_encode(model, wave, args.repeats)


if __name__ == "__main__":
    main()
