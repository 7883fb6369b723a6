"""Deterministic synthesis of sinusoidal probe signals.

All probes are weighted sums of zero-phase sine components, optionally with a
constant bias and a centered "burst" segment whose components fully replace
the base components for part of the signal.  Samples are rendered in double
precision; an optional 16-bit PCM round-trip is available for sensitivity
checks.
"""

from __future__ import annotations

import json
import math
import wave as _wave
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSignal


@dataclass(frozen=True)
class SineComponent:
    """One sinusoid: ``amplitude * sin(2*pi*frequency*t)``, phase fixed at 0."""

    frequency: float
    amplitude: float

    def validate(self, sample_rate: float) -> None:
        if not (math.isfinite(self.frequency) and math.isfinite(self.amplitude)):
            raise InvalidSignal(f"non-finite component ({self.frequency}, {self.amplitude})")
        if self.frequency <= 0:
            raise InvalidSignal(f"frequency must be positive, got {self.frequency}")
        if self.frequency > sample_rate / 2:
            raise InvalidSignal(
                f"frequency {self.frequency} Hz above Nyquist ({sample_rate / 2} Hz)"
            )
        if self.amplitude < 0:
            raise InvalidSignal(f"amplitude must be non-negative, got {self.amplitude}")


@dataclass(frozen=True)
class BurstSpec:
    """Replacement components for the centered segment of a signal."""

    components: tuple[SineComponent, ...]
    duration: float


@dataclass(frozen=True)
class SignalSpec:
    """Declarative description of one synthetic test signal."""

    components: tuple[SineComponent, ...]
    bias: float = 0.0
    duration: float = 1.0
    sample_rate: int = 16000
    burst: BurstSpec | None = None

    @property
    def num_samples(self) -> int:
        return round(self.duration * self.sample_rate)

    def validate(self) -> None:
        if not math.isfinite(self.bias):
            raise InvalidSignal(f"non-finite bias {self.bias}")
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise InvalidSignal(f"duration must be positive, got {self.duration}")
        if self.sample_rate <= 0:
            raise InvalidSignal(f"sample_rate must be positive, got {self.sample_rate}")
        for comp in self.components:
            comp.validate(self.sample_rate)
        if self.burst is not None:
            if not (math.isfinite(self.burst.duration) and self.burst.duration >= 0):
                raise InvalidSignal(f"burst duration must be >= 0, got {self.burst.duration}")
            if self.burst.duration > self.duration:
                raise InvalidSignal(
                    f"burst ({self.burst.duration}s) longer than signal ({self.duration}s)"
                )
            for comp in self.burst.components:
                comp.validate(self.sample_rate)

    def label(self) -> str:
        parts = [f"{c.frequency:g}Hz@{c.amplitude:g}" for c in self.components]
        text = "+".join(parts) if parts else "silence"
        if self.bias:
            text += f"+b{self.bias:g}"
        if self.burst is not None:
            burst_parts = "+".join(f"{c.frequency:g}Hz@{c.amplitude:g}" for c in self.burst.components)
            text += f"|burst[{burst_parts};{self.burst.duration:g}s]"
        return text

    def to_dict(self) -> dict:
        doc: dict = {
            "components": [
                {"frequency": c.frequency, "amplitude": c.amplitude} for c in self.components
            ],
            "bias": self.bias,
            "duration": self.duration,
            "sample_rate": self.sample_rate,
        }
        if self.burst is not None:
            doc["burst"] = {
                "components": [
                    {"frequency": c.frequency, "amplitude": c.amplitude}
                    for c in self.burst.components
                ],
                "duration": self.burst.duration,
            }
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "SignalSpec":
        try:
            components = tuple(
                SineComponent(float(c["frequency"]), float(c["amplitude"]))
                for c in doc.get("components", [])
            )
            burst = None
            if doc.get("burst") is not None:
                burst_doc = doc["burst"]
                burst = BurstSpec(
                    components=tuple(
                        SineComponent(float(c["frequency"]), float(c["amplitude"]))
                        for c in burst_doc.get("components", [])
                    ),
                    duration=float(burst_doc["duration"]),
                )
            spec = cls(
                components=components,
                bias=float(doc.get("bias", 0.0)),
                duration=float(doc.get("duration", 1.0)),
                sample_rate=int(doc.get("sample_rate", 16000)),
                burst=burst,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSignal(f"unreadable signal spec: {exc}") from exc
        spec.validate()
        return spec

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SignalSpec":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidSignal(f"invalid JSON: {exc}") from exc
        return cls.from_dict(doc)


@dataclass(frozen=True)
class Waveform:
    """Rendered samples plus their sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __len__(self) -> int:
        return self.samples.shape[0]


def tone(frequency: float, amplitude: float = 1.0, *, bias: float = 0.0,
         duration: float = 1.0, sample_rate: int = 16000) -> SignalSpec:
    """Shorthand for a single-component spec."""
    return SignalSpec(
        components=(SineComponent(frequency, amplitude),),
        bias=bias,
        duration=duration,
        sample_rate=sample_rate,
    )


def _render(components: tuple[SineComponent, ...], indices: np.ndarray,
            sample_rate: float) -> np.ndarray:
    out = np.zeros(indices.shape[0], dtype=np.float64)
    for comp in components:
        out += comp.amplitude * np.sin(2.0 * np.pi * comp.frequency * indices / sample_rate)
    return out


def burst_bounds(spec: SignalSpec) -> tuple[int, int]:
    """Centered burst placement: [floor((N-B)/2), floor((N-B)/2)+B) in samples."""
    total = spec.num_samples
    burst_len = round(spec.burst.duration * spec.sample_rate) if spec.burst else 0
    start = (total - burst_len) // 2
    return start, burst_len


def synth(spec: SignalSpec) -> Waveform:
    """Render a spec to samples.

    Base region: ``bias + sum_k A_k*sin(2*pi*f_k*n/sample_rate)``.  Within the
    burst region the burst components fully replace the base components; the
    bias and the global time axis are kept.  Bitwise deterministic.
    """
    spec.validate()
    total = spec.num_samples
    indices = np.arange(total, dtype=np.float64)
    samples = _render(spec.components, indices, spec.sample_rate)
    if spec.burst is not None:
        start, burst_len = burst_bounds(spec)
        if burst_len > 0:
            samples[start:start + burst_len] = _render(
                spec.burst.components, indices[start:start + burst_len], spec.sample_rate
            )
    samples += spec.bias
    return Waveform(samples=samples, sample_rate=spec.sample_rate)


def burst_overlap_steps(total_samples: int, burst_start: int, burst_len: int,
                        window: int, stride: int) -> set[int]:
    """Output steps whose analysis window intersects the burst interval.

    Step ``i`` covers samples ``[i*stride, i*stride + window)``; the burst
    covers ``[burst_start, burst_start + burst_len)``.  Closed-form interval
    arithmetic; an empty set is a legal result.
    """
    if window <= 0 or stride <= 0:
        raise InvalidSignal("window and stride must be positive")
    num_steps = (total_samples - window) // stride + 1 if total_samples >= window else 0
    if num_steps <= 0 or burst_len <= 0:
        return set()
    burst_end = burst_start + burst_len
    # i*stride + window > burst_start  (strict, half-open intervals)
    first = max(0, math.floor((burst_start - window) / stride) + 1)
    # i*stride < burst_end
    last = min(num_steps - 1, math.ceil(burst_end / stride) - 1)
    return set(range(first, last + 1))


def quantize_pcm16(wave_in: Waveform) -> Waveform:
    """Round-trip samples through 16-bit PCM (clip to [-1, 1], scale by 32767)."""
    clipped = np.clip(wave_in.samples, -1.0, 1.0)
    ints = np.round(clipped * 32767.0).astype(np.int16)
    return Waveform(samples=ints.astype(np.float64) / 32767.0, sample_rate=wave_in.sample_rate)


def write_wav(path: str, wave_in: Waveform) -> None:
    """Write mono 16-bit PCM RIFF for auditing signals by ear."""
    clipped = np.clip(wave_in.samples, -1.0, 1.0)
    ints = np.round(clipped * 32767.0).astype("<i2")
    with _wave.open(path, "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(wave_in.sample_rate)
        fh.writeframes(ints.tobytes())
