"""Similarity, scale, projection and structure statistics.

Cosine distance (1 - cosine similarity) is the metric everywhere; degenerate
zero-norm vectors raise instead of silently contributing zeros, since a bogus
zero would corrupt accumulated scales.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import Representation
from .errors import (
    DegenerateInput,
    EmptyRepresentation,
    InputTooShort,
    NonFiniteDistance,
    ShapeMismatch,
    TooFewPoints,
    UnsortedFrequencies,
    ZeroVector,
)
from .signals import Waveform


@dataclass(frozen=True)
class DistanceMatrix:
    """Labeled symmetric matrix of pairwise cosine distances."""

    labels: tuple[str, ...]
    values: np.ndarray

    def validate(self) -> None:
        n = len(self.labels)
        if self.values.shape != (n, n):
            raise ShapeMismatch(f"{n} labels but value shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteDistance("distance matrix contains non-finite entries")
        if np.abs(self.values - self.values.T).max(initial=0.0) > 1e-9:
            raise ShapeMismatch("distance matrix is not symmetric within 1e-9")
        if n and (np.any(np.diag(self.values) != 0.0)
                  or self.values.min() < 0.0 or self.values.max() > 2.0):
            raise ShapeMismatch("cosine distances must have a zero diagonal and lie in [0, 2]")

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "values": self.values.tolist()}


@dataclass(frozen=True)
class FrequencyScale:
    """Cumulative neighbor cosine distance along a frequency sweep."""

    frequencies: np.ndarray
    cumulative: np.ndarray

    def to_dict(self) -> dict:
        return {
            "frequencies": np.asarray(self.frequencies).tolist(),
            "cumulative": np.asarray(self.cumulative).tolist(),
        }


def time_average(rep: Representation) -> np.ndarray:
    """Mean over timesteps: the time-averaged representation of one signal."""
    if rep.matrix.shape[0] < 1:
        raise EmptyRepresentation("representation has no timesteps")
    return rep.matrix.astype(np.float64).mean(axis=0)


def _norm_or_raise(v: np.ndarray, what: str = "vector") -> float:
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ZeroVector(f"{what} has zero norm")
    return norm


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise ShapeMismatch(f"vector lengths differ: {u.shape[0]} vs {v.shape[0]}")
    u_hat = u / _norm_or_raise(u, "first argument")
    v_hat = v / _norm_or_raise(v, "second argument")
    # 1 - ||u^ - v^||^2 / 2 equals u^.v^ but has no cancellation near +1,
    # so identical vectors give exactly 1.0
    sim = 1.0 - 0.5 * float(np.sum((u_hat - v_hat) ** 2))
    return min(1.0, max(-1.0, sim))


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    return 1.0 - cosine_similarity(u, v)


def _unit_rows(vectors: np.ndarray, labels=None) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0.0):
        idx = int(np.argmin(norms))
        name = labels[idx] if labels is not None else f"row {idx}"
        raise ZeroVector(f"{name} has zero norm")
    return vectors / norms[:, None]


def pairwise_cosine_distance(vectors: np.ndarray, labels) -> DistanceMatrix:
    """n x D row vectors -> labeled n x n cosine-distance matrix."""
    labels = tuple(str(x) for x in labels)
    unit = _unit_rows(vectors, labels)
    gram = np.clip(unit @ unit.T, -1.0, 1.0)
    dist = 1.0 - gram
    dist = 0.5 * (dist + dist.T)
    np.fill_diagonal(dist, 0.0)
    matrix = DistanceMatrix(labels=labels, values=dist)
    matrix.validate()
    return matrix


def consistency_matrix(reps: list[Representation]) -> np.ndarray:
    """Entry (a, b): mean cosine similarity between signal a's time-averaged
    vector and signal b's stepwise vectors."""
    if not reps:
        raise EmptyRepresentation("no representations given")
    shape = reps[0].matrix.shape
    for rep in reps:
        if rep.matrix.shape != shape:
            raise ShapeMismatch(f"representation shapes differ: {rep.matrix.shape} vs {shape}")
    averaged = np.stack([time_average(rep) for rep in reps])
    averaged_unit = _unit_rows(averaged)
    n = len(reps)
    out = np.empty((n, n), dtype=np.float64)
    for b, rep in enumerate(reps):
        steps_unit = _unit_rows(rep.matrix.astype(np.float64))
        out[:, b] = np.clip(averaged_unit @ steps_unit.T, -1.0, 1.0).mean(axis=1)
    return out


def build_encoder_scale(frequencies: np.ndarray, averaged_reps: np.ndarray) -> FrequencyScale:
    """Accumulate neighbor cosine distances into a frequency scale.

    ``cumulative[k] = sum_{j<k} D_c(rep_j, rep_{j+1})``, ``cumulative[0] = 0``;
    non-decreasing by construction since every distance is >= 0.
    """
    frequencies = np.asarray(frequencies, dtype=np.float64)
    averaged_reps = np.asarray(averaged_reps, dtype=np.float64)
    if frequencies.ndim != 1 or averaged_reps.shape[0] != frequencies.shape[0]:
        raise ShapeMismatch(
            f"{frequencies.shape[0]} frequencies vs {averaged_reps.shape[0]} representations"
        )
    if frequencies.shape[0] < 2:
        raise TooFewPoints("scale needs at least two frequencies")
    if np.any(np.diff(frequencies) <= 0):
        raise UnsortedFrequencies("frequencies must be strictly increasing")
    unit = _unit_rows(averaged_reps)
    # cancellation-free cosine distance: identical neighbors contribute exactly 0
    neighbor = 0.5 * np.sum((unit[1:] - unit[:-1]) ** 2, axis=1)
    cumulative = np.concatenate([[0.0], np.cumsum(neighbor)])
    return FrequencyScale(frequencies=frequencies, cumulative=cumulative)


def mel_scale(f):
    """O'Shaughnessy mel: 2595 * log10(1 + f/700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def bark_scale(f):
    """Zwicker & Terhardt bark: 13*atan(0.00076 f) + 3.5*atan((f/7500)^2)."""
    f = np.asarray(f, dtype=np.float64)
    return 13.0 * np.arctan(0.00076 * f) + 3.5 * np.arctan((f / 7500.0) ** 2)


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    """Map to [0, 1] over the given range (used to overlay scales in one plot)."""
    values = np.asarray(values, dtype=np.float64)
    low, high = values.min(), values.max()
    if high == low:
        return np.zeros_like(values)
    return (values - low) / (high - low)


def linear_cka(x: np.ndarray, y: np.ndarray) -> float:
    """Linear centered kernel alignment between two representation matrices.

    ``||Yc^T Xc||_F^2 / (||Xc^T Xc||_F * ||Yc^T Yc||_F)`` with column-centered
    Xc, Yc.  Invariant to orthogonal transforms and isotropic scaling.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ShapeMismatch(f"need matching row counts, got {x.shape} and {y.shape}")
    if x.shape[0] < 2:
        raise TooFewPoints("CKA needs at least two rows")
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    x_self = np.linalg.norm(xc.T @ xc)
    y_self = np.linalg.norm(yc.T @ yc)
    if x_self == 0.0 or y_self == 0.0:
        raise DegenerateInput("centered matrix is all-zero")
    cross = np.linalg.norm(yc.T @ xc) ** 2
    return float(cross / (x_self * y_self))


def mds_2d(dist: DistanceMatrix) -> np.ndarray:
    """Classical MDS to two dimensions, deterministic.

    Double-centers the squared distances, takes the top-2 eigenpairs and
    scales eigenvectors by sqrt(max(eigenvalue, 0)).  Sign is fixed so each
    coordinate column's largest-magnitude entry is positive.
    """
    values = np.asarray(dist.values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise NonFiniteDistance("distance matrix contains non-finite entries")
    n = values.shape[0]
    centering = np.eye(n) - np.full((n, n), 1.0 / n)
    b = -0.5 * centering @ (values ** 2) @ centering
    eigvals, eigvecs = np.linalg.eigh(b)
    coords = np.zeros((n, 2), dtype=np.float64)
    if n < 2:
        return coords
    # eigenvalues at the solver's noise floor are rank deficiency, not geometry
    floor = 1e-12 * np.abs(eigvals).max(initial=0.0)
    for axis, idx in enumerate((n - 1, n - 2)):
        scale = np.sqrt(eigvals[idx]) if eigvals[idx] > floor else 0.0
        column = eigvecs[:, idx] * scale
        anchor = int(np.argmax(np.abs(column)))
        if column[anchor] < 0:
            column = -column
        coords[:, axis] = column
    return coords


def ordering_stats(scale: FrequencyScale) -> dict[str, float]:
    """Monotonicity and line fit of a frequency scale.

    ``monotone_fraction``: fraction of strictly positive neighbor increments.
    ``linearity_r2``: R^2 of the least-squares line cumulative ~ frequency
    (1.0 when the cumulative values are constant: a flat line fits exactly).
    """
    if scale.frequencies.shape[0] < 3:
        raise TooFewPoints("ordering stats need at least three points")
    increments = np.diff(scale.cumulative)
    monotone_fraction = float(np.mean(increments > 0))
    x = scale.frequencies
    y = scale.cumulative
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    total = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if total == 0.0 else 1.0 - float(np.sum(residuals ** 2)) / total
    return {"monotone_fraction": monotone_fraction, "linearity_r2": r2}


def spectrogram_features(wave: Waveform, window: int, hop: int) -> np.ndarray:
    """Magnitude DFT of Hann-windowed frames; the contrast baseline.

    frames = floor((L - window)/hop) + 1, bins = window//2 + 1.
    """
    samples = np.asarray(wave.samples, dtype=np.float64)
    if window < 1 or hop < 1:
        raise ShapeMismatch(f"window and hop must be positive, got {window}, {hop}")
    if samples.shape[0] < window:
        raise InputTooShort(f"need at least {window} samples, got {samples.shape[0]}")
    frames = (samples.shape[0] - window) // hop + 1
    samples = np.ascontiguousarray(samples)
    framed = np.lib.stride_tricks.as_strided(
        samples,
        shape=(frames, window),
        strides=(samples.strides[0] * hop, samples.strides[0]),
        writeable=False,
    )
    return np.abs(np.fft.rfft(framed * np.hanning(window), axis=1))
