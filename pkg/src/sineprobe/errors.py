"""Exception hierarchy shared across the toolkit.

Every error carries a machine-parsable ``code`` that the CLI prints as
``code: message`` on stderr before exiting with status 1.
"""

from __future__ import annotations


class SineprobeError(Exception):
    """Base class for all toolkit errors."""

    code = "error"


class InvalidSignal(SineprobeError):
    """Signal parameters violate their invariants (non-finite, above Nyquist, ...)."""

    code = "invalid_signal"


class BadMagic(SineprobeError):
    """Weight file does not start with the W2VFE magic."""

    code = "bad_magic"


class UnsupportedVersion(SineprobeError):
    """Weight file carries a format version this reader does not understand."""

    code = "unsupported_version"


class MalformedHeader(SineprobeError):
    """Weight-file JSON header is unreadable or misses required fields."""

    code = "malformed_header"


class ShapeMismatch(SineprobeError):
    """Declared and actual tensor/array shapes disagree."""

    code = "shape_mismatch"


class TruncatedData(SineprobeError):
    """Weight file ends before the declared tensor data."""

    code = "truncated_data"


class InputTooShort(SineprobeError):
    """Input signal is shorter than the receptive field / analysis window."""

    code = "input_too_short"


class SampleRateMismatch(SineprobeError):
    """Waveform sample rate differs from what the encoder expects."""

    code = "sample_rate_mismatch"


class EmptyRepresentation(SineprobeError):
    """Representation has no timesteps to aggregate."""

    code = "empty_representation"


class ZeroVector(SineprobeError):
    """Cosine similarity is undefined for a zero-norm vector."""

    code = "zero_vector"


class TooFewPoints(SineprobeError):
    """Operation needs more points than were supplied."""

    code = "too_few_points"


class UnsortedFrequencies(SineprobeError):
    """Frequency sequence must be strictly increasing."""

    code = "unsorted_frequencies"


class DegenerateInput(SineprobeError):
    """Matrix has no variance left after centering."""

    code = "degenerate_input"


class NonFiniteDistance(SineprobeError):
    """Distance matrix contains NaN or infinity."""

    code = "non_finite_distance"


class NonFiniteActivation(SineprobeError):
    """Encoder produced NaN or infinity (degenerate weights or input)."""

    code = "non_finite_activation"
