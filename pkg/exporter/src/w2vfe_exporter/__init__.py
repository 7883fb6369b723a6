"""Convert wav2vec2-style feature-encoder checkpoints to W2VFE files."""

__version__ = "0.1.0"

from .export import ExportError, ExportManifest, ModelNotFound, UnexpectedArchitecture, export
from .reference import PROBE_SPECS, dump_reference

__all__ = [
    "ExportError",
    "ExportManifest",
    "ModelNotFound",
    "PROBE_SPECS",
    "UnexpectedArchitecture",
    "dump_reference",
    "export",
]
