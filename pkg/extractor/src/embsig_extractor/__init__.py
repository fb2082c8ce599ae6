"""Bridges real audio to the diarization engine's EMBSIG01 embedding-signal format."""

from .audio import UnsupportedAudioError, read_wav
from .extract import ExtractionConfig, ExtractionSummary, chunk_grid, extract
from .features import (
    EnergyDetector,
    ModelLoadError,
    SpectralEmbedder,
    available_detectors,
    available_embedders,
    make_detector,
    make_embedder,
    register_detector,
    register_embedder,
)

__version__ = "0.1.0"

__all__ = [
    "EnergyDetector",
    "ExtractionConfig",
    "ExtractionSummary",
    "ModelLoadError",
    "SpectralEmbedder",
    "UnsupportedAudioError",
    "available_detectors",
    "available_embedders",
    "chunk_grid",
    "extract",
    "make_detector",
    "make_embedder",
    "read_wav",
    "register_detector",
    "register_embedder",
]
