"""Sliding-window extraction of an embedding signal from audio into EMBSIG01.

The chunk grid reproduces the diarization engine's arithmetic bit for bit:
step = min(max_step, (duration - window) / (min_chunks - 1)) and
num_chunks = floor((duration - window) / step) + 1, so a file extracted
here lands on exactly the grid the engine would compute for the same
duration.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass

import numpy as np

from .audio import read_wav
from .features import FRAME_SECONDS, HOP_SECONDS, make_detector, make_embedder

_MAGIC = b"EMBSIG01"
_HEADER = struct.Struct("<8sIIdd")

SPEECH_MEDIAN_THRESHOLD = 0.5
ZERO_NORM_EPS = 1e-12


@dataclass(frozen=True)
class ExtractionConfig:
    audio_path: str
    output_path: str
    window_seconds: float = 6.0
    max_step_seconds: float = 1.0
    min_chunks: int = 3600
    embedder: str = "spectral"
    detector: str = "energy"
    embedding_dim: int = 128
    detector_threshold_db: float = -40.0
    chunk_batch: int = 512

    def __post_init__(self) -> None:
        if self.window_seconds <= 0 or self.max_step_seconds <= 0:
            raise ValueError("window_seconds and max_step_seconds must be positive")
        if self.min_chunks < 1 or self.chunk_batch < 1:
            raise ValueError("min_chunks and chunk_batch must be positive")


@dataclass(frozen=True)
class ExtractionSummary:
    output_path: str
    num_dims: int
    num_chunks: int
    num_speech_chunks: int
    step_seconds: float
    window_seconds: float


def chunk_grid(
    duration_seconds: float,
    window_seconds: float = 6.0,
    max_step_seconds: float = 1.0,
    min_chunks: int = 3600,
) -> tuple[float, int]:
    """(step_seconds, num_chunks); identical arithmetic to the engine's grid."""
    if duration_seconds <= window_seconds:
        raise ValueError(
            f"audio shorter than one window ({duration_seconds} s <= {window_seconds} s)"
        )
    span = duration_seconds - window_seconds
    if min_chunks == 1:
        step = max_step_seconds
    else:
        step = min(max_step_seconds, span / (min_chunks - 1))
    ratio = span / step
    num_chunks = int(math.floor(ratio + 1e-9 * max(1.0, ratio))) + 1
    return step, num_chunks


def write_embsig(
    data: np.ndarray, step_seconds: float, window_seconds: float, path: str | os.PathLike
) -> None:
    """Write an M x T matrix as an EMBSIG01 file (float32, column-major)."""
    m, t = data.shape
    header = _HEADER.pack(_MAGIC, m, t, step_seconds, window_seconds)
    payload = np.asarray(data, dtype=np.float64).astype("<f4").tobytes(order="F")
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header + payload)
    os.replace(tmp, path)


def extract(config: ExtractionConfig) -> ExtractionSummary:
    """Embed every chunk, zero the non-speech ones, and write the signal file."""
    samples, rate = read_wav(config.audio_path)
    duration = samples.size / rate
    step, num_chunks = chunk_grid(
        duration, config.window_seconds, config.max_step_seconds, config.min_chunks
    )

    embedder = make_embedder(config.embedder, dim=config.embedding_dim)
    detector = make_detector(config.detector, threshold_db=config.detector_threshold_db)
    embedder.prepare(samples, rate)
    detector.prepare(samples, rate)
    num_frames = min(embedder.num_frames, detector.num_frames)

    starts = np.arange(num_chunks) * step
    lo = np.ceil((starts - 1e-9) / HOP_SECONDS).astype(np.int64)
    hi = (
        np.floor((starts + config.window_seconds - FRAME_SECONDS + 1e-9) / HOP_SECONDS).astype(
            np.int64
        )
        + 1
    )
    lo = np.clip(lo, 0, num_frames)
    hi = np.clip(hi, 0, num_frames)

    data = np.zeros((config.embedding_dim, num_chunks))
    speech = np.zeros(num_chunks, dtype=bool)
    for batch in np.array_split(np.arange(num_chunks), max(1, num_chunks // config.chunk_batch)):
        if batch.size == 0:
            continue
        vectors = embedder.pooled(lo[batch], hi[batch])
        probs = detector.median_probability(lo[batch], hi[batch])
        keep = probs >= SPEECH_MEDIAN_THRESHOLD
        vectors[~keep] = 0.0
        data[:, batch] = vectors.T
        speech[batch] = keep

    norms = np.linalg.norm(data, axis=0)
    nonzero = norms > ZERO_NORM_EPS
    data[:, nonzero] /= norms[nonzero]
    data[:, ~nonzero] = 0.0

    write_embsig(data, step, config.window_seconds, config.output_path)
    return ExtractionSummary(
        output_path=os.fspath(config.output_path),
        num_dims=config.embedding_dim,
        num_chunks=num_chunks,
        num_speech_chunks=int(speech.sum()),
        step_seconds=step,
        window_seconds=config.window_seconds,
    )
