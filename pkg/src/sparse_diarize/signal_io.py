"""Embedding-signal data type, column normalization, chunk-grid arithmetic, and file I/O.

An embedding signal is an M x T matrix whose columns are unit-norm voice
embeddings of consecutive overlapping audio chunks; all-zero columns mark
non-speech. Two on-disk formats are supported:

* binary ``EMBSIG01``: 8-byte magic ``EMBSIG01``, uint32 M, uint32 T,
  float64 step_seconds, float64 window_seconds (all little-endian), then
  M*T little-endian float32 values in column-major order.
* CSV: a header row with the four values ``M,T,step,window`` followed by
  T rows of M comma-separated values, one time-step column per row.
"""

from __future__ import annotations

import math
import os
import struct
import warnings
from dataclasses import dataclass

import numpy as np

_MAGIC = b"EMBSIG01"
_HEADER = struct.Struct("<8sIIdd")

UNIT_NORM_TOL = 1e-6
ZERO_NORM_EPS = 1e-12


class SignalFormatError(ValueError):
    """Base class for malformed embedding-signal files."""


class BadMagicError(SignalFormatError):
    """File does not start with the EMBSIG01 magic / parsable CSV header."""


class TruncatedFileError(SignalFormatError):
    """File ends before the payload announced by its header."""


class DimensionMismatchError(SignalFormatError):
    """Payload shape disagrees with the header dimensions."""


@dataclass(frozen=True)
class ChunkGrid:
    """Time grid of overlapping analysis chunks: starts at i*step for i < num_chunks."""

    step_seconds: float
    window_seconds: float
    num_chunks: int

    def __post_init__(self) -> None:
        if self.step_seconds <= 0:
            raise ValueError(f"step_seconds must be positive, got {self.step_seconds}")
        if self.window_seconds < self.step_seconds:
            raise ValueError("window_seconds must be >= step_seconds")
        if self.num_chunks < 1:
            raise ValueError("num_chunks must be >= 1")

    def start_time(self, index: int) -> float:
        return index * self.step_seconds

    @property
    def total_duration(self) -> float:
        """Time spanned by the grid, from the first chunk start to the last chunk end."""
        return (self.num_chunks - 1) * self.step_seconds + self.window_seconds


@dataclass(frozen=True)
class EmbeddingSignal:
    """M x T matrix of per-chunk embeddings plus the grid metadata.

    Every column is either unit L2 norm (within 1e-6) or exactly all-zero
    (non-speech). Instances are immutable after construction.
    """

    data: np.ndarray
    step_seconds: float
    window_seconds: float = 6.0

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"data must be a 2-D matrix with M,T >= 1, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("data contains non-finite entries")
        if self.step_seconds <= 0:
            raise ValueError(f"step_seconds must be positive, got {self.step_seconds}")
        if self.window_seconds < self.step_seconds:
            raise ValueError("window_seconds must be >= step_seconds")
        norms = np.linalg.norm(data, axis=0)
        bad = ~((np.abs(norms - 1.0) <= UNIT_NORM_TOL) | (norms == 0.0))
        if np.any(bad):
            t = int(np.flatnonzero(bad)[0])
            raise ValueError(
                f"column {t} has norm {norms[t]:.9g}; columns must be unit or all-zero"
            )

    @property
    def num_dims(self) -> int:
        return self.data.shape[0]

    @property
    def num_steps(self) -> int:
        return self.data.shape[1]

    def grid(self) -> ChunkGrid:
        return ChunkGrid(self.step_seconds, self.window_seconds, self.num_steps)


def make_chunk_grid(
    duration_seconds: float,
    window_seconds: float = 6.0,
    max_step_seconds: float = 1.0,
    min_chunks: int = 3600,
) -> ChunkGrid:
    """Choose a step size and chunk count for a recording of the given duration.

    The step shrinks below ``max_step_seconds`` when needed so that at least
    ``min_chunks`` full windows fit; the final partial window is excluded.
    """
    if duration_seconds <= window_seconds:
        raise ValueError(
            f"audio shorter than one window ({duration_seconds} s <= {window_seconds} s)"
        )
    if max_step_seconds <= 0 or min_chunks < 1:
        raise ValueError("max_step_seconds must be positive and min_chunks >= 1")
    span = duration_seconds - window_seconds
    step = max_step_seconds if min_chunks == 1 else min(max_step_seconds, span / (min_chunks - 1))
    # relative slack keeps exact-fit counts from losing a chunk to rounding
    ratio = span / step
    num_chunks = int(math.floor(ratio + 1e-9 * max(1.0, ratio))) + 1
    if num_chunks < min_chunks:
        warnings.warn(
            f"duration {duration_seconds} s only permits {num_chunks} chunks "
            f"at step {step} s (requested at least {min_chunks})",
            stacklevel=2,
        )
    return ChunkGrid(step_seconds=step, window_seconds=window_seconds, num_chunks=num_chunks)


def normalize_columns(
    matrix: np.ndarray, step_seconds: float = 1.0, window_seconds: float = 6.0
) -> EmbeddingSignal:
    """Scale every column to unit L2 norm; columns with norm <= 1e-12 become exact zero."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")
    norms = np.linalg.norm(m, axis=0)
    out = np.zeros_like(m)
    keep = norms > ZERO_NORM_EPS
    out[:, keep] = m[:, keep] / norms[keep]
    return EmbeddingSignal(out, step_seconds=step_seconds, window_seconds=window_seconds)


def _atomic_write(path: str | os.PathLike, payload: bytes) -> None:
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def save_signal(signal: EmbeddingSignal, path: str | os.PathLike, format: str = "embsig") -> None:
    """Write a signal to disk in the ``embsig`` binary or ``csv`` text format."""
    m, t = signal.data.shape
    if format == "embsig":
        header = _HEADER.pack(_MAGIC, m, t, signal.step_seconds, signal.window_seconds)
        payload = signal.data.astype("<f4").tobytes(order="F")
        _atomic_write(path, header + payload)
    elif format == "csv":
        lines = [f"{m},{t},{signal.step_seconds:.9g},{signal.window_seconds:.9g}"]
        for col in signal.data.T:
            lines.append(",".join(f"{v:.9g}" for v in col))
        _atomic_write(path, ("\n".join(lines) + "\n").encode("ascii"))
    else:
        raise ValueError(f"unknown format {format!r}; expected 'embsig' or 'csv'")


def load_signal(path: str | os.PathLike, format: str = "auto") -> EmbeddingSignal:
    """Read a signal written by :func:`save_signal`; ``auto`` sniffs the magic bytes."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if format == "auto":
        format = "embsig" if raw[:8] == _MAGIC else "csv"
    if format == "embsig":
        return _parse_binary(raw)
    if format == "csv":
        return _parse_csv(raw)
    raise ValueError(f"unknown format {format!r}; expected 'auto', 'embsig' or 'csv'")


def _parse_binary(raw: bytes) -> EmbeddingSignal:
    if len(raw) < _HEADER.size:
        if raw[: min(len(raw), 8)] != _MAGIC[: min(len(raw), 8)]:
            raise BadMagicError(f"not an EMBSIG01 file (leading bytes {raw[:8]!r})")
        raise TruncatedFileError(f"header truncated at {len(raw)} bytes")
    magic, m, t, step, window = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {_MAGIC!r}")
    expected = m * t * 4
    body = raw[_HEADER.size :]
    if len(body) < expected:
        raise TruncatedFileError(
            f"payload has {len(body) // 4} values, header announces {m}x{t} = {m * t}"
        )
    if len(body) > expected:
        raise DimensionMismatchError(
            f"payload has {len(body)} bytes, header announces {expected}"
        )
    data = np.frombuffer(body, dtype="<f4").reshape((m, t), order="F").astype(np.float64)
    return EmbeddingSignal(data, step_seconds=step, window_seconds=window)


def _parse_csv(raw: bytes) -> EmbeddingSignal:
    lines = [ln for ln in raw.decode("ascii", errors="replace").splitlines() if ln.strip()]
    if not lines:
        raise BadMagicError("empty CSV signal file")
    head = lines[0].split(",")
    if len(head) != 4:
        raise BadMagicError(f"CSV header must hold M,T,step,window; got {lines[0]!r}")
    try:
        m, t = int(head[0]), int(head[1])
        step, window = float(head[2]), float(head[3])
    except ValueError as exc:
        raise BadMagicError(f"unparsable CSV header {lines[0]!r}") from exc
    rows = lines[1:]
    if len(rows) < t:
        raise TruncatedFileError(f"CSV has {len(rows)} column rows, header announces {t}")
    if len(rows) > t:
        raise DimensionMismatchError(f"CSV has {len(rows)} column rows, header announces {t}")
    data = np.empty((m, t), dtype=np.float64)
    for j, row in enumerate(rows):
        vals = row.split(",")
        if len(vals) != m:
            raise DimensionMismatchError(
                f"CSV row {j + 2} has {len(vals)} values, header announces M={m}"
            )
        data[:, j] = [float(v) for v in vals]
    return EmbeddingSignal(data, step_seconds=step, window_seconds=window)
