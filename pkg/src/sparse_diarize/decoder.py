"""Conversion of a converged activation matrix into timed, possibly overlapping segments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .optimizer import ActivationMatrix, _as_array
from .signal_io import ChunkGrid

DEFAULT_THRESHOLD = 0.4
DEFAULT_MIN_SEGMENT_STEPS = 2
DEFAULT_MIN_MASS_FRACTION = 0.05


@dataclass(frozen=True)
class Segment:
    speaker: str
    start_seconds: float
    end_seconds: float

    def __post_init__(self) -> None:
        if not self.speaker:
            raise ValueError("speaker label must be non-empty")
        if not self.end_seconds > self.start_seconds:
            raise ValueError(
                f"segment end {self.end_seconds} must exceed start {self.start_seconds}"
            )
        if self.start_seconds < 0:
            raise ValueError("segment start must be non-negative")

    @property
    def duration(self) -> float:
        return self.end_seconds - self.start_seconds


@dataclass(frozen=True)
class Diarization:
    """A set of speaker segments over [0, total_duration].

    Segments of one speaker never overlap or touch; segments of different
    speakers may overlap freely.
    """

    segments: tuple[Segment, ...]
    total_duration: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.total_duration <= 0:
            raise ValueError("total_duration must be positive")
        by_speaker: dict[str, list[Segment]] = {}
        for seg in self.segments:
            if seg.end_seconds > self.total_duration + 1e-9:
                raise ValueError(
                    f"segment ends at {seg.end_seconds} beyond duration {self.total_duration}"
                )
            by_speaker.setdefault(seg.speaker, []).append(seg)
        for speaker, segs in by_speaker.items():
            segs.sort(key=lambda s: s.start_seconds)
            for prev, nxt in zip(segs, segs[1:]):
                if nxt.start_seconds < prev.end_seconds:
                    raise ValueError(f"overlapping segments for speaker {speaker!r}")
                if nxt.start_seconds == prev.end_seconds:
                    raise ValueError(f"unmerged adjacent segments for speaker {speaker!r}")

    def speakers(self) -> list[str]:
        return sorted({seg.speaker for seg in self.segments})

    def speech_duration(self, speaker: str | None = None) -> float:
        return sum(
            seg.duration for seg in self.segments if speaker is None or seg.speaker == speaker
        )


def prune_speakers(a, min_fraction: float = DEFAULT_MIN_MASS_FRACTION) -> set[int]:
    """Row indices whose total activation mass reaches min_fraction of the largest row's."""
    if not 0.0 <= min_fraction <= 1.0:
        raise ValueError("min_fraction must lie in [0, 1]")
    arr = _as_array(a)
    mass = np.abs(arr).sum(axis=1)
    top = mass.max() if mass.size else 0.0
    if top <= 0.0:
        return set()
    return {int(r) for r in np.flatnonzero(mass >= min_fraction * top)}


def decode(
    a: ActivationMatrix,
    grid: ChunkGrid,
    threshold: float = DEFAULT_THRESHOLD,
    min_segment_steps: int = DEFAULT_MIN_SEGMENT_STEPS,
    min_mass_fraction: float = DEFAULT_MIN_MASS_FRACTION,
) -> Diarization:
    """Threshold activations into maximal runs and emit them as timed segments.

    A speaker is active at step t when its activation is >= threshold; runs
    shorter than ``min_segment_steps`` are dropped, as are speakers pruned by
    :func:`prune_speakers`. Each surviving column t spans the step interval
    [t*step, (t+1)*step). Labels are assigned as "spk00", "spk01", ... in
    descending order of total activation mass.
    """
    arr = _as_array(a)
    k, t_dim = arr.shape
    if t_dim != grid.num_chunks:
        raise ValueError(f"activation has {t_dim} steps but grid has {grid.num_chunks} chunks")
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    if min_segment_steps < 1:
        raise ValueError("min_segment_steps must be >= 1")

    retained = prune_speakers(arr, min_mass_fraction)
    mass = np.abs(arr).sum(axis=1)
    order = sorted(retained, key=lambda r: (-mass[r], r))
    labels = {r: f"spk{i:02d}" for i, r in enumerate(order)}

    step = grid.step_seconds
    segments: list[Segment] = []
    for r in order:
        active = arr[r] >= threshold
        for lo, hi in _runs(active):
            if hi - lo >= min_segment_steps:
                segments.append(Segment(labels[r], lo * step, hi * step))
    segments.sort(key=lambda s: (s.start_seconds, s.speaker))
    return Diarization(segments=tuple(segments), total_duration=grid.total_duration)


def _runs(active: np.ndarray) -> list[tuple[int, int]]:
    """Maximal [lo, hi) index runs of True values."""
    edges = np.flatnonzero(np.diff(np.concatenate(([False], active, [False]))))
    return list(zip(edges[0::2].tolist(), edges[1::2].tolist()))
