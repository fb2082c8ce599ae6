"""Diarization evaluation: DER, purity, coverage, F, and RTTM interchange.

All metrics operate on interval timelines and are exact (no frame
quantization). The DER speaker mapping is the optimal one-to-one
assignment between reference and hypothesis speakers, maximizing total
attributed overlap duration.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

Interval = tuple[float, float]


class RttmParseError(ValueError):
    """Malformed RTTM input; carries the offending line number."""


@dataclass(frozen=True)
class LabeledTimeline:
    """Per-speaker sorted, disjoint intervals over [0, total_duration]."""

    speakers: Mapping[str, tuple[Interval, ...]]
    total_duration: float

    def __post_init__(self) -> None:
        if self.total_duration < 0:
            raise ValueError("total_duration must be non-negative")
        normalized: dict[str, tuple[Interval, ...]] = {}
        for name, intervals in self.speakers.items():
            merged = _merge(intervals)
            for start, end in merged:
                if start < -1e-9 or end > self.total_duration + 1e-9:
                    raise ValueError(
                        f"interval [{start}, {end}) of {name!r} outside "
                        f"[0, {self.total_duration}]"
                    )
            if merged:
                normalized[name] = tuple(merged)
        object.__setattr__(self, "speakers", normalized)

    @classmethod
    def from_segments(
        cls, segments: Iterable[tuple[str, float, float]], total_duration: float
    ) -> "LabeledTimeline":
        speakers: dict[str, list[Interval]] = {}
        for name, start, end in segments:
            speakers.setdefault(name, []).append((start, end))
        return cls(speakers=speakers, total_duration=total_duration)

    def speech_duration(self, speaker: str | None = None) -> float:
        names = [speaker] if speaker is not None else list(self.speakers)
        return sum(_total(self.speakers.get(n, ())) for n in names)


@dataclass(frozen=True)
class DerReport:
    false_alarm_seconds: float
    missed_seconds: float
    confusion_seconds: float
    total_reference_speech_seconds: float
    der: float

    def __post_init__(self) -> None:
        for name in ("false_alarm_seconds", "missed_seconds", "confusion_seconds", "der"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def parse_rttm(text: str, total_duration: float | None = None) -> LabeledTimeline:
    """Parse SPEAKER lines into a timeline; errors carry the 1-based line number.

    The file-id column is not interpreted; all lines land on one timeline.
    When no duration is given the timeline extends to the last segment end.
    """
    segments: list[tuple[str, float, float]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(";"):
            continue
        fields = stripped.split()
        if len(fields) != 10:
            raise RttmParseError(f"line {lineno}: expected 10 fields, got {len(fields)}")
        if fields[0] != "SPEAKER":
            raise RttmParseError(f"line {lineno}: expected SPEAKER record, got {fields[0]!r}")
        try:
            tbeg, tdur = float(fields[3]), float(fields[4])
        except ValueError:
            raise RttmParseError(f"line {lineno}: unparsable tbeg/tdur") from None
        if tbeg < 0 or tdur <= 0:
            raise RttmParseError(f"line {lineno}: non-positive duration or negative start")
        segments.append((fields[7], tbeg, tbeg + tdur))
    if total_duration is None:
        total_duration = max((end for _, _, end in segments), default=0.0)
    return LabeledTimeline.from_segments(segments, total_duration)


def emit_rttm(timeline: LabeledTimeline, file_id: str) -> str:
    """Render a timeline as RTTM SPEAKER lines with millisecond precision."""
    rows = []
    for name, intervals in timeline.speakers.items():
        for start, end in intervals:
            rows.append((start, name, end - start))
    rows.sort()
    return "".join(
        f"SPEAKER {file_id} 1 {start:.3f} {dur:.3f} <NA> <NA> {name} <NA> <NA>\n"
        for start, name, dur in rows
    )


def der(
    reference: LabeledTimeline, hypothesis: LabeledTimeline, collar_seconds: float = 0.0
) -> DerReport:
    """Diarization error rate with exact interval arithmetic.

    With a collar, regions within collar_seconds of any reference segment
    boundary are excluded from scoring. Missed speech counts reference
    speaker time where no hypothesis speaker is active, false alarm counts
    hypothesis speaker time where no reference speaker is active (both with
    multiplicity under overlap), and confusion is the remaining mismatched
    speaker time under the optimal speaker assignment.
    """
    if collar_seconds < 0:
        raise ValueError("collar must be non-negative")
    if not math.isclose(reference.total_duration, hypothesis.total_duration, abs_tol=1e-6):
        raise ValueError(
            f"duration mismatch: reference {reference.total_duration} s, "
            f"hypothesis {hypothesis.total_duration} s"
        )
    region = _scoring_region(reference, collar_seconds)
    ref = {n: _intersect(iv, region) for n, iv in reference.speakers.items()}
    hyp = {n: _intersect(iv, region) for n, iv in hypothesis.speakers.items()}
    ref = {n: iv for n, iv in ref.items() if iv}
    hyp = {n: iv for n, iv in hyp.items() if iv}

    ref_names = sorted(ref)
    hyp_names = sorted(hyp)
    cells = _elementary_cells(ref, hyp, ref_names, hyp_names)

    overlap = np.zeros((len(ref_names), len(hyp_names)))
    for length, ractive, hactive in cells:
        for i in ractive:
            for j in hactive:
                overlap[i, j] += length
    mapping: set[tuple[int, int]] = set()
    if overlap.size:
        rows, cols = linear_sum_assignment(overlap, maximize=True)
        mapping = set(zip(rows.tolist(), cols.tolist()))

    total_ref = missed = false_alarm = total_error = 0.0
    for length, ractive, hactive in cells:
        n_ref, n_hyp = len(ractive), len(hactive)
        total_ref += n_ref * length
        if n_hyp == 0:
            missed += n_ref * length
        if n_ref == 0:
            false_alarm += n_hyp * length
        n_correct = sum(1 for i in ractive for j in hactive if (i, j) in mapping)
        total_error += (max(n_ref, n_hyp) - n_correct) * length
    confusion = max(0.0, total_error - missed - false_alarm)
    if total_ref > 0:
        rate = (false_alarm + missed + confusion) / total_ref
    else:
        rate = 0.0 if total_error == 0 else math.inf
    return DerReport(
        false_alarm_seconds=false_alarm,
        missed_seconds=missed,
        confusion_seconds=confusion,
        total_reference_speech_seconds=total_ref,
        der=rate,
    )


def purity(reference: LabeledTimeline, hypothesis: LabeledTimeline) -> float:
    """Duration fraction of each hypothesis cluster attributable to its best speaker."""
    total = hypothesis.speech_duration()
    if total == 0:
        return 1.0
    best = 0.0
    for cluster in hypothesis.speakers.values():
        best += max(
            (_total(_intersect(cluster, speaker)) for speaker in reference.speakers.values()),
            default=0.0,
        )
    return best / total


def coverage(reference: LabeledTimeline, hypothesis: LabeledTimeline) -> float:
    """Duration fraction of each reference speaker captured by its best cluster."""
    return purity(hypothesis, reference)


def f_score(purity_value: float, coverage_value: float) -> float:
    """Harmonic mean of purity and coverage."""
    if not (0 <= purity_value <= 1 and 0 <= coverage_value <= 1):
        raise ValueError("purity and coverage must lie in [0, 1]")
    s = purity_value + coverage_value
    return 0.0 if s == 0 else 2.0 * purity_value * coverage_value / s


def aggregate_der(reports: Sequence[DerReport]) -> DerReport:
    """Corpus-level DER: sum the per-file components (micro average)."""
    fa = sum(r.false_alarm_seconds for r in reports)
    miss = sum(r.missed_seconds for r in reports)
    conf = sum(r.confusion_seconds for r in reports)
    total = sum(r.total_reference_speech_seconds for r in reports)
    if total > 0:
        rate = (fa + miss + conf) / total
    else:
        rate = 0.0 if fa + miss + conf == 0 else math.inf
    return DerReport(fa, miss, conf, total, rate)


def weighted_mean(values: Sequence[float], weights: Sequence[float]) -> float:
    """Duration-weighted mean used for corpus-level purity/coverage."""
    if len(values) != len(weights) or not values:
        raise ValueError("values and weights must be equal-length and non-empty")
    wsum = sum(weights)
    if wsum <= 0:
        return float(np.mean(values))
    return float(sum(v * w for v, w in zip(values, weights)) / wsum)


def _merge(intervals: Iterable[Interval]) -> list[Interval]:
    """Sort and merge overlapping or touching intervals; drop empty ones."""
    out: list[Interval] = []
    for start, end in sorted(intervals):
        if end <= start:
            if end < start:
                raise ValueError(f"interval [{start}, {end}) has negative length")
            continue
        if out and start <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], end))
        else:
            out.append((start, end))
    return out


def _total(intervals: Iterable[Interval]) -> float:
    return sum(end - start for start, end in intervals)


def _intersect(xs: Sequence[Interval], ys: Sequence[Interval]) -> tuple[Interval, ...]:
    out: list[Interval] = []
    i = j = 0
    while i < len(xs) and j < len(ys):
        lo = max(xs[i][0], ys[j][0])
        hi = min(xs[i][1], ys[j][1])
        if hi > lo:
            out.append((lo, hi))
        if xs[i][1] <= ys[j][1]:
            i += 1
        else:
            j += 1
    return tuple(out)


def _subtract(xs: Sequence[Interval], ys: Sequence[Interval]) -> tuple[Interval, ...]:
    out: list[Interval] = []
    ys = list(ys)
    for start, end in xs:
        cursor = start
        for ystart, yend in ys:
            if yend <= cursor or ystart >= end:
                continue
            if ystart > cursor:
                out.append((cursor, ystart))
            cursor = max(cursor, yend)
            if cursor >= end:
                break
        if cursor < end:
            out.append((cursor, end))
    return tuple(out)


def _scoring_region(reference: LabeledTimeline, collar: float) -> tuple[Interval, ...]:
    full = ((0.0, reference.total_duration),)
    if collar == 0:
        return full
    exclusions: list[Interval] = []
    for intervals in reference.speakers.values():
        for start, end in intervals:
            exclusions.append((start - collar, start + collar))
            exclusions.append((end - collar, end + collar))
    return _subtract(full, _merge(exclusions))


def _elementary_cells(
    ref: Mapping[str, Sequence[Interval]],
    hyp: Mapping[str, Sequence[Interval]],
    ref_names: Sequence[str],
    hyp_names: Sequence[str],
) -> list[tuple[float, tuple[int, ...], tuple[int, ...]]]:
    """Split time into cells where the active speaker sets are constant.

    Returns (length, active reference indices, active hypothesis indices)
    per cell, skipping cells where nobody is active.
    """
    bounds: set[float] = set()
    for intervals in list(ref.values()) + list(hyp.values()):
        for start, end in intervals:
            bounds.add(start)
            bounds.add(end)
    edges = sorted(bounds)
    cells = []
    for lo, hi in zip(edges, edges[1:]):
        if hi <= lo:
            continue
        mid = 0.5 * (lo + hi)
        ractive = tuple(
            i for i, n in enumerate(ref_names) if _contains(ref[n], mid)
        )
        hactive = tuple(
            j for j, n in enumerate(hyp_names) if _contains(hyp[n], mid)
        )
        if ractive or hactive:
            cells.append((hi - lo, ractive, hactive))
    return cells


def _contains(intervals: Sequence[Interval], point: float) -> bool:
    idx = bisect_right([start for start, _ in intervals], point) - 1
    return idx >= 0 and point < intervals[idx][1]
