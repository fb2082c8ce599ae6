"""Synthetic embedding-signal generator with known ground truth.

Speakers are unit Gaussian embedding vectors; the signal walks through an
alternating turn sequence with geometric turn lengths. Silence appears as
contiguous gaps at turn boundaries, overlap regions sit at speaker
transitions where the incoming speaker joins before the outgoing one stops,
and overlap columns mix the two embeddings by arithmetic average before
renormalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decoder import Diarization, decode
from .optimizer import ActivationMatrix
from .signal_io import ChunkGrid, EmbeddingSignal, normalize_columns


@dataclass(frozen=True)
class SimScenario:
    num_speakers: int
    embedding_dim: int
    num_steps: int
    mean_turn_steps: int = 20
    step_seconds: float = 1.0
    window_seconds: float = 6.0
    overlap_fraction: float = 0.0
    silence_fraction: float = 0.0
    noise_sigma: float = 0.0
    seed: int = 0
    orthogonalize: bool = False

    def __post_init__(self) -> None:
        if self.num_speakers < 1 or self.embedding_dim < 1 or self.num_steps < 1:
            raise ValueError("num_speakers, embedding_dim, num_steps must be positive")
        if self.num_speakers > self.embedding_dim:
            raise ValueError("need num_speakers <= embedding_dim for independent embeddings")
        if self.mean_turn_steps < 1:
            raise ValueError("mean_turn_steps must be positive")
        if not (0 <= self.overlap_fraction < 1 and 0 <= self.silence_fraction < 1):
            raise ValueError("overlap_fraction and silence_fraction must lie in [0, 1)")
        if self.overlap_fraction + self.silence_fraction >= 1:
            raise ValueError("overlap_fraction + silence_fraction must be < 1")
        if self.overlap_fraction > 0 and self.num_speakers < 2:
            raise ValueError("overlap requires at least two speakers")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.step_seconds <= 0 or self.window_seconds < self.step_seconds:
            raise ValueError("need step_seconds > 0 and window_seconds >= step_seconds")


def simulate(scenario: SimScenario) -> tuple[EmbeddingSignal, ActivationMatrix, Diarization]:
    """Generate (signal, ground-truth activations, reference diarization)."""
    rng = np.random.default_rng(scenario.seed)
    s, m, t = scenario.num_speakers, scenario.embedding_dim, scenario.num_steps

    base = rng.standard_normal((m, s))
    if scenario.orthogonalize:
        q, _ = np.linalg.qr(base)
        base = q[:, :s]
    base /= np.linalg.norm(base, axis=0)

    turns = _turn_spans(scenario, rng)
    activity = np.zeros((s, t))
    for speaker, lo, hi in turns:
        activity[speaker, lo:hi] = 1.0

    silence = _silence_mask(scenario, rng, turns)
    activity[:, silence] = 0.0
    _add_overlap(scenario, activity, turns, silence)

    signal = _mix_columns(scenario, rng, base, activity)
    grid = ChunkGrid(scenario.step_seconds, scenario.window_seconds, t)
    ground_truth = ActivationMatrix(activity)
    reference = decode(
        ground_truth, grid, threshold=0.5, min_segment_steps=1, min_mass_fraction=0.0
    )
    return signal, ground_truth, reference


def _turn_spans(scenario: SimScenario, rng: np.random.Generator) -> list[tuple[int, int, int]]:
    """(speaker, start, end) spans covering all steps, adjacent speakers distinct."""
    s, t = scenario.num_speakers, scenario.num_steps
    spans = []
    cursor = 0
    speaker = int(rng.integers(s))
    while cursor < t:
        length = min(int(rng.geometric(1.0 / scenario.mean_turn_steps)), t - cursor)
        if scenario.overlap_fraction > 0 and cursor == 0:
            # overlap lives at transitions, so guarantee at least two turns
            length = min(length, t - 1)
        spans.append((speaker, cursor, cursor + length))
        cursor += length
        if s > 1:
            offset = int(rng.integers(s - 1))
            speaker = offset if offset < speaker else offset + 1
    return spans


def _silence_mask(
    scenario: SimScenario, rng: np.random.Generator, turns: list[tuple[int, int, int]]
) -> np.ndarray:
    """Contiguous silence gaps anchored at turn boundaries, exact step budget."""
    t = scenario.num_steps
    budget = int(scenario.silence_fraction * t)
    silence = np.zeros(t, dtype=bool)
    if budget == 0:
        return silence
    anchors = [lo for _, lo, _ in turns[1:]]
    rng.shuffle(anchors)
    if not anchors:
        anchors = [t - budget]
    per_gap = max(1, -(-budget // len(anchors)))
    remaining = budget
    for anchor in anchors:
        if remaining <= 0:
            break
        for step in range(anchor, min(t, anchor + min(per_gap, remaining))):
            if not silence[step]:
                silence[step] = True
                remaining -= 1
    if remaining > 0:
        for step in range(t - 1, -1, -1):
            if remaining <= 0:
                break
            if not silence[step]:
                silence[step] = True
                remaining -= 1
    return silence


def _add_overlap(
    scenario: SimScenario,
    activity: np.ndarray,
    turns: list[tuple[int, int, int]],
    silence: np.ndarray,
) -> None:
    """Let the incoming speaker join over the tail of the outgoing turn."""
    speech_steps = int(scenario.num_steps - silence.sum())
    budget = int(scenario.overlap_fraction * speech_steps)
    if budget == 0:
        return
    for (prev_speaker, prev_lo, prev_hi), (speaker, _, _) in zip(turns, turns[1:]):
        if budget <= 0:
            break
        if speaker == prev_speaker:
            continue
        candidates = [
            step
            for step in range(prev_hi - 1, prev_lo, -1)
            if not silence[step] and activity[:, step].sum() == 1.0
        ]
        for step in candidates[:budget]:
            activity[speaker, step] = 1.0
        budget -= min(len(candidates), budget)


def _mix_columns(
    scenario: SimScenario,
    rng: np.random.Generator,
    base: np.ndarray,
    activity: np.ndarray,
) -> EmbeddingSignal:
    """Average active embeddings per column, add noise, renormalize nonzero columns."""
    m, t = scenario.embedding_dim, scenario.num_steps
    raw = np.zeros((m, t))
    speech = activity.sum(axis=0) > 0
    for step in np.flatnonzero(speech):
        active = np.flatnonzero(activity[:, step])
        raw[:, step] = base[:, active].mean(axis=1)
    if scenario.noise_sigma > 0:
        raw[:, speech] += rng.normal(0.0, scenario.noise_sigma, (m, int(speech.sum())))
    return normalize_columns(
        raw, step_seconds=scenario.step_seconds, window_seconds=scenario.window_seconds
    )
