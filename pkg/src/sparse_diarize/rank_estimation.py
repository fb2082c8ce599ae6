"""Speaker-budget estimation from the singular-value spectrum of an embedding signal.

The number of distinct speakers shows up as the effective rank of the
signal. The spectrum is sorted descending, its knee located with the
Kneedle difference-curve construction, and the knee position scaled by
2.5x (rounded up, floored at 2) to give a safe upper bound ``k_max`` for
the factorization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal_io import EmbeddingSignal

SPECTRUM_HEAD = 64
DEFAULT_SENSITIVITY = 1.0
SPEAKER_MARGIN = 2.5


@dataclass(frozen=True)
class SpectrumReport:
    singular_values: np.ndarray
    knee_index: int
    k_max: int

    def __post_init__(self) -> None:
        sv = np.asarray(self.singular_values, dtype=np.float64)
        object.__setattr__(self, "singular_values", sv)
        if np.any(sv < 0) or np.any(np.diff(sv) > 0):
            raise ValueError("singular values must be non-negative and descending")
        if not 1 <= self.knee_index <= sv.size:
            raise ValueError(f"knee_index {self.knee_index} outside 1..{sv.size}")
        expected = max(2, int(np.ceil(SPEAKER_MARGIN * self.knee_index)))
        if self.k_max != expected:
            raise ValueError(f"k_max must be ceil(2.5 * knee) floored at 2; expected {expected}")


def singular_values(signal: EmbeddingSignal) -> np.ndarray:
    """All min(M, T) singular values of the signal, descending."""
    return np.linalg.svd(signal.data, compute_uv=False)


def kneedle_knee(values, sensitivity: float = DEFAULT_SENSITIVITY) -> int:
    """Locate the knee of a descending curve; returns a 1-based position.

    Indices and values are min-max normalized, the difference curve
    d = (1 - y_norm) - x is formed, and the knee is the position just before
    the first local maximum of d that later drops by more than
    sensitivity * (mean index spacing). Without a qualifying local maximum
    the global maximum of d is used the same way. A constant curve has no
    knee and yields 1.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size < 3:
        raise ValueError(f"need at least 3 values, got {v.size}")
    if np.any(np.diff(v) > 0):
        raise ValueError("values must be sorted descending")
    if sensitivity <= 0:
        raise ValueError("sensitivity must be positive")
    n = v.size
    spread = v[0] - v[-1]
    if spread <= 0:
        return 1
    x = np.arange(n) / (n - 1)
    y = (v - v[-1]) / spread
    d = (1.0 - y) - x
    threshold_drop = sensitivity / (n - 1)
    for i in range(1, n - 1):
        if d[i] >= d[i - 1] and d[i] > d[i + 1] and np.any(d[i + 1 :] < d[i] - threshold_drop):
            return max(1, i)
    return max(1, int(np.argmax(d)))


def estimate_max_speakers(
    signal: EmbeddingSignal, sensitivity: float = DEFAULT_SENSITIVITY
) -> SpectrumReport:
    """Upper-bound the speaker count from the signal's spectrum knee.

    Only the top ``SPECTRUM_HEAD`` singular values are fed to the knee
    detector; the knee for plausible speaker counts lives in the head of
    the spectrum and a long noise tail only destabilizes it.
    """
    sv = singular_values(signal)
    head = sv[: min(SPECTRUM_HEAD, sv.size)]
    knee = kneedle_knee(head, sensitivity)
    k_max = max(2, int(np.ceil(SPEAKER_MARGIN * knee)))
    return SpectrumReport(singular_values=sv, knee_index=knee, k_max=k_max)
