"""Frame-level features, the built-in embedder/detector, and the model registry.

The built-in models are deliberately self-contained so extraction works
deterministically offline:

* ``spectral``: pools per-frame log-mel statistics (mean and standard
  deviation per band) over each chunk into one vector.
* ``energy``: marks a frame as speech when its RMS level clears a dBFS
  threshold; a chunk counts as speech when the median frame probability
  reaches 0.5.

Pretrained utterance embedders and audio-event detectors plug in through
:func:`register_embedder` / :func:`register_detector` under their own
identifiers. The identifiers for the usual pretrained choices are
pre-registered but raise :class:`ModelLoadError` until weights and a
loader are provided.
"""

from __future__ import annotations

import numpy as np

FRAME_SECONDS = 0.025
HOP_SECONDS = 0.010

_LOG_EPS = 1e-10
_DB_EPS = 1e-12


class ModelLoadError(RuntimeError):
    """A pluggable model identifier exists but its weights cannot be loaded."""


def frame_signal(samples: np.ndarray, rate: int) -> np.ndarray:
    """(num_frames, frame_len) view of 25 ms frames at a 10 ms hop."""
    frame_len = int(round(FRAME_SECONDS * rate))
    hop_len = int(round(HOP_SECONDS * rate))
    if samples.size < frame_len:
        return np.empty((0, frame_len))
    return np.lib.stride_tricks.sliding_window_view(samples, frame_len)[::hop_len]


def mel_filterbank(n_mels: int, n_fft: int, rate: int) -> np.ndarray:
    """Triangular mel filters evaluated on the rfft bin frequencies."""

    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)

    edges = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(rate / 2.0), n_mels + 2))
    bins = np.linspace(0.0, rate / 2.0, n_fft // 2 + 1)
    lower = edges[:-2, None]
    center = edges[1:-1, None]
    upper = edges[2:, None]
    up = (bins[None, :] - lower) / np.maximum(center - lower, 1e-9)
    down = (upper - bins[None, :]) / np.maximum(upper - center, 1e-9)
    return np.maximum(0.0, np.minimum(up, down))


class SpectralEmbedder:
    """Chunk embeddings from pooled log-mel statistics; output dim = 2 * n_mels."""

    identifier = "spectral"

    def __init__(self, dim: int = 128):
        if dim < 16 or dim % 2:
            raise ValueError(f"embedding dim must be an even integer >= 16, got {dim}")
        self.dim = dim
        self._center = None
        self._cums = None
        self._cums_sq = None
        self._num_frames = 0

    def prepare(self, samples: np.ndarray, rate: int) -> None:
        frames = frame_signal(samples, rate)
        self._num_frames = frames.shape[0]
        n_mels = self.dim // 2
        if self._num_frames == 0:
            logmel = np.empty((0, n_mels))
        else:
            n_fft = 1 << (frames.shape[1] - 1).bit_length()
            windowed = frames * np.hanning(frames.shape[1])
            power = np.abs(np.fft.rfft(windowed, n=n_fft, axis=1)) ** 2
            bank = mel_filterbank(n_mels, n_fft, rate)
            logmel = np.log(power @ bank.T + _LOG_EPS)
        # prefix sums over per-band centered values let every chunk pool in
        # O(1) regardless of overlap; centering tames cancellation in the
        # variance term
        self._center = logmel.mean(axis=0) if logmel.size else np.zeros(n_mels)
        centered = logmel - self._center
        self._cums = np.vstack([np.zeros((1, n_mels)), np.cumsum(centered, axis=0)])
        self._cums_sq = np.vstack([np.zeros((1, n_mels)), np.cumsum(centered**2, axis=0)])

    @property
    def num_frames(self) -> int:
        return self._num_frames

    def pooled(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """(len(lo), dim) mean/std pooling over frame ranges [lo, hi)."""
        if self._cums is None:
            raise RuntimeError("prepare() must run before pooling")
        lo = np.asarray(lo, dtype=np.int64)
        hi = np.asarray(hi, dtype=np.int64)
        counts = np.maximum(hi - lo, 1).astype(np.float64)[:, None]
        sums = self._cums[hi] - self._cums[lo]
        sums_sq = self._cums_sq[hi] - self._cums_sq[lo]
        centered_mean = sums / counts
        var = np.maximum(sums_sq / counts - centered_mean**2, 0.0)
        out = np.concatenate([self._center + centered_mean, np.sqrt(var)], axis=1)
        out[(hi - lo) <= 0] = 0.0
        return out


class EnergyDetector:
    """Frame-RMS voice activity with a fixed dBFS threshold."""

    identifier = "energy"

    def __init__(self, threshold_db: float = -40.0):
        self.threshold_db = float(threshold_db)
        self._probs = None

    def prepare(self, samples: np.ndarray, rate: int) -> None:
        frames = frame_signal(samples, rate)
        if frames.shape[0] == 0:
            self._probs = np.empty(0)
            return
        rms = np.sqrt(np.mean(frames**2, axis=1))
        level_db = 20.0 * np.log10(rms + _DB_EPS)
        self._probs = (level_db > self.threshold_db).astype(np.float64)

    @property
    def num_frames(self) -> int:
        return 0 if self._probs is None else int(self._probs.size)

    def median_probability(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        if self._probs is None:
            raise RuntimeError("prepare() must run before querying probabilities")
        out = np.zeros(len(lo))
        for i, (a, b) in enumerate(zip(lo, hi)):
            if b > a:
                out[i] = float(np.median(self._probs[a:b]))
        return out


def _missing_model(name: str, hint: str):
    def factory(**_kwargs):
        raise ModelLoadError(
            f"no local weights for {name!r}; {hint} and register a loader "
            f"under this identifier"
        )

    return factory


_EMBEDDERS = {
    "spectral": lambda **kw: SpectralEmbedder(**kw),
    "vggvox": _missing_model("vggvox", "install a VoxCeleb-trained utterance embedder"),
}

_DETECTORS = {
    "energy": lambda **kw: EnergyDetector(**kw),
    "yamnet": _missing_model("yamnet", "install an audio-event classifier"),
}


def register_embedder(name: str, factory) -> None:
    _EMBEDDERS[name] = factory


def register_detector(name: str, factory) -> None:
    _DETECTORS[name] = factory


def available_embedders() -> list[str]:
    return sorted(_EMBEDDERS)


def available_detectors() -> list[str]:
    return sorted(_DETECTORS)


def make_embedder(name: str, **kwargs):
    if name not in _EMBEDDERS:
        raise ModelLoadError(f"unknown embedder {name!r}; available: {available_embedders()}")
    return _EMBEDDERS[name](**kwargs)


def make_detector(name: str, **kwargs):
    if name not in _DETECTORS:
        raise ModelLoadError(f"unknown detector {name!r}; available: {available_detectors()}")
    return _DETECTORS[name](**kwargs)
