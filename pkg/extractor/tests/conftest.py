import wave

import numpy as np
import pytest

RATE = 16000


def synth_speech(duration_seconds: float, rate: int = RATE, seed: int = 0) -> np.ndarray:
    """Deterministic speech-like audio: gliding harmonics, syllabic rhythm, pauses."""
    rng = np.random.default_rng(seed)
    n = int(duration_seconds * rate)
    t = np.arange(n) / rate
    f0 = 120.0 + 25.0 * np.sin(2 * np.pi * 0.4 * t) + rng.normal(0, 1.5, n)
    phase = 2 * np.pi * np.cumsum(f0) / rate
    weights = [1.0, 0.7, 0.8, 0.45, 0.5, 0.3, 0.2, 0.12]
    voiced = sum(w * np.sin((h + 1) * phase) for h, w in enumerate(weights))
    voiced += 0.05 * rng.normal(0, 1, n)  # breath noise
    syllables = 0.55 + 0.45 * np.sin(2 * np.pi * 3.5 * t + 0.7)
    # utterance gaps: silence between phrase-like stretches
    envelope = np.ones(n)
    gap_starts = np.arange(2.7, duration_seconds - 1.0, 5.3)
    for gap in gap_starts:
        a, b = int(gap * rate), int(min(n, (gap + 0.6) * rate))
        envelope[a:b] = 0.0
    audio = voiced * syllables * envelope
    peak = np.abs(audio).max()
    return 0.3 * audio / peak if peak > 0 else audio


def write_wav(path, samples: np.ndarray, rate: int = RATE) -> None:
    pcm = np.clip(samples, -1.0, 1.0)
    pcm = (pcm * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(pcm.tobytes())


@pytest.fixture(scope="session")
def speech_wav(tmp_path_factory):
    path = tmp_path_factory.mktemp("audio") / "speech30.wav"
    write_wav(path, synth_speech(30.0))
    return path


@pytest.fixture(scope="session")
def silence_wav(tmp_path_factory):
    path = tmp_path_factory.mktemp("audio") / "silence30.wav"
    write_wav(path, np.zeros(int(30.0 * RATE)))
    return path
