"""PCM WAV decoding to mono float64 samples in [-1, 1]."""

from __future__ import annotations

import os
import wave

import numpy as np


class UnsupportedAudioError(ValueError):
    """The file is not a decodable PCM WAV."""


def read_wav(path: str | os.PathLike) -> tuple[np.ndarray, int]:
    """Decode a PCM WAV file; returns (mono samples, sample rate).

    Multichannel audio is averaged down to mono. 8, 16, 24, and 32-bit
    integer PCM are supported.
    """
    try:
        with wave.open(os.fspath(path), "rb") as fh:
            channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            frames = fh.readframes(fh.getnframes())
    except wave.Error as exc:
        raise UnsupportedAudioError(f"cannot decode {path}: {exc}") from exc
    if rate <= 0:
        raise UnsupportedAudioError(f"{path}: invalid sample rate {rate}")

    if width == 1:
        samples = np.frombuffer(frames, dtype=np.uint8).astype(np.float64)
        samples = (samples - 128.0) / 128.0
    elif width == 2:
        samples = np.frombuffer(frames, dtype="<i2").astype(np.float64) / 32768.0
    elif width == 3:
        raw = np.frombuffer(frames, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        value = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
        value = np.where(value >= 1 << 23, value - (1 << 24), value)
        samples = value.astype(np.float64) / float(1 << 23)
    elif width == 4:
        samples = np.frombuffer(frames, dtype="<i4").astype(np.float64) / float(1 << 31)
    else:
        raise UnsupportedAudioError(f"{path}: unsupported sample width {width} bytes")

    if channels > 1:
        samples = samples.reshape(-1, channels).mean(axis=1)
    return samples, rate
