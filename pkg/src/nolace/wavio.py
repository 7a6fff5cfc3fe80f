"""WAV I/O restricted to the engine's operating point.

Only 16-bit PCM, mono, 16 kHz RIFF files are accepted; anything else is
rejected with an error naming the constraint instead of being resampled.
"""

from __future__ import annotations

import wave

import numpy as np

from .config import SAMPLE_RATE


class WavFormatError(ValueError):
    pass


def read_wav(path) -> np.ndarray:
    """Read a 16-bit PCM mono 16 kHz WAV into float32 in [-1, 1)."""
    with wave.open(str(path), "rb") as f:
        if f.getcomptype() != "NONE":
            raise WavFormatError(f"{path}: compressed WAV not supported, "
                                 "requires plain 16-bit PCM")
        if f.getsampwidth() != 2:
            raise WavFormatError(f"{path}: requires 16-bit PCM, "
                                 f"got {8 * f.getsampwidth()}-bit")
        if f.getnchannels() != 1:
            raise WavFormatError(f"{path}: requires mono, "
                                 f"got {f.getnchannels()} channels")
        if f.getframerate() != SAMPLE_RATE:
            raise WavFormatError(f"{path}: requires {SAMPLE_RATE} Hz, "
                                 f"got {f.getframerate()} Hz")
        raw = f.readframes(f.getnframes())
    samples = np.frombuffer(raw, dtype="<i2")
    return (samples.astype(np.float32) / 32768.0)


def write_wav(path, signal: np.ndarray) -> None:
    """Write float32 samples as 16-bit PCM mono 16 kHz, clipping to range."""
    x = np.asarray(signal, dtype=np.float32).reshape(-1)
    pcm = np.clip(np.rint(x * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(SAMPLE_RATE)
        f.writeframes(pcm.tobytes())
