import struct
import subprocess
import sys
import wave
from pathlib import Path

import numpy as np
import pytest

SR = 16_000


def synth_speechlike(seconds: float, seed: int = 0) -> np.ndarray:
    """Harmonic-plus-noise signal with drifting f0 and amplitude."""
    rng = np.random.default_rng(seed)
    t = np.arange(int(seconds * SR))
    f0 = 120 + 60 * np.sin(2 * np.pi * 0.13 * t / SR)
    phase = 2 * np.pi * np.cumsum(f0) / SR
    x = np.zeros(t.shape[0])
    for k, amp in ((1, 1.0), (2, 0.55), (3, 0.35), (4, 0.18)):
        x += amp * np.sin(k * phase + 0.5 * k)
    x *= 0.5 + 0.5 * np.sin(2 * np.pi * 1.7 * t / SR + 1.0)
    x += 0.03 * rng.standard_normal(t.shape[0])
    return (0.4 * x / np.max(np.abs(x))).astype(np.float32)


def write_wav(path, x: np.ndarray) -> None:
    pcm = np.clip(np.rint(x * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(SR)
        f.writeframes(pcm.tobytes())


def engine(*args) -> subprocess.CompletedProcess:
    """Run the installed engine CLI."""
    return subprocess.run([sys.executable, "-m", "nolace", *args],
                          capture_output=True, text=True)


@pytest.fixture(scope="session")
def dataset_files(tmp_path_factory):
    """Clean/coded WAVs plus feature sidecar for 200 half-second clips,
    produced through the engine's own tooling."""
    root = tmp_path_factory.mktemp("clips")
    clean = root / "clean.wav"
    coded = root / "coded.wav"
    feats = root / "feats.bin"
    write_wav(clean, synth_speechlike(100.0, seed=1))
    r1 = engine("degrade", "--input", str(clean), "--output", str(coded),
                "--bitrate", "6", "--strength", "0.7", "--seed", "2")
    r2 = engine("features", "--input", str(clean), "--degraded", str(coded),
                "--output", str(feats), "--bitrate", "6")
    assert r1.returncode == 0, r1.stderr
    assert r2.returncode == 0, r2.stderr
    return {"clean": clean, "coded": coded, "features": feats}
