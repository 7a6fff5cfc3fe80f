"""Dataset plumbing: WAV pairs plus feature sidecars, sliced into clips.

The harness consumes exactly what the engine's tooling produces: 16-bit
PCM mono 16 kHz WAVs and feature sidecar containers. Signals are
pre-emphasized here because both the model and the losses operate in
that domain.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np

from .container import ContainerError, SECTION_FEATURES, decode_features, read_container

FRAME = 80
PREEMPH = 0.85


def read_wav(path) -> np.ndarray:
    with wave.open(str(path), "rb") as f:
        if (f.getnchannels(), f.getsampwidth(), f.getframerate()) != (1, 2, 16000):
            raise ValueError(f"{path}: expected 16-bit PCM mono 16 kHz")
        raw = f.readframes(f.getnframes())
    return np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0


def read_feature_sidecar(path) -> tuple[np.ndarray, np.ndarray]:
    _, _, sections = read_container(path)
    if SECTION_FEATURES not in sections:
        raise ContainerError(f"{path}: no feature section")
    return decode_features(sections[SECTION_FEATURES])


def preemphasis(x: np.ndarray, coeff: float = PREEMPH) -> np.ndarray:
    y = x.astype(np.float32).copy()
    y[1:] -= np.float32(coeff) * x[:-1]
    return y


@dataclass
class Clip:
    clean: np.ndarray      # pre-emphasized, (T,)
    coded: np.ndarray      # pre-emphasized, (T,)
    features: np.ndarray   # (n, n_f)
    lags: np.ndarray       # (n,) int32


class ClipDataset:
    """Aligned (clean, coded, features) windows of a fixed frame count.

    ``clip_frames`` must be a multiple of 4 so every clip is an integer
    number of causal 20-ms blocks.
    """

    def __init__(self, clean_wav, coded_wav, sidecar, clip_frames: int = 100,
                 max_clips: int | None = None):
        if clip_frames % 4 != 0:
            raise ValueError("clip_frames must be a multiple of 4")
        clean = read_wav(clean_wav)
        coded = read_wav(coded_wav)
        if clean.shape != coded.shape:
            raise ValueError("clean and coded signals differ in length")
        feats, lags = read_feature_sidecar(sidecar)
        n = min(feats.shape[0], clean.shape[0] // FRAME)
        self.clean = preemphasis(clean[:n * FRAME])
        self.coded = preemphasis(coded[:n * FRAME])
        self.features = feats[:n]
        self.lags = lags[:n]
        self.clip_frames = clip_frames
        self.n_clips = n // clip_frames
        if max_clips is not None:
            self.n_clips = min(self.n_clips, max_clips)

    def __len__(self) -> int:
        return self.n_clips

    def __getitem__(self, i: int) -> Clip:
        if not 0 <= i < self.n_clips:
            raise IndexError(i)
        f0 = i * self.clip_frames
        f1 = f0 + self.clip_frames
        return Clip(clean=self.clean[f0 * FRAME:f1 * FRAME],
                    coded=self.coded[f0 * FRAME:f1 * FRAME],
                    features=self.features[f0:f1], lags=self.lags[f0:f1])

    def batches(self, batch_size: int, rng: np.random.Generator):
        """Shuffled batches of stacked numpy arrays."""
        order = rng.permutation(self.n_clips)
        for start in range(0, self.n_clips, batch_size):
            idx = order[start:start + batch_size]
            clips = [self[int(i)] for i in idx]
            yield {
                "clean": np.stack([c.clean for c in clips]),
                "coded": np.stack([c.coded for c in clips]),
                "features": np.stack([c.features for c in clips]),
                "lags": np.stack([c.lags for c in clips]),
            }
