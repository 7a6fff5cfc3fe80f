"""Feature encoder: per-subframe conditioning features to latent vectors.

The pipeline runs Conv(k=1) -> strided Conv(k=4, s=4) -> causal Conv(k=2)
-> transposed Conv(k=4, s=4) -> GRU, with tanh after every convolution.
The stride-4 downsample plus stride-4 upsample make 4 subframes (20 ms)
the atomic causal unit: features must arrive in multiples of 4, and 4
subframes in always yield 4 latent vectors out.

Feature transforms are causal width-2 convolutions (plus tanh) along the
subframe axis; the model graph chains five of them to derive the latent
chain phi1..phi6.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .config import SUBFRAMES_PER_BLOCK


def _f32(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float32)


@dataclass
class EncoderWeights:
    """Weight views for the encoder stack (conv weights are (out, in, k))."""

    conv1_w: np.ndarray
    conv1_b: np.ndarray
    cpool_w: np.ndarray
    cpool_b: np.ndarray
    conv2_w: np.ndarray
    conv2_b: np.ndarray
    tconv_w: np.ndarray
    tconv_b: np.ndarray
    gru_w_ih: np.ndarray     # stacked (reset, update, candidate) rows
    gru_w_hh: np.ndarray
    gru_b_ih: np.ndarray
    gru_b_hh: np.ndarray

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> "EncoderWeights":
        t = tensors
        return cls(
            conv1_w=t["encoder.conv1.w"], conv1_b=t["encoder.conv1.b"],
            cpool_w=t["encoder.cpool.w"], cpool_b=t["encoder.cpool.b"],
            conv2_w=t["encoder.conv2.w"], conv2_b=t["encoder.conv2.b"],
            tconv_w=t["encoder.tconv.w"], tconv_b=t["encoder.tconv.b"],
            gru_w_ih=t["encoder.gru.w_ih"], gru_w_hh=t["encoder.gru.w_hh"],
            gru_b_ih=t["encoder.gru.b_ih"], gru_b_hh=t["encoder.gru.b_hh"],
        )

    @property
    def n_h(self) -> int:
        return self.cpool_w.shape[0]

    @property
    def n_f(self) -> int:
        return self.conv1_w.shape[1]


@dataclass
class EncoderState:
    conv2_prev: np.ndarray   # previous block's pooled vector
    gru_h: np.ndarray

    @classmethod
    def fresh(cls, n_h: int) -> "EncoderState":
        return cls(conv2_prev=np.zeros(n_h, dtype=np.float32),
                   gru_h=np.zeros(n_h, dtype=np.float32))

    def reset(self) -> None:
        self.conv2_prev[:] = 0.0
        self.gru_h[:] = 0.0


def gru_step(w: EncoderWeights, x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """One recurrent update; gates stacked (reset, update, candidate)."""
    n = h.shape[0]
    gi = w.gru_w_ih @ x + w.gru_b_ih
    gh = w.gru_w_hh @ h + w.gru_b_hh
    r = expit(gi[:n] + gh[:n])
    z = expit(gi[n:2 * n] + gh[n:2 * n])
    cand = np.tanh(gi[2 * n:] + r * gh[2 * n:])
    return ((1.0 - z) * cand + z * h).astype(np.float32)


def encode_block(w: EncoderWeights, features: np.ndarray,
                 state: EncoderState) -> np.ndarray:
    """Encode one 4-subframe block of features into 4 latent vectors.

    ``features`` is (4, n_f); returns (4, n_h). The state carries the
    causal conv history and the recurrent state across blocks.
    """
    features = _f32(features)
    if features.shape != (SUBFRAMES_PER_BLOCK, w.n_f):
        raise ValueError(
            f"expected ({SUBFRAMES_PER_BLOCK}, {w.n_f}) features, got {features.shape}")

    # pointwise conv, subframe rate
    a = np.tanh(features @ w.conv1_w[:, :, 0].T + w.conv1_b)      # (4, n_r)

    # strided downsample: one pooled vector per block
    c = w.cpool_b.copy()
    for j in range(SUBFRAMES_PER_BLOCK):
        c += w.cpool_w[:, :, j] @ a[j]
    c = np.tanh(c)

    # causal width-2 conv over blocks
    d = np.tanh(w.conv2_w[:, :, 0] @ state.conv2_prev
                + w.conv2_w[:, :, 1] @ c + w.conv2_b)
    state.conv2_prev = c

    # transposed conv back to subframe rate: tap i produces subframe i
    e = np.tanh(d @ w.tconv_w[:, :, :].transpose(2, 1, 0) + w.tconv_b)  # (4, n_h)

    out = np.empty((SUBFRAMES_PER_BLOCK, w.n_h), dtype=np.float32)
    h = state.gru_h
    for i in range(SUBFRAMES_PER_BLOCK):
        h = gru_step(w, e[i], h)
        out[i] = h
    state.gru_h = h
    return out


def encode(w: EncoderWeights, features: np.ndarray,
           state: EncoderState) -> np.ndarray:
    """Encode a sequence of feature frames (must be a multiple of 4 long).

    Callers with a trailing partial 20-ms block must zero-pad or buffer it
    themselves; see the stream-level API for the padding policy.
    """
    features = _f32(features)
    if features.ndim != 2:
        raise ValueError("features must be (n_subframes, n_f)")
    n = features.shape[0]
    if n % SUBFRAMES_PER_BLOCK != 0:
        raise ValueError(
            f"feature count {n} is not a multiple of {SUBFRAMES_PER_BLOCK}; "
            "zero-pad the trailing partial block")
    out = np.empty((n, w.n_h), dtype=np.float32)
    for b in range(0, n, SUBFRAMES_PER_BLOCK):
        out[b:b + SUBFRAMES_PER_BLOCK] = encode_block(
            w, features[b:b + SUBFRAMES_PER_BLOCK], state)
    return out


def feature_transform(w: np.ndarray, b: np.ndarray, phi_seq: np.ndarray,
                      prev: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Causal width-2 conv + tanh along the subframe axis.

    ``phi_seq`` is (n, dim); ``prev`` is the last input vector of the
    preceding call (zeros at stream start). Returns (output, new_prev).
    """
    phi_seq = _f32(phi_seq)
    shifted = np.vstack([prev[None, :], phi_seq[:-1]])
    out = np.tanh(shifted @ w[:, :, 0].T + phi_seq @ w[:, :, 1].T + b)
    return out.astype(np.float32), phi_seq[-1].copy()
