"""Adaptive DSP primitives: AdaConv, AdaComb, AdaShape.

All three recompute their coefficients once per 5-ms frame from a latent
vector phi and apply them sample by sample. Kernel shapes are jointly
L2-normalized across input channels, gains are bounded by
``exp(+-gain_limit)`` through a tanh squashing, and coefficients are
linearly crossfaded from the previous frame's filter over the first half
of each frame so transitions stay smooth.

State objects own the per-stream sample history and the previous frame's
filter; functions mutate the state they are handed and never touch
anything shared.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import lfilter

from .config import ENV_BLOCK, EPS_ENV, EPS_NORM, LEAKY_SLOPE, PREEMPH_COEF

__all__ = [
    "KernelSpec",
    "FrameFilter",
    "CombSpec",
    "CombFilter",
    "TemporalEnvelope",
    "AdaShapeParams",
    "AdaConvState",
    "AdaCombState",
    "AdaShapeState",
    "compute_kernel_shape",
    "compute_kernel_gain",
    "frame_filter",
    "adaconv_frame",
    "comb_filter",
    "adacomb_frame",
    "temporal_envelope",
    "adashape_frame",
    "preemphasis",
    "deemphasis",
]


def _as_f32(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float32)


# ---------------------------------------------------------------------------
# parameter bundles
# ---------------------------------------------------------------------------

@dataclass
class KernelSpec:
    """Parameters deriving one adaptive FIR filter bank from a latent vector.

    ``w_shape``/``b_shape`` produce the raw kernel shapes (one tap array per
    output/input channel pair), ``w_gain``/``b_gain`` the per-output-channel
    log-domain gain, limited to ``exp(+-gain_limit)``.
    """

    w_shape: np.ndarray      # (out_ch * in_ch * taps, feat_dim)
    b_shape: np.ndarray      # (out_ch * in_ch * taps,)
    w_gain: np.ndarray       # (out_ch, feat_dim)
    b_gain: np.ndarray       # (out_ch,)
    gain_limit: float
    taps: int
    in_ch: int = 1
    out_ch: int = 1

    def __post_init__(self) -> None:
        if self.taps < 1 or self.in_ch < 1 or self.out_ch < 1:
            raise ValueError("taps, in_ch and out_ch must all be >= 1")
        if not (np.isfinite(self.gain_limit) and self.gain_limit > 0):
            raise ValueError("gain_limit must be positive and finite")
        self.w_shape = _as_f32(self.w_shape).reshape(
            self.out_ch * self.in_ch * self.taps, -1)
        self.b_shape = _as_f32(self.b_shape).reshape(-1)
        self.w_gain = _as_f32(self.w_gain).reshape(self.out_ch, -1)
        self.b_gain = _as_f32(self.b_gain).reshape(-1)
        if self.b_shape.shape[0] != self.out_ch * self.in_ch * self.taps:
            raise ValueError("b_shape size does not match out_ch * in_ch * taps")
        if self.b_gain.shape[0] != self.out_ch:
            raise ValueError("b_gain size does not match out_ch")
        if self.w_gain.shape[1] != self.feat_dim:
            raise ValueError("w_gain feature dimension does not match w_shape")
        for name, t in (("w_shape", self.w_shape), ("b_shape", self.b_shape),
                        ("w_gain", self.w_gain), ("b_gain", self.b_gain)):
            if not np.all(np.isfinite(t)):
                raise ValueError(f"{name} contains non-finite values")

    @property
    def feat_dim(self) -> int:
        return self.w_shape.shape[1]


@dataclass
class FrameFilter:
    """One frame's realized filter: normalized shapes plus bounded gains."""

    shape: np.ndarray        # (out_ch, in_ch, taps), jointly L2-normalized per out_ch
    gain: np.ndarray         # (out_ch,), in [exp(-limit), exp(+limit)]

    def __post_init__(self) -> None:
        self.shape = _as_f32(self.shape)
        self.gain = _as_f32(self.gain)
        if not np.all(np.isfinite(self.shape)):
            raise ValueError("filter shape contains non-finite values")
        if not np.all(self.gain > 0):
            raise ValueError("gains must be positive")

    @property
    def impulse(self) -> np.ndarray:
        """Per-channel impulse response, gain applied."""
        return self.gain[:, None, None] * self.shape


@dataclass
class CombSpec:
    """AdaComb parameters: a single-channel kernel centered on the pitch lag
    plus a separately derived feed-through gain on the undelayed sample."""

    kernel: KernelSpec
    w_ft: np.ndarray         # (feat_dim,)
    b_ft: float
    max_lag: int

    def __post_init__(self) -> None:
        if self.kernel.in_ch != 1 or self.kernel.out_ch != 1:
            raise ValueError("comb kernel must be single channel")
        if self.max_lag < 1:
            raise ValueError("max_lag must be positive")
        self.w_ft = _as_f32(self.w_ft).reshape(-1)
        self.b_ft = float(self.b_ft)
        if self.w_ft.shape[0] != self.kernel.feat_dim:
            raise ValueError("w_ft feature dimension does not match kernel")
        if not np.all(np.isfinite(self.w_ft)) or not np.isfinite(self.b_ft):
            raise ValueError("feed-through parameters must be finite")

    @property
    def taps(self) -> int:
        return self.kernel.taps

    @property
    def center(self) -> int:
        return self.kernel.taps // 2

    @property
    def history_len(self) -> int:
        return self.max_lag + self.kernel.taps


@dataclass
class CombFilter:
    """Realized comb filter for one frame: delayed taps, feed-through, lag."""

    impulse: np.ndarray      # (taps,), gain already applied
    feedthrough: float
    lag: int


@dataclass
class TemporalEnvelope:
    """Blockwise magnitude envelope of one frame, log-domain and centered."""

    blocks: np.ndarray             # (frame/4,) nonnegative block averages
    log_env_centered: np.ndarray   # zero-mean log envelope
    mu: float                      # frame mean of the log envelope


@dataclass
class AdaShapeParams:
    """Two causal width-2 conv layers mapping (envelope, mu, phi) to
    per-sample log gains."""

    w1: np.ndarray           # (hidden, env_blocks + 1 + feat_dim, 2)
    b1: np.ndarray           # (hidden,)
    w2: np.ndarray           # (frame_size, hidden, 2)
    b2: np.ndarray           # (frame_size,)

    def __post_init__(self) -> None:
        self.w1 = _as_f32(self.w1)
        self.b1 = _as_f32(self.b1)
        self.w2 = _as_f32(self.w2)
        self.b2 = _as_f32(self.b2)
        if self.w1.ndim != 3 or self.w1.shape[2] != 2:
            raise ValueError("w1 must be (hidden, in, 2)")
        if self.w2.ndim != 3 or self.w2.shape[2] != 2:
            raise ValueError("w2 must be (frame, hidden, 2)")
        if self.w2.shape[1] != self.w1.shape[0]:
            raise ValueError("conv layer widths do not chain")

    @property
    def frame_size(self) -> int:
        return self.w2.shape[0]

    @property
    def in_dim(self) -> int:
        return self.w1.shape[1]


# ---------------------------------------------------------------------------
# per-stream states
# ---------------------------------------------------------------------------

@dataclass
class AdaConvState:
    history: np.ndarray                 # (in_ch, taps - 1)
    prev: FrameFilter | None = None

    @classmethod
    def fresh(cls, in_ch: int, taps: int) -> "AdaConvState":
        return cls(history=np.zeros((in_ch, taps - 1), dtype=np.float32))

    def reset(self) -> None:
        self.history[:] = 0.0
        self.prev = None


@dataclass
class AdaCombState:
    history: np.ndarray                 # (history_len,)
    prev: CombFilter | None = None

    @classmethod
    def fresh(cls, spec: CombSpec) -> "AdaCombState":
        return cls(history=np.zeros(spec.history_len, dtype=np.float32))

    def reset(self) -> None:
        self.history[:] = 0.0
        self.prev = None


@dataclass
class AdaShapeState:
    prev_in: np.ndarray                 # previous frame's concat vector
    prev_hidden: np.ndarray             # previous frame's hidden activations

    @classmethod
    def fresh(cls, params: AdaShapeParams) -> "AdaShapeState":
        return cls(prev_in=np.zeros(params.in_dim, dtype=np.float32),
                   prev_hidden=np.zeros(params.w1.shape[0], dtype=np.float32))

    def reset(self) -> None:
        self.prev_in[:] = 0.0
        self.prev_hidden[:] = 0.0


# ---------------------------------------------------------------------------
# coefficient computation
# ---------------------------------------------------------------------------

def compute_kernel_shape(spec: KernelSpec, phi: np.ndarray) -> np.ndarray:
    """Jointly normalized kernel shapes for one frame.

    Per output channel, the raw tap arrays of all input channels are divided
    by the sum of their L2 norms, so the norms add up to one. The denominator
    is floored at a small epsilon; an all-zero raw response therefore yields
    an exactly zero kernel instead of NaN.
    """
    phi = _as_f32(phi).reshape(-1)
    if phi.shape[0] != spec.feat_dim:
        raise ValueError(
            f"phi has dimension {phi.shape[0]}, spec expects {spec.feat_dim}")
    raw = (spec.w_shape @ phi + spec.b_shape).reshape(
        spec.out_ch, spec.in_ch, spec.taps)
    norms = np.sqrt(np.sum(raw * raw, axis=2))          # (out, in)
    denom = np.maximum(norms.sum(axis=1), np.float32(EPS_NORM))
    return raw / denom[:, None, None]


def compute_kernel_gain(spec: KernelSpec, phi: np.ndarray) -> np.ndarray:
    """Per-output-channel gain exp(limit * tanh(w.phi + b))."""
    phi = _as_f32(phi).reshape(-1)
    if phi.shape[0] != spec.feat_dim:
        raise ValueError(
            f"phi has dimension {phi.shape[0]}, spec expects {spec.feat_dim}")
    z = spec.w_gain @ phi + spec.b_gain
    return np.exp(np.float32(spec.gain_limit) * np.tanh(z)).astype(np.float32)


def frame_filter(spec: KernelSpec, phi: np.ndarray) -> FrameFilter:
    return FrameFilter(shape=compute_kernel_shape(spec, phi),
                       gain=compute_kernel_gain(spec, phi))


def comb_filter(spec: CombSpec, phi: np.ndarray, lag: int) -> CombFilter:
    """Realize the comb filter for one frame at an integer pitch lag."""
    lag = int(lag)
    if lag < spec.center or lag > spec.max_lag:
        raise ValueError(
            f"pitch lag {lag} outside [{spec.center}, {spec.max_lag}]")
    f = frame_filter(spec.kernel, phi)
    phi32 = _as_f32(phi).reshape(-1)
    z = float(spec.w_ft @ phi32 + spec.b_ft)
    g0 = float(np.exp(spec.kernel.gain_limit * np.tanh(np.float32(z))))
    return CombFilter(impulse=f.impulse[0, 0], feedthrough=g0, lag=lag)


def _crossfade(y_prev: np.ndarray, y_cur: np.ndarray, frame: int) -> np.ndarray:
    """Blend two filtered frames: linear ramp over the first half, current
    filter exact from the midpoint on.

    Evaluated as cur + (1-w)*(prev - cur) so equal filters blend to an
    exactly unchanged frame.
    """
    half = frame // 2
    w = np.arange(half, dtype=np.float32) / np.float32(half)
    out = y_cur.copy()
    out[..., :half] += (1.0 - w) * (y_prev[..., :half] - y_cur[..., :half])
    return out


# ---------------------------------------------------------------------------
# frame operations
# ---------------------------------------------------------------------------

def adaconv_frame(spec: KernelSpec, phi: np.ndarray, x: np.ndarray,
                  state: AdaConvState) -> np.ndarray:
    """Filter one frame of ``in_ch`` channels with the adaptive convolution.

    ``x`` is (in_ch, frame); the state history must hold the previous
    ``taps - 1`` samples per channel. Returns (out_ch, frame).
    """
    x = _as_f32(x)
    if x.ndim != 2 or x.shape[0] != spec.in_ch:
        raise ValueError(f"input must be ({spec.in_ch}, frame)")
    if state.history.shape != (spec.in_ch, spec.taps - 1):
        raise ValueError("state history does not match spec (missing history?)")
    frame = x.shape[1]
    cur = frame_filter(spec, phi)

    ext = np.concatenate([state.history, x], axis=1)
    windows = sliding_window_view(ext, spec.taps, axis=1)   # (in, frame, taps)

    def apply(f: FrameFilter) -> np.ndarray:
        h_rev = f.impulse[:, :, ::-1]
        return np.einsum("itk,oik->ot", windows, h_rev, dtype=np.float32)

    y_cur = apply(cur)
    if state.prev is None:
        y = y_cur
    else:
        y = _crossfade(apply(state.prev), y_cur, frame)

    if spec.taps > 1:
        state.history = ext[:, -(spec.taps - 1):].copy()
    state.prev = cur
    return y


def _comb_apply(ext: np.ndarray, x: np.ndarray, f: CombFilter,
                hist_len: int, center: int) -> np.ndarray:
    taps = f.impulse.shape[0]
    start = hist_len - f.lag + center - (taps - 1)
    windows = sliding_window_view(ext, taps)[start:start + x.shape[0]]
    return f.feedthrough * x + windows @ f.impulse[::-1].astype(np.float32)


def adacomb_frame(spec: CombSpec, phi: np.ndarray, pitch_lag: int,
                  x: np.ndarray, state: AdaCombState) -> np.ndarray:
    """Comb-filter one frame: feed-through plus adaptive taps centered on the
    pitch-lag delay, coefficients crossfaded like adaconv_frame.

    The previous frame's filter keeps its own lag during the crossfade.
    """
    x = _as_f32(x).reshape(-1)
    if state.history.shape[0] != spec.history_len:
        raise ValueError("state history does not match spec (missing history?)")
    cur = comb_filter(spec, phi, pitch_lag)

    ext = np.concatenate([state.history, x])
    y_cur = _comb_apply(ext, x, cur, spec.history_len, spec.center)
    if state.prev is None:
        y = y_cur
    else:
        y_prev = _comb_apply(ext, x, state.prev, spec.history_len, spec.center)
        y = _crossfade(y_prev, y_cur, x.shape[0])

    state.history = ext[-spec.history_len:].copy()
    state.prev = cur
    return y


def temporal_envelope(x: np.ndarray) -> TemporalEnvelope:
    """Blockwise |x| averages of one frame, log-compressed and mean-centered.

    The epsilon floor under the log keeps silent frames finite.
    """
    x = _as_f32(x).reshape(-1)
    if x.shape[0] % ENV_BLOCK != 0:
        raise ValueError(f"frame length must be divisible by {ENV_BLOCK}")
    blocks = np.abs(x).reshape(-1, ENV_BLOCK).mean(axis=1)
    log_env = np.log(blocks + np.float32(EPS_ENV))
    mu = log_env.mean(dtype=np.float32)
    return TemporalEnvelope(blocks=blocks,
                            log_env_centered=(log_env - mu).astype(np.float32),
                            mu=float(mu))


def adashape_frame(params: AdaShapeParams, phi: np.ndarray, x: np.ndarray,
                   state: AdaShapeState) -> np.ndarray:
    """Multiply one frame by per-sample gains derived from its envelope.

    The centered log envelope, its mean and phi are concatenated into one
    vector per frame; two width-2 causal conv layers (previous frame's
    vectors come from the state) produce frame_size log gains.
    """
    x = _as_f32(x).reshape(-1)
    if x.shape[0] != params.frame_size:
        raise ValueError(f"frame length must be {params.frame_size}")
    env = temporal_envelope(x)
    phi = _as_f32(phi).reshape(-1)
    u = np.concatenate([env.log_env_centered,
                        np.float32([env.mu]), phi]).astype(np.float32)
    if u.shape[0] != params.in_dim:
        raise ValueError(f"conditioning vector has size {u.shape[0]}, "
                         f"params expect {params.in_dim}")

    z = params.w1[:, :, 0] @ state.prev_in + params.w1[:, :, 1] @ u + params.b1
    h = np.where(z >= 0, z, np.float32(LEAKY_SLOPE) * z)
    logits = (params.w2[:, :, 0] @ state.prev_hidden
              + params.w2[:, :, 1] @ h + params.b2)
    gains = np.exp(logits)

    state.prev_in = u
    state.prev_hidden = h
    return (gains * x).astype(np.float32)


# ---------------------------------------------------------------------------
# emphasis filters
# ---------------------------------------------------------------------------

def preemphasis(x: np.ndarray, coeff: float = PREEMPH_COEF) -> np.ndarray:
    """High-pass y(t) = x(t) - coeff * x(t-1), zero initial state."""
    x = _as_f32(x)
    y = x.copy()
    y[1:] -= np.float32(coeff) * x[:-1]
    return y


def deemphasis(x: np.ndarray, coeff: float = PREEMPH_COEF) -> np.ndarray:
    """Leaky integrator inverting :func:`preemphasis`."""
    x = np.asarray(x, dtype=np.float64)
    y = lfilter([1.0], [1.0, -float(coeff)], x)
    return y.astype(np.float32)
