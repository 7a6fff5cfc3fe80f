"""The complete enhancement graphs and their streaming state.

Signal path (nolace):

    adacomb1 -> adacomb2 -> adaconv1 (1->2)
        -> [ch1 bypass | ch2 -> adashape1] -> adaconv2 (2->2)
        -> [ch1 bypass | ch2 -> adashape2] -> adaconv3 (2->2)
        -> [ch1 bypass | ch2 -> adashape3] -> adaconv4 (2->1) -> output

Conditioning: the encoder emits phi1 per subframe; five width-2 feature
transforms derive phi2..phi6, and each processing stage reads the chain
member given by config.STAGE_LATENTS. The lace variant stops after a
single-channel adaconv1 and conditions every stage on phi1.

Everything operates on the pre-emphasized signal domain; de-emphasis is
the caller's job. Processing is per 20-ms block, which makes chunked and
whole-signal runs bit-identical by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp
from .config import (COMB_STAGES, DEFAULT_FALLBACK_LAG, FTRANS_STAGES,
                     MAX_PITCH_LAG, MIN_PITCH_LAG, SHAPE_STAGES, STAGE_LATENTS,
                     ModelConfig)
from .encoder import EncoderState, EncoderWeights, encode_block, feature_transform
from .weights import ModelWeights

__all__ = ["StreamState", "enhance_block", "enhance_stream", "latent_chain",
           "signal_block", "Runtime"]


@dataclass
class Runtime:
    """Typed, validated views over a weight container, built per call."""

    config: ModelConfig
    encoder: EncoderWeights
    combs: dict[str, dsp.CombSpec]
    convs: dict[str, dsp.KernelSpec]
    shapes: dict[str, dsp.AdaShapeParams]
    ftrans: list[tuple[np.ndarray, np.ndarray]]

    @classmethod
    def build(cls, weights: ModelWeights) -> "Runtime":
        cfg = weights.config
        t = weights.tensors
        combs = {}
        for name in COMB_STAGES:
            kernel = dsp.KernelSpec(
                w_shape=t[f"{name}.w_shape"], b_shape=t[f"{name}.b_shape"],
                w_gain=t[f"{name}.w_gain"], b_gain=t[f"{name}.b_gain"],
                gain_limit=cfg.gain_limit[name], taps=cfg.taps[name])
            combs[name] = dsp.CombSpec(kernel=kernel, w_ft=t[f"{name}.w_ft"],
                                       b_ft=float(t[f"{name}.b_ft"][0]),
                                       max_lag=cfg.max_lag)
        convs = {}
        for name, (c_in, c_out) in cfg.conv_stages().items():
            convs[name] = dsp.KernelSpec(
                w_shape=t[f"{name}.w_shape"], b_shape=t[f"{name}.b_shape"],
                w_gain=t[f"{name}.w_gain"], b_gain=t[f"{name}.b_gain"],
                gain_limit=cfg.gain_limit[name], taps=cfg.taps[name],
                in_ch=c_in, out_ch=c_out)
        shapes = {}
        ftrans = []
        if cfg.variant == "nolace":
            for name in SHAPE_STAGES:
                shapes[name] = dsp.AdaShapeParams(
                    w1=t[f"{name}.conv1.w"], b1=t[f"{name}.conv1.b"],
                    w2=t[f"{name}.conv2.w"], b2=t[f"{name}.conv2.b"])
            ftrans = [(t[f"{name}.w"], t[f"{name}.b"]) for name in FTRANS_STAGES]
        return cls(config=cfg, encoder=EncoderWeights.from_tensors(t),
                   combs=combs, convs=convs, shapes=shapes, ftrans=ftrans)


@dataclass
class StreamState:
    """Everything carried across blocks for one stream."""

    config: ModelConfig
    encoder: EncoderState
    ftrans_prev: list[np.ndarray]
    comb_states: dict[str, dsp.AdaCombState]
    conv_states: dict[str, dsp.AdaConvState]
    shape_states: dict[str, dsp.AdaShapeState]
    last_lag: int = DEFAULT_FALLBACK_LAG
    samples_seen: int = 0

    @classmethod
    def fresh(cls, weights_or_config: ModelWeights | ModelConfig) -> "StreamState":
        cfg = (weights_or_config.config
               if isinstance(weights_or_config, ModelWeights) else weights_or_config)
        n_h = cfg.n_h
        comb_states = {}
        for name in COMB_STAGES:
            taps = cfg.taps[name]
            hist = cfg.max_lag + taps
            comb_states[name] = dsp.AdaCombState(
                history=np.zeros(hist, dtype=np.float32))
        conv_states = {
            name: dsp.AdaConvState.fresh(c_in, cfg.taps[name])
            for name, (c_in, _) in cfg.conv_stages().items()}
        shape_states = {}
        ftrans_prev = []
        if cfg.variant == "nolace":
            env_in = cfg.env_blocks + 1 + n_h
            for name in SHAPE_STAGES:
                shape_states[name] = dsp.AdaShapeState(
                    prev_in=np.zeros(env_in, dtype=np.float32),
                    prev_hidden=np.zeros(cfg.adashape_hidden, dtype=np.float32))
            ftrans_prev = [np.zeros(n_h, dtype=np.float32) for _ in FTRANS_STAGES]
        return cls(config=cfg, encoder=EncoderState.fresh(n_h),
                   ftrans_prev=ftrans_prev, comb_states=comb_states,
                   conv_states=conv_states, shape_states=shape_states)

    def reset(self) -> None:
        self.encoder.reset()
        for p in self.ftrans_prev:
            p[:] = 0.0
        for s in self.comb_states.values():
            s.reset()
        for s in self.conv_states.values():
            s.reset()
        for s in self.shape_states.values():
            s.reset()
        self.last_lag = DEFAULT_FALLBACK_LAG
        self.samples_seen = 0

    def __eq__(self, other) -> bool:
        if not isinstance(other, StreamState):
            return NotImplemented
        if self.config != other.config or self.last_lag != other.last_lag \
                or self.samples_seen != other.samples_seen:
            return False

        def arr_eq(a, b):
            return np.array_equal(a, b)

        def filt_eq(a, b):
            if (a is None) != (b is None):
                return False
            if a is None:
                return True
            if isinstance(a, dsp.CombFilter):
                return (a.lag == b.lag and a.feedthrough == b.feedthrough
                        and arr_eq(a.impulse, b.impulse))
            return arr_eq(a.shape, b.shape) and arr_eq(a.gain, b.gain)

        if not (arr_eq(self.encoder.conv2_prev, other.encoder.conv2_prev)
                and arr_eq(self.encoder.gru_h, other.encoder.gru_h)):
            return False
        if len(self.ftrans_prev) != len(other.ftrans_prev) or not all(
                arr_eq(a, b) for a, b in zip(self.ftrans_prev, other.ftrans_prev)):
            return False
        for name in self.comb_states:
            a, b = self.comb_states[name], other.comb_states.get(name)
            if b is None or not arr_eq(a.history, b.history) or not filt_eq(a.prev, b.prev):
                return False
        for name in self.conv_states:
            a, b = self.conv_states[name], other.conv_states.get(name)
            if b is None or not arr_eq(a.history, b.history) or not filt_eq(a.prev, b.prev):
                return False
        for name in self.shape_states:
            a, b = self.shape_states[name], other.shape_states.get(name)
            if b is None or not arr_eq(a.prev_in, b.prev_in) \
                    or not arr_eq(a.prev_hidden, b.prev_hidden):
                return False
        return True


def _effective_lag(lag: int, state: StreamState) -> int:
    """Voiced lags are clipped to the admissible range; unvoiced frames
    (lag 0) reuse the last voiced lag."""
    lag = int(lag)
    if lag > 0:
        lag = min(max(lag, MIN_PITCH_LAG), MAX_PITCH_LAG)
        state.last_lag = lag
        return lag
    return state.last_lag


def latent_chain(rt: Runtime, features: np.ndarray,
                 state: StreamState) -> np.ndarray:
    """Latent vectors for one block: (n_latents, 4, n_h).

    lace yields a single chain member (phi1); nolace yields six.
    """
    phi1 = encode_block(rt.encoder, features, state.encoder)
    if rt.config.variant == "lace":
        return phi1[None, :, :]
    chain = [phi1]
    for k, (w, b) in enumerate(rt.ftrans):
        nxt, state.ftrans_prev[k] = feature_transform(
            w, b, chain[-1], state.ftrans_prev[k])
        chain.append(nxt)
    return np.stack(chain)


def signal_block(rt: Runtime, chain: np.ndarray, pitch_lags: np.ndarray,
                 signal: np.ndarray, state: StreamState) -> np.ndarray:
    """Run the signal-processing stages over one block given a latent chain.

    Exposed separately so the latent chain can be overridden, e.g. to tie
    chain members together when comparing variants.
    """
    cfg = rt.config
    n_sub, frame = cfg.subframes_per_block, cfg.frame_size
    lat = (lambda stage: 0) if cfg.variant == "lace" else STAGE_LATENTS.__getitem__
    out = np.empty(n_sub * frame, dtype=np.float32)

    for i in range(n_sub):
        x = signal[i * frame:(i + 1) * frame]
        lag = _effective_lag(pitch_lags[i], state)
        s = dsp.adacomb_frame(rt.combs["adacomb1"], chain[lat("adacomb1")][i],
                              lag, x, state.comb_states["adacomb1"])
        s = dsp.adacomb_frame(rt.combs["adacomb2"], chain[lat("adacomb2")][i],
                              lag, s, state.comb_states["adacomb2"])
        y = dsp.adaconv_frame(rt.convs["adaconv1"], chain[lat("adaconv1")][i],
                              s[None, :], state.conv_states["adaconv1"])
        if cfg.variant == "nolace":
            for shape_name, conv_name in (("adashape1", "adaconv2"),
                                          ("adashape2", "adaconv3"),
                                          ("adashape3", "adaconv4")):
                shaped = dsp.adashape_frame(
                    rt.shapes[shape_name], chain[lat(shape_name)][i],
                    y[1], state.shape_states[shape_name])
                y = dsp.adaconv_frame(
                    rt.convs[conv_name], chain[lat(conv_name)][i],
                    np.stack([y[0], shaped]), state.conv_states[conv_name])
        out[i * frame:(i + 1) * frame] = y[0]
    state.samples_seen += n_sub * frame
    return out


def enhance_block(weights: ModelWeights, signal: np.ndarray,
                  features: np.ndarray, pitch_lags: np.ndarray,
                  state: StreamState) -> np.ndarray:
    """Enhance one 20-ms block (4 subframes) of pre-emphasized signal."""
    cfg = weights.config
    if state.config != cfg:
        raise ValueError("stream state was created for a different configuration")
    signal = np.ascontiguousarray(signal, dtype=np.float32).reshape(-1)
    features = np.asarray(features, dtype=np.float32)
    pitch_lags = np.asarray(pitch_lags)
    if signal.shape[0] != cfg.block_size:
        raise ValueError(f"block must be {cfg.block_size} samples")
    if features.shape != (cfg.subframes_per_block, cfg.n_f):
        raise ValueError(f"features must be ({cfg.subframes_per_block}, {cfg.n_f})")
    if pitch_lags.shape != (cfg.subframes_per_block,):
        raise ValueError("one pitch lag per subframe required")
    rt = Runtime.build(weights)
    chain = latent_chain(rt, features, state)
    return signal_block(rt, chain, pitch_lags, signal, state)


def enhance_stream(weights: ModelWeights, signal: np.ndarray,
                   features: np.ndarray, pitch_lags: np.ndarray,
                   state: StreamState | None = None) -> np.ndarray:
    """Enhance a whole signal block by block.

    ``signal`` must hold frame_size samples per feature frame. A trailing
    partial block is zero-padded (features and samples) and the output is
    truncated back to the input length.
    """
    cfg = weights.config
    signal = np.ascontiguousarray(signal, dtype=np.float32).reshape(-1)
    features = np.asarray(features, dtype=np.float32)
    pitch_lags = np.asarray(pitch_lags).reshape(-1)
    if features.ndim != 2 or features.shape[1] != cfg.n_f:
        raise ValueError(f"features must be (n, {cfg.n_f})")
    n = features.shape[0]
    if pitch_lags.shape[0] != n:
        raise ValueError("one pitch lag per feature frame required")
    if signal.shape[0] != n * cfg.frame_size:
        raise ValueError(
            f"signal length {signal.shape[0]} does not match "
            f"{n} frames of {cfg.frame_size} samples")

    n_sub = cfg.subframes_per_block
    pad = (-n) % n_sub
    if pad:
        features = np.vstack([features, np.zeros((pad, cfg.n_f), np.float32)])
        pitch_lags = np.concatenate([pitch_lags, np.zeros(pad, pitch_lags.dtype)])
        signal = np.concatenate(
            [signal, np.zeros(pad * cfg.frame_size, np.float32)])

    if state is None:
        state = StreamState.fresh(cfg)
    elif state.config != cfg:
        raise ValueError("stream state was created for a different configuration")

    rt = Runtime.build(weights)
    out = np.empty_like(signal)
    for b in range(0, features.shape[0], n_sub):
        chain = latent_chain(rt, features[b:b + n_sub], state)
        out[b * cfg.frame_size:(b + n_sub) * cfg.frame_size] = signal_block(
            rt, chain, pitch_lags[b:b + n_sub],
            signal[b * cfg.frame_size:(b + n_sub) * cfg.frame_size], state)
    return out[:n * cfg.frame_size]
