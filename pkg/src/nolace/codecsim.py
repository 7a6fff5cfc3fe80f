"""Desk-scale codec simulator.

Stands in for a real low-bitrate speech codec: adds deterministic,
signal-shaped quantization-like noise to a clean signal and synthesizes
the per-subframe conditioning features the enhancement models consume.
It makes no claim of fidelity to any particular codec; it exists so the
engine, tests and toy training runs have realistic-shaped inputs.

Feature layout (93 slots per 5-ms subframe):

    [0:32)   log band energies of the noisy signal (rfft bin groups)
    [32:56)  cepstrum of the noisy signal
    [56:80)  normalized autocorrelation of the noisy signal, lags 1..24
    [80:88)  pitch-neighborhood correlations (zero when unvoiced)
    [88]     pitch correlation peak
    [89]     pitch lag / 256
    [90]     bitrate scalar, log2(kbps / 6) / 2
    [91]     frame log energy
    [92]     spectral tilt (lag-1 autocorrelation)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .config import FRAME_SIZE, MAX_PITCH_LAG, MIN_PITCH_LAG

N_FEATURES = 93
_N_BANDS = 32
_N_CEPS = 24
_N_ACORR = 24
_N_LTP = 8
_FFT_SIZE = 256
_PITCH_WINDOW = 400          # 25 ms
_VOICING_THRESHOLD = 0.5
BITRATES = (6, 9, 12, 20)    # kb/s tags


@dataclass
class DegradationProfile:
    """Knobs of the simulated coding distortion, each in [0, 1]."""

    noise_strength: float = 0.5
    spectral_tilt: float = 0.5
    pitch_noise: float = 0.5
    bitrate: int = 9

    def __post_init__(self) -> None:
        for name in ("noise_strength", "spectral_tilt", "pitch_noise"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.bitrate not in BITRATES:
            raise ValueError(f"bitrate must be one of {BITRATES}")


def degrade(x: np.ndarray, profile: DegradationProfile,
            seed: int = 0) -> np.ndarray:
    """Add shaped noise to a clean 16 kHz signal; deterministic per seed.

    Noise energy follows the local signal envelope (quantization noise is
    signal-correlated), gets a one-pole spectral tilt, and scales inversely
    with the simulated bitrate.
    """
    x = np.asarray(x, dtype=np.float32).reshape(-1)
    if profile.noise_strength == 0.0:
        return x.copy()
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(x.shape[0]).astype(np.float32)
    tilt = 0.9 * profile.spectral_tilt
    noise = lfilter([1.0], [1.0, -tilt], noise).astype(np.float32)
    noise /= max(np.sqrt(np.mean(noise**2)), 1e-9)

    # per-frame envelope of the clean signal, with a floor so silence
    # still gets a little coding noise
    n_frames = int(np.ceil(x.shape[0] / FRAME_SIZE))
    pad = n_frames * FRAME_SIZE - x.shape[0]
    frames = np.pad(x, (0, pad)).reshape(n_frames, FRAME_SIZE)
    env = np.sqrt(np.mean(frames**2, axis=1) + 1e-8)
    env = np.maximum(env, 0.02 * (env.max() if env.max() > 0 else 1.0))

    # voiced regions get extra noise with the pitch_noise knob
    voiced_boost = 1.0 + profile.pitch_noise * _frame_periodicity(frames)
    level = 0.25 * profile.noise_strength * (6.0 / profile.bitrate)
    gain = (level * env * voiced_boost).astype(np.float32)
    shaped = noise[:n_frames * FRAME_SIZE] * np.repeat(gain, FRAME_SIZE)
    return (x + shaped[:x.shape[0]]).astype(np.float32)


def _frame_periodicity(frames: np.ndarray) -> np.ndarray:
    """Cheap per-frame periodicity proxy in [0, 1] (lag-40 correlation)."""
    flat = frames.reshape(-1)
    lag = 40
    if flat.shape[0] <= lag:
        return np.zeros(frames.shape[0], dtype=np.float32)
    shifted = np.concatenate([np.zeros(lag, np.float32), flat[:-lag]])
    num = (frames * shifted.reshape(frames.shape)).sum(axis=1)
    den = np.sqrt((frames**2).sum(axis=1)
                  * (shifted.reshape(frames.shape)**2).sum(axis=1)) + 1e-9
    return np.clip(num / den, 0.0, 1.0).astype(np.float32)


def estimate_pitch(x: np.ndarray, t_end: int) -> tuple[int, float]:
    """Normalized-autocorrelation pitch at the window ending at ``t_end``.

    Picks the autocorrelation peak in the admissible lag range, then walks
    down to the smallest sub-multiple whose correlation is nearly as strong
    (the usual octave-error correction for near-periodic signals).
    Returns (lag, peak); lag 0 with the peak below threshold means unvoiced.
    """
    x = np.asarray(x, dtype=np.float64)
    start = max(0, t_end - _PITCH_WINDOW)
    w = x[start:t_end]
    n = w.shape[0]
    if n < 2 * MIN_PITCH_LAG or np.max(np.abs(w)) < 1e-6:
        return 0, 0.0
    max_lag = min(MAX_PITCH_LAG, n - 1)

    c = np.correlate(w, w, mode="full")[n - 1:]          # c[l] = sum w[t] w[t-l]
    csum = np.cumsum(w * w)
    e_b = np.concatenate([[csum[-1]], csum[-2::-1]])     # energy of w[:-l]
    e_a = csum[-1] - np.concatenate([[0.0], csum[:-1]])  # energy of w[l:]
    den = np.sqrt(np.maximum(e_a * e_b, 1e-18))
    r = c / den

    window = r[MIN_PITCH_LAG:max_lag + 1]
    best_lag = MIN_PITCH_LAG + int(np.argmax(window))
    best = float(window.max())
    if best < _VOICING_THRESHOLD:
        return 0, best

    lag = best_lag
    for k in range(6, 1, -1):
        cand = int(round(best_lag / k))
        if cand < MIN_PITCH_LAG:
            continue
        lo, hi = max(MIN_PITCH_LAG, cand - 2), min(max_lag, cand + 2)
        local = int(np.argmax(r[lo:hi + 1])) + lo
        if r[local] >= 0.87 * best:
            lag = local
            break
    return lag, float(r[lag])


def _spectral_slots(y_win: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Band log energies and cepstrum from one analysis window."""
    w = y_win * np.hanning(y_win.shape[0])
    spec = np.abs(np.fft.rfft(w, n=_FFT_SIZE)) ** 2
    edges = np.linspace(0, spec.shape[0], _N_BANDS + 1).astype(int)
    bands = np.array([spec[a:b].sum() for a, b in zip(edges[:-1], edges[1:])])
    log_bands = np.log10(bands + 1e-9)
    log_spec = np.log(spec + 1e-9)
    ceps = np.fft.irfft(log_spec)[:_N_CEPS]
    return log_bands, ceps


def extract_features(x: np.ndarray, y: np.ndarray,
                     profile: DegradationProfile) -> tuple[np.ndarray, np.ndarray]:
    """Per-subframe conditioning features and pitch lags.

    Pitch comes from the clean signal ``x``; spectral and correlation slots
    from the degraded signal ``y``; the bitrate slot from the profile.
    Returns (features (n, 93), lags (n,) int32).
    """
    x = np.asarray(x, dtype=np.float32).reshape(-1)
    y = np.asarray(y, dtype=np.float32).reshape(-1)
    if x.shape != y.shape:
        raise ValueError("clean and degraded signals must be aligned")
    n = x.shape[0] // FRAME_SIZE
    feats = np.zeros((n, N_FEATURES), dtype=np.float32)
    lags = np.zeros(n, dtype=np.int32)
    bitrate_slot = float(np.log2(profile.bitrate / 6.0) / 2.0)

    for i in range(n):
        t_end = (i + 1) * FRAME_SIZE
        lag, peak = estimate_pitch(x, t_end)
        lags[i] = lag

        win = y[max(0, t_end - 2 * FRAME_SIZE):t_end].astype(np.float64)
        if win.shape[0] < 2 * FRAME_SIZE:
            win = np.pad(win, (2 * FRAME_SIZE - win.shape[0], 0))
        log_bands, ceps = _spectral_slots(win)
        feats[i, 0:_N_BANDS] = log_bands
        feats[i, _N_BANDS:_N_BANDS + _N_CEPS] = ceps

        e0 = float(win @ win) + 1e-9
        acorr = np.array([float(win[l:] @ win[:-l]) / e0
                          for l in range(1, _N_ACORR + 1)])
        feats[i, 56:56 + _N_ACORR] = acorr

        if lag > 0:
            seg = x[max(0, t_end - _PITCH_WINDOW):t_end].astype(np.float64)
            es = float(seg @ seg) + 1e-9
            ltp = []
            for dl in range(-3, 5):
                l = lag + dl
                if 0 < l < seg.shape[0]:
                    ltp.append(float(seg[l:] @ seg[:-l]) / es)
                else:
                    ltp.append(0.0)
            feats[i, 80:88] = ltp

        feats[i, 88] = peak
        feats[i, 89] = lag / 256.0
        feats[i, 90] = bitrate_slot
        frame = y[i * FRAME_SIZE:t_end].astype(np.float64)
        feats[i, 91] = float(np.log10(np.mean(frame**2) + 1e-9))
        feats[i, 92] = acorr[0]
    return feats, lags
