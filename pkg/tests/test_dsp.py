"""Unit and property tests for the adaptive DSP primitives."""

import math

import numpy as np
import pytest

import oracles
from conftest import random_comb_spec, random_kernel_spec, rel_err
from nolace.config import EPS_ENV
from nolace.dsp import (AdaCombState, AdaConvState, AdaShapeParams,
                        AdaShapeState, CombFilter, CombSpec, KernelSpec,
                        adacomb_frame, adaconv_frame, adashape_frame,
                        comb_filter, compute_kernel_gain, compute_kernel_shape,
                        deemphasis, frame_filter, preemphasis,
                        temporal_envelope)

FRAME = 80


def fixed_spec(b_shape, b_gain=0.0, taps=None, in_ch=1, out_ch=1,
               feat_dim=4, gain_limit=2.0):
    """Spec with zero weight matrices: raw shape = b_shape, gain from b_gain."""
    b_shape = np.asarray(b_shape, dtype=np.float32)
    taps = taps or b_shape.size // (in_ch * out_ch)
    n = out_ch * in_ch * taps
    return KernelSpec(
        w_shape=np.zeros((n, feat_dim), np.float32),
        b_shape=b_shape.reshape(-1),
        w_gain=np.zeros((out_ch, feat_dim), np.float32),
        b_gain=np.full(out_ch, b_gain, np.float32),
        gain_limit=gain_limit, taps=taps, in_ch=in_ch, out_ch=out_ch)


# ---------------------------------------------------------------------------
# kernel shape
# ---------------------------------------------------------------------------

class TestKernelShape:
    def test_345_normalization(self):
        spec = fixed_spec([3.0, 4.0])
        k = compute_kernel_shape(spec, np.zeros(4))
        np.testing.assert_allclose(k[0, 0], [0.6, 0.8], atol=1e-7)

    def test_two_channel_with_degenerate_partner(self):
        # raw responses (3,4) and (0,0); the floored joint denominator is
        # max(5, eps) = 5, so the first kernel keeps its plain normalization
        spec = fixed_spec([3.0, 4.0, 0.0, 0.0], in_ch=2, taps=2)
        k = compute_kernel_shape(spec, np.zeros(4))
        ref = oracles.kernel_shape(spec.w_shape, spec.b_shape, np.zeros(4), 1, 2, 2)
        np.testing.assert_allclose(k, ref, atol=1e-7)
        np.testing.assert_allclose(k[0, 0], [0.6, 0.8], atol=1e-7)
        np.testing.assert_allclose(k[0, 1], [0.0, 0.0], atol=1e-7)

    def test_all_zero_response_gives_zero_kernel(self):
        spec = fixed_spec([0.0, 0.0, 0.0])
        k = compute_kernel_shape(spec, np.zeros(4))
        assert np.all(k == 0.0) and np.all(np.isfinite(k))

    def test_joint_norm_is_one(self, rng):
        for _ in range(200):
            spec = random_kernel_spec(rng)
            phi = rng.standard_normal(spec.feat_dim).astype(np.float32)
            k = compute_kernel_shape(spec, phi)
            norms = np.sqrt((k.astype(np.float64) ** 2).sum(axis=2))
            np.testing.assert_allclose(norms.sum(axis=1), 1.0, atol=1e-5)

    def test_dimension_mismatch(self, rng):
        spec = random_kernel_spec(rng, feat_dim=8)
        with pytest.raises(ValueError):
            compute_kernel_shape(spec, np.zeros(9))

    def test_matches_oracle(self, rng):
        for _ in range(100):
            spec = random_kernel_spec(rng)
            phi = rng.standard_normal(spec.feat_dim).astype(np.float32)
            got = compute_kernel_shape(spec, phi)
            ref = oracles.kernel_shape(spec.w_shape, spec.b_shape, phi,
                                       spec.out_ch, spec.in_ch, spec.taps)
            assert rel_err(got, ref) < 1e-5


# ---------------------------------------------------------------------------
# kernel gain
# ---------------------------------------------------------------------------

class TestKernelGain:
    def test_zero_logit_gives_unit_gain(self):
        spec = fixed_spec([1.0], b_gain=0.0)
        assert compute_kernel_gain(spec, np.zeros(4))[0] == pytest.approx(1.0)

    def test_saturation(self):
        spec = fixed_spec([1.0], b_gain=1e4, gain_limit=2.0)
        g = compute_kernel_gain(spec, np.zeros(4))[0]
        assert g == pytest.approx(math.e ** 2, rel=1e-6)

    def test_half_tanh_point(self):
        # logit arranged so tanh(.) = 0.5 with limit 1 -> gain e^0.5
        spec = fixed_spec([1.0], b_gain=math.atanh(0.5), gain_limit=1.0)
        g = compute_kernel_gain(spec, np.zeros(4))[0]
        ref = oracles.kernel_gain(spec.w_gain, spec.b_gain, np.zeros(4), 1.0)[0]
        assert g == pytest.approx(ref, rel=1e-6)
        assert g == pytest.approx(1.6487, rel=1e-4)

    def test_bounds(self, rng):
        for _ in range(200):
            spec = random_kernel_spec(rng, scale=3.0)
            phi = rng.standard_normal(spec.feat_dim).astype(np.float32) * 5
            g = compute_kernel_gain(spec, phi)
            lo, hi = math.exp(-spec.gain_limit), math.exp(spec.gain_limit)
            assert np.all(g >= lo * (1 - 1e-6)) and np.all(g <= hi * (1 + 1e-6))


# ---------------------------------------------------------------------------
# adaconv
# ---------------------------------------------------------------------------

class TestAdaConv:
    def test_identity_filter(self, rng):
        spec = fixed_spec([1.0], taps=1)
        state = AdaConvState.fresh(1, 1)
        x = rng.standard_normal((1, FRAME)).astype(np.float32)
        y = adaconv_frame(spec, np.zeros(4), x, state)
        np.testing.assert_allclose(y, x, atol=1e-7)

    def test_constant_phi_equals_plain_fir(self, rng):
        spec = random_kernel_spec(rng, out_ch=1, in_ch=1, taps=8, feat_dim=6)
        phi = rng.standard_normal(6).astype(np.float32)
        x = rng.standard_normal(4 * FRAME).astype(np.float32)
        state = AdaConvState.fresh(1, 8)
        y = np.concatenate([
            adaconv_frame(spec, phi, x[None, m * FRAME:(m + 1) * FRAME], state)[0]
            for m in range(4)])
        h = frame_filter(spec, phi).impulse[0, 0]
        ref = np.convolve(x.astype(np.float64), h.astype(np.float64))[:x.size]
        assert rel_err(y, ref) < 1e-5

    def test_crossfade_weights_at_t10(self):
        # two distinct single-tap filters; impulse at t=10 of the second
        # frame picks up 0.75 * h_prev + 0.25 * h_cur
        spec = KernelSpec(w_shape=np.zeros((1, 1), np.float32),
                          b_shape=np.ones(1, np.float32),
                          w_gain=np.ones((1, 1), np.float32),
                          b_gain=np.zeros(1, np.float32),
                          gain_limit=2.0, taps=1)
        phis = [np.float32([1.0]), np.float32([-1.0])]
        g = [math.exp(2 * math.tanh(1.0)), math.exp(2 * math.tanh(-1.0))]
        x = np.zeros((1, 2 * FRAME), np.float32)
        x[0, FRAME + 10] = 1.0
        state = AdaConvState.fresh(1, 1)
        adaconv_frame(spec, phis[0], x[:, :FRAME], state)
        y2 = adaconv_frame(spec, phis[1], x[:, FRAME:], state)
        expected = 0.75 * g[0] + 0.25 * g[1]
        assert y2[0, 10] == pytest.approx(expected, rel=1e-6)
        ref = oracles.adaconv((spec.w_shape, spec.b_shape, spec.w_gain,
                               spec.b_gain), phis, x, 1, 1, 1, 2.0)
        assert ref[0, FRAME + 10] == pytest.approx(expected, rel=1e-12)

    def test_midpoint_onward_equals_current_filter(self, rng):
        spec = random_kernel_spec(rng, out_ch=2, in_ch=2, taps=6, feat_dim=8)
        phis = [rng.standard_normal(8).astype(np.float32) for _ in range(2)]
        x = rng.standard_normal((2, 2 * FRAME)).astype(np.float32)
        state = AdaConvState.fresh(2, 6)
        adaconv_frame(spec, phis[0], x[:, :FRAME], state)
        y2 = adaconv_frame(spec, phis[1], x[:, FRAME:], state)
        # plain filtering of the same samples with the current filter only
        h = frame_filter(spec, phis[1]).impulse.astype(np.float64)
        ext = x[:, FRAME - 5:].astype(np.float64)
        ref = np.zeros((2, FRAME))
        for o in range(2):
            for i in range(2):
                ref[o] += np.convolve(ext[i], h[o, i])[5:5 + FRAME]
        assert rel_err(y2[:, FRAME // 2:], ref[:, FRAME // 2:]) < 1e-6

    def test_missing_history_rejected(self, rng):
        spec = random_kernel_spec(rng, in_ch=2, taps=5)
        state = AdaConvState.fresh(2, 4)   # wrong history width
        with pytest.raises(ValueError, match="history"):
            adaconv_frame(spec, np.zeros(spec.feat_dim),
                          np.zeros((2, FRAME), np.float32), state)

    def test_matches_oracle_multichannel(self, rng):
        for _ in range(20):
            spec = random_kernel_spec(rng)
            n_frames = 3
            phis = [rng.standard_normal(spec.feat_dim).astype(np.float32)
                    for _ in range(n_frames)]
            x = rng.standard_normal((spec.in_ch, n_frames * FRAME)).astype(np.float32)
            state = AdaConvState.fresh(spec.in_ch, spec.taps)
            got = np.concatenate(
                [adaconv_frame(spec, phis[m], x[:, m * FRAME:(m + 1) * FRAME], state)
                 for m in range(n_frames)], axis=1)
            ref = oracles.adaconv((spec.w_shape, spec.b_shape, spec.w_gain,
                                   spec.b_gain), phis, x,
                                  spec.out_ch, spec.in_ch, spec.taps,
                                  spec.gain_limit)
            assert rel_err(got, ref) < 1e-5


# ---------------------------------------------------------------------------
# adacomb
# ---------------------------------------------------------------------------

class TestAdaComb:
    def test_zero_comb_branch_leaves_feedthrough(self, rng):
        kernel = fixed_spec([0.0] * 15, taps=15)
        spec = CombSpec(kernel=kernel, w_ft=np.zeros(4, np.float32),
                        b_ft=0.7, max_lag=264)
        state = AdaCombState.fresh(spec)
        x = rng.standard_normal(FRAME).astype(np.float32)
        y = adacomb_frame(spec, np.zeros(4), 80, x, state)
        g0 = math.exp(2.0 * math.tanh(0.7))
        np.testing.assert_allclose(y, g0 * x, rtol=1e-6)

    def test_periodic_reinforcement(self):
        # single centered tap = 1, gain 0.5, unit feed-through: a signal
        # with period equal to the lag comes out scaled by 1.5
        kernel = KernelSpec(
            w_shape=np.zeros((1, 4), np.float32),
            b_shape=np.ones(1, np.float32),
            w_gain=np.zeros((1, 4), np.float32),
            b_gain=np.full(1, math.atanh(math.log(0.5) / 2.0), np.float32),
            gain_limit=2.0, taps=1)
        spec = CombSpec(kernel=kernel, w_ft=np.zeros(4, np.float32),
                        b_ft=0.0, max_lag=264)
        t = np.arange(4 * FRAME)
        x = np.sin(2 * np.pi * t / 80).astype(np.float32)
        state = AdaCombState.fresh(spec)
        out = [adacomb_frame(spec, np.zeros(4), 80,
                             x[m * FRAME:(m + 1) * FRAME], state)
               for m in range(4)]
        # frames 0..1 are fed zero history; steady state from frame 2 on
        for m in (2, 3):
            np.testing.assert_allclose(
                out[m], 1.5 * x[m * FRAME:(m + 1) * FRAME], atol=2e-6)

    def test_lag_out_of_range(self, rng):
        spec = random_comb_spec(rng, max_lag=100)
        state = AdaCombState.fresh(spec)
        x = np.zeros(FRAME, np.float32)
        with pytest.raises(ValueError, match="lag"):
            adacomb_frame(spec, np.zeros(16), 101, x, state)
        with pytest.raises(ValueError, match="lag"):
            adacomb_frame(spec, np.zeros(16), 3, x, state)  # below tap span

    def test_constant_phi_equals_time_invariant_comb(self, rng):
        spec = random_comb_spec(rng)
        phi = rng.standard_normal(16).astype(np.float32)
        lag = 90
        x = rng.standard_normal(6 * FRAME).astype(np.float32)
        state = AdaCombState.fresh(spec)
        y = np.concatenate([
            adacomb_frame(spec, phi, lag, x[m * FRAME:(m + 1) * FRAME], state)
            for m in range(6)])
        f = comb_filter(spec, phi, lag)
        ext = np.concatenate([np.zeros(spec.history_len), x.astype(np.float64)])
        ref = np.zeros(x.size)
        for t in range(x.size):
            acc = f.feedthrough * x[t]
            for tau in range(spec.taps):
                acc += f.impulse[tau] * ext[spec.history_len + t - lag
                                            + spec.center - tau]
            ref[t] = acc
        assert rel_err(y, ref) < 1e-5

    def test_matches_oracle(self, rng):
        for _ in range(15):
            spec = random_comb_spec(rng, taps=int(rng.integers(1, 16)))
            n_frames = 3
            phis = [rng.standard_normal(16).astype(np.float32)
                    for _ in range(n_frames)]
            lags = [int(rng.integers(32, 257)) for _ in range(n_frames)]
            x = rng.standard_normal(n_frames * FRAME).astype(np.float32)
            state = AdaCombState.fresh(spec)
            got = np.concatenate([
                adacomb_frame(spec, phis[m], lags[m],
                              x[m * FRAME:(m + 1) * FRAME], state)
                for m in range(n_frames)])
            ref = oracles.adacomb(
                (spec.kernel.w_shape, spec.kernel.b_shape,
                 spec.kernel.w_gain, spec.kernel.b_gain),
                (spec.w_ft, spec.b_ft), phis, lags, x,
                spec.taps, spec.kernel.gain_limit, spec.max_lag)
            assert rel_err(got, ref) < 1e-5


# ---------------------------------------------------------------------------
# envelope and shaping
# ---------------------------------------------------------------------------

class TestEnvelope:
    def test_constant_frame(self):
        env = temporal_envelope(np.full(FRAME, 2.0, np.float32))
        np.testing.assert_allclose(env.blocks, 2.0, rtol=1e-6)
        np.testing.assert_allclose(env.log_env_centered, 0.0, atol=1e-6)
        assert env.mu == pytest.approx(math.log(2.0 + EPS_ENV), rel=1e-5)

    def test_scale_covariance(self, rng):
        x = (rng.standard_normal(FRAME).astype(np.float32)
             + np.sign(rng.standard_normal(FRAME)).astype(np.float32))
        c = 7.5
        a, b = temporal_envelope(x), temporal_envelope(c * x)
        np.testing.assert_allclose(b.log_env_centered, a.log_env_centered,
                                   atol=1e-4)
        assert b.mu - a.mu == pytest.approx(math.log(c), abs=1e-4)

    def test_zero_frame(self):
        env = temporal_envelope(np.zeros(FRAME, np.float32))
        assert np.all(env.blocks == 0.0)
        assert env.mu == pytest.approx(math.log(EPS_ENV), rel=1e-5)
        np.testing.assert_allclose(env.log_env_centered, 0.0, atol=1e-6)

    def test_mean_centering_invariant(self, rng):
        for _ in range(100):
            env = temporal_envelope(rng.standard_normal(FRAME).astype(np.float32))
            assert abs(float(np.mean(env.log_env_centered))) < 1e-5

    def test_rejects_bad_length(self):
        with pytest.raises(ValueError):
            temporal_envelope(np.zeros(81, np.float32))


def random_shape_params(rng, feat_dim=8, hidden=6, frame=FRAME, scale=0.5):
    in_dim = frame // 4 + 1 + feat_dim
    return AdaShapeParams(
        w1=(rng.standard_normal((hidden, in_dim, 2)) * scale).astype(np.float32),
        b1=(rng.standard_normal(hidden) * scale).astype(np.float32),
        w2=(rng.standard_normal((frame, hidden, 2)) * scale / hidden).astype(np.float32),
        b2=(rng.standard_normal(frame) * scale).astype(np.float32))


class TestAdaShape:
    def test_zero_weights_pass_through(self, rng):
        params = AdaShapeParams(w1=np.zeros((6, 29, 2), np.float32),
                                b1=np.zeros(6, np.float32),
                                w2=np.zeros((FRAME, 6, 2), np.float32),
                                b2=np.zeros(FRAME, np.float32))
        state = AdaShapeState.fresh(params)
        x = rng.standard_normal(FRAME).astype(np.float32)
        y = adashape_frame(params, rng.standard_normal(8).astype(np.float32),
                           x, state)
        np.testing.assert_array_equal(y, x)

    def test_zero_input_stays_zero(self, rng):
        params = random_shape_params(rng)
        state = AdaShapeState.fresh(params)
        y = adashape_frame(params, rng.standard_normal(8).astype(np.float32),
                           np.zeros(FRAME, np.float32), state)
        np.testing.assert_array_equal(y, 0.0)

    def test_gains_positive(self, rng):
        params = random_shape_params(rng)
        state = AdaShapeState.fresh(params)
        x = rng.standard_normal(FRAME).astype(np.float32)
        y = adashape_frame(params, rng.standard_normal(8).astype(np.float32),
                           x, state)
        assert np.all(np.isfinite(y))
        assert np.all((y == 0) == (x == 0))
        assert np.all(np.sign(y) == np.sign(x))

    def test_matches_oracle(self, rng):
        for _ in range(25):
            params = random_shape_params(rng)
            n_frames = 3
            phis = [rng.standard_normal(8).astype(np.float32)
                    for _ in range(n_frames)]
            x = rng.standard_normal(n_frames * FRAME).astype(np.float32)
            state = AdaShapeState.fresh(params)
            got = np.concatenate([
                adashape_frame(params, phis[m], x[m * FRAME:(m + 1) * FRAME], state)
                for m in range(n_frames)])
            ref = oracles.adashape(params.w1, params.b1, params.w2, params.b2,
                                   phis, x)
            assert rel_err(got, ref) < 1e-5


# ---------------------------------------------------------------------------
# emphasis
# ---------------------------------------------------------------------------

class TestEmphasis:
    def test_impulse_response(self):
        x = np.zeros(8, np.float32)
        x[0] = 1.0
        y = preemphasis(x)
        np.testing.assert_allclose(y[:3], [1.0, -0.85, 0.0], atol=1e-7)

    def test_round_trip(self, rng):
        x = rng.standard_normal(16000).astype(np.float32)
        back = deemphasis(preemphasis(x))
        assert np.max(np.abs(back - x)) < 1e-4

    def test_constant_steady_state(self):
        y = preemphasis(np.ones(100, np.float32))
        np.testing.assert_allclose(y[1:], 0.15, rtol=1e-5)

    def test_matches_oracle(self, rng):
        x = rng.standard_normal(400).astype(np.float32)
        assert rel_err(preemphasis(x), oracles.preemphasis(x)) < 1e-6
        assert rel_err(deemphasis(x), oracles.deemphasis(x)) < 1e-6
