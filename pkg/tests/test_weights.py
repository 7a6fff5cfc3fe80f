"""Container round-trips, format errors, and validation reports."""

import struct

import numpy as np
import pytest

from conftest import small_config
from nolace.weights import (MAGIC, ModelWeights, TestVector,
                            WeightsFormatError, WeightsValidationError,
                            identity_weights, load, load_features,
                            load_vectors, random_weights, save, save_features,
                            save_vectors, validate, write_container)


class TestRoundTrip:
    def test_save_load_bit_identical(self, rng, tmp_path):
        w = random_weights(small_config(rng=rng), rng)
        path = tmp_path / "m.bin"
        save(w, path)
        back = load(path)
        assert back.config == w.config
        assert set(back.tensors) == set(w.tensors)
        for name in w.tensors:
            np.testing.assert_array_equal(back.tensors[name], w.tensors[name])
            assert back.tensors[name].dtype == np.float32

    def test_truncated_file(self, rng, tmp_path):
        w = random_weights(small_config(rng=rng), rng)
        path = tmp_path / "m.bin"
        save(w, path)
        data = path.read_bytes()
        for cut in (4, 20, len(data) // 2, len(data) - 3):
            (tmp_path / "cut.bin").write_bytes(data[:cut])
            with pytest.raises(WeightsFormatError, match="truncated|magic"):
                load(tmp_path / "cut.bin")

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "junk.bin"
        p.write_bytes(b"RIFF" + b"\x00" * 100)
        with pytest.raises(WeightsFormatError, match="magic"):
            load(p)

    def test_wrong_shape_names_tensor(self, rng, tmp_path):
        w = random_weights(small_config(rng=rng), rng)
        w.tensors["encoder.gru.w_ih"] = w.tensors["encoder.gru.w_ih"][:-1]
        path = tmp_path / "m.bin"
        save(w, path)
        with pytest.raises(WeightsValidationError, match="encoder.gru.w_ih"):
            load(path)

    def test_unknown_trailing_section_warns_and_loads(self, rng, tmp_path):
        w = random_weights(small_config(rng=rng), rng)
        path = tmp_path / "m.bin"
        write_container(path, w.config, w.tensors, {b"XYZW": b"\x01\x02"})
        with pytest.warns(UserWarning, match="XYZW"):
            back = load(path)
        assert set(back.tensors) == set(w.tensors)


class TestValidate:
    def test_complete_model_passes(self, rng):
        report = validate(random_weights(small_config(rng=rng), rng))
        assert report.ok and report.issues == []

    def test_nan_detected(self, rng):
        w = random_weights(small_config(rng=rng), rng)
        w.tensors["adaconv1.w_shape"][0] = np.nan
        report = validate(w)
        assert not report.ok
        assert any(i.code == "finite" and i.tensor == "adaconv1.w_shape"
                   for i in report.issues)

    def test_header_config_mismatch(self, rng):
        cfg = small_config(rng=rng)
        w = random_weights(cfg, rng)
        other = small_config(rng=rng, n_h=cfg.n_h + 1)
        report = validate(w, other)
        assert not report.ok
        assert any(i.code in ("consistency", "shape", "missing")
                   for i in report.issues)

    def test_missing_tensor(self, rng):
        w = random_weights(small_config(rng=rng), rng)
        del w.tensors["adacomb1.w_ft"]
        report = validate(w)
        assert any(i.code == "missing" and i.tensor == "adacomb1.w_ft"
                   for i in report.issues)

    def test_validated_model_instantiates(self, rng):
        # soundness: a passing report means the graph can actually run
        from nolace.graph import Runtime
        w = random_weights(small_config(rng=rng), rng)
        assert validate(w).ok
        Runtime.build(w)

    def test_identity_weights_validate(self):
        for variant in ("lace", "nolace"):
            w = identity_weights(small_config(variant))
            assert validate(w).ok


class TestSections:
    def test_features_round_trip(self, rng, tmp_path):
        cfg = small_config(rng=rng)
        feats = rng.standard_normal((12, cfg.n_f)).astype(np.float32)
        lags = rng.integers(0, 257, size=12).astype(np.int32)
        path = tmp_path / "f.bin"
        save_features(path, cfg, feats, lags)
        f2, l2 = load_features(path)
        np.testing.assert_array_equal(f2, feats)
        np.testing.assert_array_equal(l2, lags)

    def test_vectors_round_trip(self, rng, tmp_path):
        cfg = small_config(rng=rng)
        vecs = []
        for _ in range(3):
            n = 8
            vecs.append(TestVector(
                signal=rng.standard_normal(n * cfg.frame_size).astype(np.float32),
                features=rng.standard_normal((n, cfg.n_f)).astype(np.float32),
                pitch_lags=rng.integers(32, 257, n).astype(np.int32),
                expected=rng.standard_normal(n * cfg.frame_size).astype(np.float32),
                tolerance=1e-4))
        path = tmp_path / "v.bin"
        save_vectors(path, cfg, vecs)
        cfg2, back = load_vectors(path)
        assert cfg2 == cfg and len(back) == 3
        for a, b in zip(vecs, back):
            np.testing.assert_array_equal(a.signal, b.signal)
            np.testing.assert_array_equal(a.features, b.features)
            np.testing.assert_array_equal(a.pitch_lags, b.pitch_lags)
            np.testing.assert_array_equal(a.expected, b.expected)
            assert b.tolerance == pytest.approx(1e-4)

    def test_corrupt_section_length(self, rng, tmp_path):
        cfg = small_config(rng=rng)
        path = tmp_path / "f.bin"
        save_features(path, cfg, np.zeros((4, cfg.n_f), np.float32),
                      np.zeros(4, np.int32))
        data = bytearray(path.read_bytes())
        # inflate the section length field past EOF
        tag_pos = data.find(b"FEAT")
        data[tag_pos + 4:tag_pos + 12] = struct.pack("<Q", 1 << 40)
        path.write_bytes(bytes(data))
        with pytest.raises(WeightsFormatError, match="truncated"):
            load_features(path)

    def test_magic_is_stable(self):
        assert MAGIC == b"NLCWGT\x00\x01"
