import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nolace.config import ModelConfig
from nolace.dsp import CombSpec, KernelSpec


def rel_err(a, b):
    """Relative L2 error of a against reference b, absolute near zero."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    scale = np.linalg.norm(b)
    if scale < 1e-9:
        return float(np.linalg.norm(a - b))
    return float(np.linalg.norm(a - b) / scale)


def random_kernel_spec(rng, out_ch=None, in_ch=None, taps=None, feat_dim=None,
                       gain_limit=2.0, scale=1.0):
    out_ch = out_ch or int(rng.integers(1, 4))
    in_ch = in_ch or int(rng.integers(1, 4))
    taps = taps or int(rng.integers(1, 17))
    feat_dim = feat_dim or int(rng.integers(4, 33))
    n = out_ch * in_ch * taps
    return KernelSpec(
        w_shape=rng.standard_normal((n, feat_dim)).astype(np.float32) * scale,
        b_shape=rng.standard_normal(n).astype(np.float32) * scale,
        w_gain=rng.standard_normal((out_ch, feat_dim)).astype(np.float32) * scale,
        b_gain=rng.standard_normal(out_ch).astype(np.float32) * scale,
        gain_limit=gain_limit, taps=taps, in_ch=in_ch, out_ch=out_ch)


def random_comb_spec(rng, taps=15, feat_dim=16, max_lag=264, gain_limit=2.0):
    kernel = random_kernel_spec(rng, out_ch=1, in_ch=1, taps=taps,
                                feat_dim=feat_dim, gain_limit=gain_limit)
    return CombSpec(kernel=kernel,
                    w_ft=rng.standard_normal(feat_dim).astype(np.float32),
                    b_ft=float(rng.standard_normal()), max_lag=max_lag)


def small_config(variant="nolace", seed=None, rng=None, **overrides):
    """A tiny but structurally complete configuration for fast tests."""
    if rng is None:
        rng = np.random.default_rng(seed or 0)
    kw = dict(n_r=int(rng.integers(4, 9)), n_h=int(rng.integers(8, 17)),
              n_f=int(rng.integers(6, 13)), adashape_hidden=int(rng.integers(4, 9)))
    kw.update(overrides)
    cfg = ModelConfig(variant=variant, **kw)
    return cfg


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
