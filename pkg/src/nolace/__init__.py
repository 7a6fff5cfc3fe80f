"""Streaming adaptive-DSP speech codec enhancement (LACE / NoLACE).

A numpy/scipy implementation of two causal enhancement models built from
three adaptive filter primitives (AdaConv, AdaComb, AdaShape), plus a
binary weight container, complexity accounting, and a synthetic codec
simulator for desk-scale experiments.
"""

from .codecsim import DegradationProfile, degrade, extract_features
from .config import ModelConfig, default_config
from .dsp import (adacomb_frame, adaconv_frame, adashape_frame,
                  compute_kernel_gain, compute_kernel_shape, deemphasis,
                  preemphasis, temporal_envelope)
from .flops import count_flops
from .graph import StreamState, enhance_block, enhance_stream
from .weights import (ModelWeights, TestVector, identity_weights, load,
                      load_features, load_vectors, random_weights, save,
                      save_features, save_vectors, validate)
from .wavio import read_wav, write_wav

__version__ = "0.1.0"

__all__ = [
    "DegradationProfile", "degrade", "extract_features",
    "ModelConfig", "default_config",
    "adacomb_frame", "adaconv_frame", "adashape_frame",
    "compute_kernel_gain", "compute_kernel_shape",
    "preemphasis", "deemphasis", "temporal_envelope",
    "count_flops",
    "StreamState", "enhance_block", "enhance_stream",
    "ModelWeights", "TestVector", "identity_weights", "random_weights",
    "load", "save", "validate",
    "load_features", "save_features", "load_vectors", "save_vectors",
    "read_wav", "write_wav",
]
