"""Weight container round-trips, validation, and parity vectors.

Shows the binary container API: save/load is bit-identical, validation
reports every defect by tensor name, and test-vector files let any other
implementation of the same graph check itself against this engine.

Run: python3 demos/04_weights_and_vectors.py
"""

import tempfile
from pathlib import Path

import numpy as np

from nolace import (TestVector, default_config, enhance_stream, load,
                    load_vectors, random_weights, save, save_vectors, validate)

rng = np.random.default_rng(2)
workdir = Path(tempfile.mkdtemp(prefix="nolace-demo-"))

print("=== round trip ===")
w = random_weights(default_config("nolace", n_r=24, n_h=32), rng)
path = workdir / "model.bin"
save(w, path)
print(f"wrote {path.stat().st_size:,} bytes "
      f"({sum(t.size for t in w.tensors.values()):,} parameters)")
back = load(path)
identical = all(np.array_equal(back.tensors[k], w.tensors[k]) for k in w.tensors)
print(f"load(save(w)) bit-identical: {identical}")

print()
print("=== validation reports name every offending tensor ===")
broken = random_weights(w.config, rng)
broken.tensors["adashape2.conv1.w"][0, 0, 0] = np.inf
broken.tensors["ftrans3.w"] = broken.tensors["ftrans3.w"][:, :-1]
del broken.tensors["adacomb2.b_gain"]
report = validate(broken)
for issue in report.issues:
    print(f"  {issue}")

print()
print("=== parity vectors ===")
vectors = []
for _ in range(5):
    n = 12
    sig = rng.standard_normal(n * 80).astype(np.float32) * 0.3
    feats = rng.standard_normal((n, 93)).astype(np.float32)
    lags = rng.integers(32, 257, n).astype(np.int32)
    vectors.append(TestVector(signal=sig, features=feats, pitch_lags=lags,
                              expected=enhance_stream(w, sig, feats, lags),
                              tolerance=1e-4))
vec_path = workdir / "vectors.bin"
save_vectors(vec_path, w.config, vectors)
_, loaded = load_vectors(vec_path)
worst = max(float(np.sqrt(np.mean(
    (enhance_stream(w, v.signal, v.features, v.pitch_lags) - v.expected) ** 2)))
    for v in loaded)
print(f"replayed {len(loaded)} vectors, worst rms error {worst:.2e} "
      f"(tolerance {loaded[0].tolerance:.0e})")
print(f"demo files in {workdir}")
