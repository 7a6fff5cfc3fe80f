"""Model weight container: a single little-endian binary file.

Layout (all integers little-endian):

    magic     8 bytes   b"NLCWGT\\x00\\x01"
    version   u16 major, u16 minor
    hdr_len   u32
    header    hdr_len bytes of UTF-8 JSON
    data      concatenated float32 tensors, row-major, in header order
    sections  zero or more of { tag: 4 bytes, length: u64, payload }

The header carries the model configuration and the ordered tensor table
(name + shape). Known section tags are ``FEAT`` (feature sidecars) and
``TVEC`` (parity test vectors); unknown trailing sections are skipped
with a warning so the format can grow.

See docs/weights-format.md for the full byte-level description and the
tensor naming convention.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import ModelConfig, expected_tensor_shapes

MAGIC = b"NLCWGT\x00\x01"
VERSION = (1, 0)

SECTION_FEATURES = b"FEAT"
SECTION_VECTORS = b"TVEC"


class WeightsFormatError(Exception):
    """Unreadable container: bad magic, truncation, malformed header."""


class WeightsValidationError(Exception):
    """Structurally readable container with invalid contents."""


@dataclass
class ValidationIssue:
    code: str
    tensor: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.tensor}: {self.message}"


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def add(self, code: str, tensor: str, message: str) -> None:
        self.issues.append(ValidationIssue(code, tensor, message))

    def to_dict(self) -> dict:
        return {"ok": self.ok,
                "issues": [vars(i) for i in self.issues]}


@dataclass
class TestVector:
    """One parity vector: graph-domain input, conditioning, expected output."""

    __test__ = False         # not a pytest class

    signal: np.ndarray       # (n_frames * frame_size,)
    features: np.ndarray     # (n_frames, n_f)
    pitch_lags: np.ndarray   # (n_frames,) int32
    expected: np.ndarray     # (n_frames * frame_size,)
    tolerance: float

    def __post_init__(self) -> None:
        n = self.features.shape[0]
        if n == 0 or self.signal.shape[0] % n != 0:
            raise ValueError("signal length must be a multiple of the frame count")
        if self.pitch_lags.shape[0] != n or self.expected.shape[0] != self.signal.shape[0]:
            raise ValueError("vector field lengths are inconsistent")


@dataclass
class ModelWeights:
    config: ModelConfig
    tensors: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]


# ---------------------------------------------------------------------------
# low-level container IO
# ---------------------------------------------------------------------------

def _config_to_header(config: ModelConfig) -> dict:
    return {
        "variant": config.variant,
        "n_r": config.n_r,
        "n_h": config.n_h,
        "n_f": config.n_f,
        "frame_size": config.frame_size,
        "subframes_per_block": config.subframes_per_block,
        "taps": config.taps,
        "gain_limit": config.gain_limit,
        "max_lag": config.max_lag,
        "adashape_hidden": config.adashape_hidden,
    }


def _config_from_header(h: dict) -> ModelConfig:
    return ModelConfig(
        variant=h["variant"], n_r=int(h["n_r"]), n_h=int(h["n_h"]),
        n_f=int(h["n_f"]), frame_size=int(h["frame_size"]),
        subframes_per_block=int(h["subframes_per_block"]),
        taps={k: int(v) for k, v in h["taps"].items()},
        gain_limit={k: float(v) for k, v in h["gain_limit"].items()},
        max_lag=int(h["max_lag"]), adashape_hidden=int(h["adashape_hidden"]),
    )


def write_container(path, config: ModelConfig, tensors: dict[str, np.ndarray],
                    sections: dict[bytes, bytes] | None = None) -> None:
    names = list(tensors)
    header = {
        "config": _config_to_header(config),
        "tensors": [{"name": n, "shape": list(tensors[n].shape)} for n in names],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HH", *VERSION))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for n in names:
            f.write(np.ascontiguousarray(tensors[n], dtype="<f4").tobytes())
        for tag, payload in (sections or {}).items():
            if len(tag) != 4:
                raise ValueError("section tags are exactly 4 bytes")
            f.write(tag)
            f.write(struct.pack("<Q", len(payload)))
            f.write(payload)


def read_container(path) -> tuple[ModelConfig, dict[str, np.ndarray], dict[bytes, bytes]]:
    with open(path, "rb") as f:
        data = f.read()
    off = 0

    def take(n: int, what: str) -> bytes:
        nonlocal off
        if off + n > len(data):
            raise WeightsFormatError(f"truncated file while reading {what}")
        out = data[off:off + n]
        off += n
        return out

    if take(8, "magic") != MAGIC:
        raise WeightsFormatError("bad magic: not a weight container")
    major, minor = struct.unpack("<HH", take(4, "version"))
    if major != VERSION[0]:
        raise WeightsFormatError(f"unsupported container version {major}.{minor}")
    (hdr_len,) = struct.unpack("<I", take(4, "header length"))
    try:
        header = json.loads(take(hdr_len, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise WeightsFormatError(f"malformed header: {e}") from None

    try:
        config = _config_from_header(header["config"])
        table = header["tensors"]
    except (KeyError, TypeError, ValueError) as e:
        raise WeightsFormatError(f"malformed header: {e}") from None

    tensors: dict[str, np.ndarray] = {}
    for entry in table:
        name, shape = entry["name"], tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = take(4 * count, f"tensor {name}")
        arr = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(shape)
        if name in tensors:
            raise WeightsFormatError(f"duplicate tensor {name}")
        tensors[name] = arr

    sections: dict[bytes, bytes] = {}
    while off < len(data):
        tag = take(4, "section tag")
        (length,) = struct.unpack("<Q", take(8, "section length"))
        payload = take(length, f"section {tag!r}")
        if tag in (SECTION_FEATURES, SECTION_VECTORS):
            sections[tag] = payload
        else:
            warnings.warn(f"ignoring unknown section {tag!r}", stacklevel=2)
    return config, tensors, sections


# ---------------------------------------------------------------------------
# model weights
# ---------------------------------------------------------------------------

def save(weights: ModelWeights, path) -> None:
    write_container(path, weights.config, weights.tensors)


def load(path) -> ModelWeights:
    """Load and validate a weight container; raises on any defect."""
    config, tensors, _ = read_container(path)
    weights = ModelWeights(config=config, tensors=tensors)
    report = validate(weights)
    if not report.ok:
        raise WeightsValidationError(
            "invalid model: " + "; ".join(str(i) for i in report.issues))
    return weights


def validate(weights: ModelWeights, config: ModelConfig | None = None) -> ValidationReport:
    """Check completeness, shapes, finiteness and header consistency.

    Failures are collected into the report rather than raised, so callers
    can show everything wrong at once.
    """
    report = ValidationReport()
    cfg = config or weights.config
    try:
        cfg.validate()
    except ValueError as e:
        report.add("config", "<header>", str(e))
        return report
    if config is not None and config != weights.config:
        report.add("consistency", "<header>",
                   "header configuration does not match the requested one")
    expected = expected_tensor_shapes(cfg)
    for name, shape in expected.items():
        if name not in weights.tensors:
            report.add("missing", name, f"tensor absent (expected shape {shape})")
            continue
        t = weights.tensors[name]
        if tuple(t.shape) != shape:
            report.add("shape", name, f"has shape {tuple(t.shape)}, expected {shape}")
        elif not np.all(np.isfinite(t)):
            report.add("finite", name, "contains NaN or Inf")
        if t.dtype != np.float32:
            report.add("dtype", name, f"stored as {t.dtype}, expected float32")
    for name in weights.tensors:
        if name not in expected:
            report.add("unexpected", name, "tensor not used by this configuration")
    return report


# ---------------------------------------------------------------------------
# initializers
# ---------------------------------------------------------------------------

def random_weights(config: ModelConfig, rng: np.random.Generator | None = None,
                   scale: float = 1.0) -> ModelWeights:
    """Uniform fan-in initialization; handy for tests and toy runs."""
    rng = rng or np.random.default_rng(0)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in expected_tensor_shapes(config).items():
        fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else int(shape[0])
        bound = scale / np.sqrt(max(fan_in, 1))
        tensors[name] = rng.uniform(-bound, bound, size=shape).astype(np.float32)
    return ModelWeights(config=config, tensors=tensors)


def identity_weights(config: ModelConfig) -> ModelWeights:
    """Weights under which the whole graph is exactly the identity map.

    Comb kernels get an all-zero raw shape (the normalization floor turns
    that into a zero kernel) and unit feed-through; every adaptive conv
    passes channel i to channel i via a delta kernel with unit gain; the
    shaping stages produce unit gains. The encoder is zeroed, which makes
    every frame's filter identical, so crossfading changes nothing.
    """
    tensors = {name: np.zeros(shape, dtype=np.float32)
               for name, shape in expected_tensor_shapes(config).items()}
    for name, (c_in, c_out) in config.conv_stages().items():
        b = tensors[f"{name}.b_shape"]
        for o in range(c_out):
            b[o, min(o, c_in - 1), 0] = 1.0
    return ModelWeights(config=config, tensors=tensors)


# ---------------------------------------------------------------------------
# feature sidecars and test vectors (container sections)
# ---------------------------------------------------------------------------

def encode_features_section(features: np.ndarray, pitch_lags: np.ndarray) -> bytes:
    features = np.ascontiguousarray(features, dtype="<f4")
    lags = np.ascontiguousarray(pitch_lags, dtype="<i4")
    if features.ndim != 2 or lags.shape != (features.shape[0],):
        raise ValueError("features must be (n, n_f) with one lag per frame")
    head = struct.pack("<II", features.shape[0], features.shape[1])
    return head + features.tobytes() + lags.tobytes()


def decode_features_section(payload: bytes) -> tuple[np.ndarray, np.ndarray]:
    if len(payload) < 8:
        raise WeightsFormatError("truncated feature section")
    n, n_f = struct.unpack("<II", payload[:8])
    need = 8 + 4 * n * n_f + 4 * n
    if len(payload) != need:
        raise WeightsFormatError("feature section length mismatch")
    feats = np.frombuffer(payload, dtype="<f4", count=n * n_f, offset=8)
    lags = np.frombuffer(payload, dtype="<i4", count=n, offset=8 + 4 * n * n_f)
    return (feats.astype(np.float32).reshape(n, n_f),
            lags.astype(np.int32).copy())


def save_features(path, config: ModelConfig, features: np.ndarray,
                  pitch_lags: np.ndarray) -> None:
    write_container(path, config, {},
                    {SECTION_FEATURES: encode_features_section(features, pitch_lags)})


def load_features(path) -> tuple[np.ndarray, np.ndarray]:
    _, _, sections = read_container(path)
    if SECTION_FEATURES not in sections:
        raise WeightsFormatError("file has no feature section")
    return decode_features_section(sections[SECTION_FEATURES])


def encode_vectors_section(vectors: list[TestVector]) -> bytes:
    out = [struct.pack("<I", len(vectors))]
    for v in vectors:
        n = v.features.shape[0]
        out.append(struct.pack("<IIf", n, v.features.shape[1], float(v.tolerance)))
        out.append(np.ascontiguousarray(v.signal, dtype="<f4").tobytes())
        out.append(np.ascontiguousarray(v.features, dtype="<f4").tobytes())
        out.append(np.ascontiguousarray(v.pitch_lags, dtype="<i4").tobytes())
        out.append(np.ascontiguousarray(v.expected, dtype="<f4").tobytes())
    return b"".join(out)


def decode_vectors_section(payload: bytes, frame_size: int) -> list[TestVector]:
    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(payload):
            raise WeightsFormatError("truncated vector section")
        b = payload[off:off + n]
        off += n
        return b

    (count,) = struct.unpack("<I", take(4))
    vectors = []
    for _ in range(count):
        n, n_f, tol = struct.unpack("<IIf", take(12))
        sig = np.frombuffer(take(4 * n * frame_size), dtype="<f4").astype(np.float32)
        feats = np.frombuffer(take(4 * n * n_f), dtype="<f4").astype(np.float32)
        lags = np.frombuffer(take(4 * n), dtype="<i4").astype(np.int32)
        exp = np.frombuffer(take(4 * n * frame_size), dtype="<f4").astype(np.float32)
        vectors.append(TestVector(signal=sig, features=feats.reshape(n, n_f),
                                  pitch_lags=lags, expected=exp, tolerance=tol))
    if off != len(payload):
        raise WeightsFormatError("trailing bytes in vector section")
    return vectors


def save_vectors(path, config: ModelConfig, vectors: list[TestVector]) -> None:
    write_container(path, config, {},
                    {SECTION_VECTORS: encode_vectors_section(vectors)})


def load_vectors(path) -> tuple[ModelConfig, list[TestVector]]:
    config, _, sections = read_container(path)
    if SECTION_VECTORS not in sections:
        raise WeightsFormatError("file has no test-vector section")
    return config, decode_vectors_section(sections[SECTION_VECTORS], config.frame_size)
