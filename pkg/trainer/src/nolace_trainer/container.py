"""Reader/writer for the engine's binary container format.

Implemented against the published byte layout (docs/weights-format.md in
the engine repo) rather than the engine's own code: the file format is
the interface between harness and engine.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"NLCWGT\x00\x01"
VERSION = (1, 0)
SECTION_FEATURES = b"FEAT"
SECTION_VECTORS = b"TVEC"


class ContainerError(Exception):
    pass


def write_container(path, config: dict, tensors: dict[str, np.ndarray],
                    sections: dict[bytes, bytes] | None = None) -> None:
    names = list(tensors)
    header = {
        "config": config,
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
            f.write(tag)
            f.write(struct.pack("<Q", len(payload)))
            f.write(payload)


def read_container(path) -> tuple[dict, dict[str, np.ndarray], dict[bytes, bytes]]:
    with open(path, "rb") as f:
        data = f.read()
    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(data):
            raise ContainerError("truncated container")
        out = data[off:off + n]
        off += n
        return out

    if take(8) != MAGIC:
        raise ContainerError("bad magic")
    major, _minor = struct.unpack("<HH", take(4))
    if major != VERSION[0]:
        raise ContainerError(f"unsupported version {major}")
    (hdr_len,) = struct.unpack("<I", take(4))
    header = json.loads(take(hdr_len).decode("utf-8"))
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        tensors[entry["name"]] = np.frombuffer(
            take(4 * count), dtype="<f4").astype(np.float32).reshape(shape)
    sections: dict[bytes, bytes] = {}
    while off < len(data):
        tag = take(4)
        (length,) = struct.unpack("<Q", take(8))
        sections[tag] = take(length)
    return header["config"], tensors, sections


def decode_features(payload: bytes) -> tuple[np.ndarray, np.ndarray]:
    if len(payload) < 8:
        raise ContainerError("truncated feature section")
    n, n_f = struct.unpack("<II", payload[:8])
    if len(payload) != 8 + 4 * n * n_f + 4 * n:
        raise ContainerError("feature section length mismatch")
    feats = np.frombuffer(payload, "<f4", count=n * n_f, offset=8)
    lags = np.frombuffer(payload, "<i4", count=n, offset=8 + 4 * n * n_f)
    return feats.astype(np.float32).reshape(n, n_f), lags.astype(np.int32).copy()


def encode_vectors(vectors: list[dict]) -> bytes:
    """Each vector: signal, features (n, n_f), pitch_lags, expected, tolerance."""
    out = [struct.pack("<I", len(vectors))]
    for v in vectors:
        feats = np.ascontiguousarray(v["features"], "<f4")
        out.append(struct.pack("<IIf", feats.shape[0], feats.shape[1],
                               float(v["tolerance"])))
        out.append(np.ascontiguousarray(v["signal"], "<f4").tobytes())
        out.append(feats.tobytes())
        out.append(np.ascontiguousarray(v["pitch_lags"], "<i4").tobytes())
        out.append(np.ascontiguousarray(v["expected"], "<f4").tobytes())
    return b"".join(out)
