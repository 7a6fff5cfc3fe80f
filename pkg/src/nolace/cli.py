"""Command line front door.

Subcommands: enhance, degrade, features, flops, validate, gen-vectors,
parity. Exit codes: 0 success, 1 validation/parity/processing failure,
2 usage error. Set NOLACE_LOG=debug|info|warning to control logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import codecsim, weights as wio
from .config import default_config
from .dsp import deemphasis, preemphasis
from .flops import count_flops
from .graph import enhance_stream
from .wavio import WavFormatError, read_wav, write_wav

log = logging.getLogger("nolace")


def _profile_from_args(args) -> codecsim.DegradationProfile:
    return codecsim.DegradationProfile(
        noise_strength=args.strength, spectral_tilt=args.tilt,
        pitch_noise=args.pitch_noise, bitrate=args.bitrate)


def _add_profile_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strength", type=float, default=0.5,
                   help="noise strength in [0, 1]")
    p.add_argument("--tilt", type=float, default=0.5,
                   help="noise spectral tilt in [0, 1]")
    p.add_argument("--pitch-noise", type=float, default=0.5,
                   help="extra noise on periodic frames, [0, 1]")
    p.add_argument("--bitrate", type=int, default=9, choices=codecsim.BITRATES,
                   help="simulated bitrate tag (kb/s)")


def cmd_enhance(args) -> int:
    model = wio.load(args.model)
    x = read_wav(args.input)
    cfg = model.config
    n = x.shape[0] // cfg.frame_size
    if n == 0:
        raise ValueError("input shorter than one 5-ms frame")
    if args.features:
        feats, lags = wio.load_features(args.features)
        if feats.shape[0] < n or feats.shape[1] != cfg.n_f:
            raise ValueError(
                f"feature file covers {feats.shape[0]} frames of dim "
                f"{feats.shape[1]}, input needs {n} of dim {cfg.n_f}")
        feats, lags = feats[:n], lags[:n]
    elif args.simulate:
        feats, lags = codecsim.extract_features(x[:n * cfg.frame_size],
                                                x[:n * cfg.frame_size],
                                                _profile_from_args(args))
    else:
        raise ValueError("either --features or --simulate is required")

    head = x[:n * cfg.frame_size]
    tail = x[n * cfg.frame_size:]
    emphasized = preemphasis(head)
    enhanced = enhance_stream(model, emphasized, feats, lags)
    out = deemphasis(enhanced)
    write_wav(args.output, np.concatenate([out, tail]))
    log.info("enhanced %s -> %s (%d frames, %s)", args.input, args.output,
             n, cfg.variant)
    return 0


def cmd_degrade(args) -> int:
    x = read_wav(args.input)
    y = codecsim.degrade(x, _profile_from_args(args), seed=args.seed)
    write_wav(args.output, y)
    return 0


def cmd_features(args) -> int:
    x = read_wav(args.input)
    y = read_wav(args.degraded) if args.degraded else x
    if y.shape != x.shape:
        raise ValueError("clean and degraded inputs must have equal length")
    profile = _profile_from_args(args)
    feats, lags = codecsim.extract_features(x, y, profile)
    cfg = default_config(args.variant)
    wio.save_features(args.output, cfg, feats, lags)
    log.info("wrote %d feature frames to %s", feats.shape[0], args.output)
    return 0


def cmd_flops(args) -> int:
    if args.model:
        cfg = wio.load(args.model).config
    else:
        cfg = default_config(args.variant, n_r=args.n_r, n_h=args.n_h)
    report = count_flops(cfg)
    print(f"variant: {cfg.variant}  n_r={cfg.n_r}  n_h={cfg.n_h}")
    print(report.format_table())
    return 0


def cmd_validate(args) -> int:
    try:
        config, tensors, _ = wio.read_container(args.model)
    except wio.WeightsFormatError as e:
        print(f"format error: {e}", file=sys.stderr)
        return 1
    report = wio.validate(wio.ModelWeights(config=config, tensors=tensors))
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        for issue in report.issues:
            print(str(issue))
        print("ok" if report.ok else f"{len(report.issues)} failure(s)")
    return 0 if report.ok else 1


def cmd_gen_vectors(args) -> int:
    model = wio.load(args.model)
    cfg = model.config
    rng = np.random.default_rng(args.seed)
    vectors = []
    for _ in range(args.count):
        n = args.frames
        signal = rng.standard_normal(n * cfg.frame_size).astype(np.float32) * 0.3
        feats = rng.standard_normal((n, cfg.n_f)).astype(np.float32)
        lags = rng.integers(32, 257, size=n).astype(np.int32)
        lags[rng.random(n) < 0.2] = 0
        expected = enhance_stream(model, signal, feats, lags)
        vectors.append(wio.TestVector(signal=signal, features=feats,
                                      pitch_lags=lags, expected=expected,
                                      tolerance=args.tolerance))
    wio.save_vectors(args.output, cfg, vectors)
    log.info("wrote %d vectors to %s", len(vectors), args.output)
    return 0


def cmd_parity(args) -> int:
    model = wio.load(args.model)
    config, vectors = wio.load_vectors(args.vectors)
    if config != model.config:
        print("parity: vector file configuration does not match the model",
              file=sys.stderr)
        return 1
    worst = 0.0
    failures = 0
    for i, v in enumerate(vectors):
        out = enhance_stream(model, v.signal, v.features, v.pitch_lags)
        rms = float(np.sqrt(np.mean((out - v.expected) ** 2)))
        worst = max(worst, rms)
        if rms > v.tolerance:
            failures += 1
            print(f"vector {i}: rms error {rms:.3e} exceeds {v.tolerance:.1e}")
    print(f"parity: {len(vectors) - failures}/{len(vectors)} passed, "
          f"worst rms {worst:.3e}")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nolace",
        description="Adaptive-DSP speech codec enhancement engine")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("enhance", help="enhance a WAV file")
    e.add_argument("--model", required=True)
    e.add_argument("--input", required=True)
    e.add_argument("--output", required=True)
    e.add_argument("--features", help="feature sidecar file")
    e.add_argument("--simulate", action="store_true",
                   help="synthesize features from the input itself")
    _add_profile_args(e)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_enhance)

    d = sub.add_parser("degrade", help="apply simulated coding noise")
    d.add_argument("--input", required=True)
    d.add_argument("--output", required=True)
    _add_profile_args(d)
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_degrade)

    f = sub.add_parser("features", help="write a feature sidecar")
    f.add_argument("--input", required=True, help="clean WAV (pitch source)")
    f.add_argument("--degraded", help="degraded WAV (spectral slots); "
                                      "defaults to the clean input")
    f.add_argument("--output", required=True)
    f.add_argument("--variant", default="nolace", choices=("lace", "nolace"))
    _add_profile_args(f)
    f.set_defaults(func=cmd_features)

    fl = sub.add_parser("flops", help="itemized complexity report")
    fl.add_argument("--model")
    fl.add_argument("--variant", default="nolace", choices=("lace", "nolace"))
    fl.add_argument("--n-r", type=int, default=96)
    fl.add_argument("--n-h", type=int, default=256)
    fl.set_defaults(func=cmd_flops)

    v = sub.add_parser("validate", help="validate a weight container")
    v.add_argument("--model", required=True)
    v.add_argument("--json", action="store_true")
    v.set_defaults(func=cmd_validate)

    g = sub.add_parser("gen-vectors", help="generate parity test vectors")
    g.add_argument("--model", required=True)
    g.add_argument("--output", required=True)
    g.add_argument("--count", type=int, default=10)
    g.add_argument("--frames", type=int, default=40)
    g.add_argument("--tolerance", type=float, default=1e-4)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gen_vectors)

    pa = sub.add_parser("parity", help="compare engine output to test vectors")
    pa.add_argument("--model", required=True)
    pa.add_argument("--vectors", required=True)
    pa.set_defaults(func=cmd_parity)
    return p


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("NOLACE_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (WavFormatError, wio.WeightsFormatError,
            wio.WeightsValidationError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
