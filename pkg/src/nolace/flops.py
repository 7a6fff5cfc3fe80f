"""Analytic complexity accounting: FLOPs per second of audio and parameters.

Convention: one multiply-accumulate counts as 2 FLOPs; bias additions and
pointwise nonlinearities count 1 per element. Coefficient interpolation is
charged as evaluating both the previous and the current filter on the
first half of each frame plus the blend arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import COMB_STAGES, SAMPLE_RATE, SHAPE_STAGES, ModelConfig

__all__ = ["StageCost", "ComplexityReport", "count_flops"]


@dataclass
class StageCost:
    name: str
    flops_per_sec: float
    params: int

    @property
    def mflops(self) -> float:
        return self.flops_per_sec / 1e6


@dataclass
class ComplexityReport:
    variant: str
    items: list[StageCost]

    @property
    def total_flops_per_sec(self) -> float:
        return sum(i.flops_per_sec for i in self.items)

    @property
    def total_mflops(self) -> float:
        return self.total_flops_per_sec / 1e6

    @property
    def total_params(self) -> int:
        return sum(i.params for i in self.items)

    def format_table(self) -> str:
        width = max([len(i.name) for i in self.items] + [8])
        lines = [f"{'stage':<{width}}  {'MFLOPS':>10}  {'params':>10}",
                 "-" * (width + 24)]
        for i in self.items:
            lines.append(f"{i.name:<{width}}  {i.mflops:>10.2f}  {i.params:>10d}")
        lines.append("-" * (width + 24))
        lines.append(f"{'total':<{width}}  {self.total_mflops:>10.2f}  "
                     f"{self.total_params:>10d}")
        return "\n".join(lines)


def _conv_cost(c_in: int, c_out: int, k: int, rate: float) -> float:
    # MACs + bias + activation per output position
    return rate * (2 * k * c_in * c_out + 2 * c_out)


def count_flops(config: ModelConfig) -> ComplexityReport:
    """Per-stage FLOPs/s at 16 kHz plus parameter counts.

    Degenerate all-zero configurations report zero.
    """
    cfg = config
    if min(cfg.n_h, cfg.n_r, cfg.n_f, cfg.frame_size) <= 0:
        return ComplexityReport(variant=cfg.variant, items=[])

    frame_rate = SAMPLE_RATE / cfg.frame_size
    block_rate = frame_rate / cfg.subframes_per_block
    n_r, n_h, n_f = cfg.n_r, cfg.n_h, cfg.n_f
    items: list[StageCost] = []

    items.append(StageCost("encoder.conv1", _conv_cost(n_f, n_r, 1, frame_rate),
                           n_r * n_f + n_r))
    items.append(StageCost("encoder.cpool", _conv_cost(n_r, n_h, 4, block_rate),
                           n_h * n_r * 4 + n_h))
    items.append(StageCost("encoder.conv2", _conv_cost(n_h, n_h, 2, block_rate),
                           n_h * n_h * 2 + n_h))
    # k = stride = 4: each of the 4 outputs per block sees one tap
    items.append(StageCost("encoder.tconv",
                           4 * _conv_cost(n_h, n_h, 1, block_rate),
                           n_h * n_h * 4 + n_h))
    gru_flops = frame_rate * (2 * 3 * n_h * (n_h + n_h)   # both matmuls
                              + 6 * n_h                   # biases
                              + 7 * n_h)                  # gates and blend
    items.append(StageCost("encoder.gru", gru_flops,
                           2 * 3 * n_h * n_h + 2 * 3 * n_h))

    if cfg.variant == "nolace":
        for k in range(1, 6):
            items.append(StageCost(f"ftrans{k}",
                                   _conv_cost(n_h, n_h, 2, frame_rate),
                                   n_h * n_h * 2 + n_h))

    def filter_cost(taps_per_sample: int, c_out: int) -> float:
        # full-rate filtering, doubled on the crossfaded first half + blend
        f = 2 * taps_per_sample
        return SAMPLE_RATE * (f + 0.5 * (f + 4 * c_out))

    for name in COMB_STAGES:
        taps = cfg.taps[name]
        coeff = frame_rate * (2 * taps * n_h + taps      # shape
                              + 3 * taps                 # joint normalization
                              + 2 * (2 * n_h + 2)        # gain + feed-through
                              + 4)
        items.append(StageCost(name, coeff + filter_cost(taps + 1, 1),
                               taps * n_h + taps + 2 * (n_h + 1)))

    for name, (c_in, c_out) in cfg.conv_stages().items():
        taps = cfg.taps[name]
        nk = c_out * c_in * taps
        coeff = frame_rate * (2 * nk * n_h + nk + 3 * nk
                              + c_out * (2 * n_h + 3))
        items.append(StageCost(name, coeff + filter_cost(c_in * taps, c_out),
                               nk * n_h + nk + c_out * n_h + c_out))

    if cfg.variant == "nolace":
        frame = cfg.frame_size
        blocks = cfg.env_blocks
        in_dim = blocks + 1 + n_h
        hidden = cfg.adashape_hidden
        for name in SHAPE_STAGES:
            per_frame = (2 * frame + 3 * blocks + 4          # envelope + log
                         + 2 * 2 * in_dim * hidden + 2 * hidden
                         + 2 * 2 * hidden * frame + frame    # logits
                         + 2 * frame)                        # exp + multiply
            items.append(StageCost(name, frame_rate * per_frame,
                                   hidden * in_dim * 2 + hidden
                                   + frame * hidden * 2 + frame))

    return ComplexityReport(variant=cfg.variant, items=items)
