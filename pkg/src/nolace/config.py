"""Model configuration and tensor shape bookkeeping.

Two variants share one streaming signal path:

* ``lace``   -- two adaptive comb filters followed by a single-channel
  adaptive convolution, all conditioned on the first latent vector.
* ``nolace`` -- same front end, then a select-shape-mix cascade of
  two-channel adaptive convolutions and adaptive temporal shaping
  stages, each conditioned on a progressively filtered latent chain.

The latent chain assignment (which latent conditions which stage) is
fixed by :data:`STAGE_LATENTS`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

SAMPLE_RATE = 16_000
FRAME_SIZE = 80              # 5 ms at 16 kHz; coefficient update unit
SUBFRAMES_PER_BLOCK = 4      # 20 ms causal block
ENV_BLOCK = 4                # envelope averaging block (samples)
PREEMPH_COEF = 0.85

EPS_NORM = 1e-6              # floor for the joint kernel normalization denominator
EPS_ENV = 1e-6               # floor under the temporal envelope before log
LEAKY_SLOPE = 0.2            # AdaShape hidden activation slope

MIN_PITCH_LAG = 32           # admissible wideband pitch range, samples
MAX_PITCH_LAG = 256
DEFAULT_FALLBACK_LAG = 80    # used until the first voiced frame arrives

VARIANTS = ("lace", "nolace")

# conv stages: name -> (in_channels, out_channels)
_NOLACE_CONVS = {
    "adaconv1": (1, 2),
    "adaconv2": (2, 2),
    "adaconv3": (2, 2),
    "adaconv4": (2, 1),
}
_LACE_CONVS = {"adaconv1": (1, 1)}

COMB_STAGES = ("adacomb1", "adacomb2")
SHAPE_STAGES = ("adashape1", "adashape2", "adashape3")
FTRANS_STAGES = ("ftrans1", "ftrans2", "ftrans3", "ftrans4", "ftrans5")

# latent chain index (0-based into phi1..phi6) conditioning each stage
STAGE_LATENTS = {
    "adacomb1": 0,
    "adacomb2": 1,
    "adaconv1": 2,
    "adashape1": 3,
    "adaconv2": 3,
    "adashape2": 4,
    "adaconv3": 4,
    "adashape3": 5,
    "adaconv4": 5,
}


def _default_taps(variant: str) -> dict[str, int]:
    stages = list(COMB_STAGES) + list(conv_channels(variant))
    return {s: 15 for s in stages}


def _default_gain_limits(variant: str) -> dict[str, float]:
    stages = list(COMB_STAGES) + list(conv_channels(variant))
    return {s: 2.0 for s in stages}


def conv_channels(variant: str) -> dict[str, tuple[int, int]]:
    """Adaptive convolution stages and their channel counts for a variant."""
    if variant == "nolace":
        return dict(_NOLACE_CONVS)
    if variant == "lace":
        return dict(_LACE_CONVS)
    raise ValueError(f"unknown variant {variant!r}")


@dataclass
class ModelConfig:
    """Hyperparameters of one model instance.

    ``n_r`` is the reduced feature dimension, ``n_h`` the hidden size used
    for both the recurrent state and every latent vector.
    """

    variant: str = "nolace"
    n_r: int = 96
    n_h: int = 256
    n_f: int = 93
    frame_size: int = FRAME_SIZE
    subframes_per_block: int = SUBFRAMES_PER_BLOCK
    taps: dict[str, int] = field(default_factory=dict)
    gain_limit: dict[str, float] = field(default_factory=dict)
    max_lag: int = MAX_PITCH_LAG + 8     # admissible lag plus half a 15-tap span
    adashape_hidden: int = 128

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not self.taps:
            self.taps = _default_taps(self.variant)
        if not self.gain_limit:
            self.gain_limit = _default_gain_limits(self.variant)

    @property
    def block_size(self) -> int:
        return self.frame_size * self.subframes_per_block

    @property
    def env_blocks(self) -> int:
        return self.frame_size // ENV_BLOCK

    def conv_stages(self) -> dict[str, tuple[int, int]]:
        return conv_channels(self.variant)

    def filter_stages(self) -> list[str]:
        return list(COMB_STAGES) + list(self.conv_stages())

    def validate(self) -> None:
        """Raise ValueError on structurally impossible configurations."""
        for name, value in (("n_r", self.n_r), ("n_h", self.n_h), ("n_f", self.n_f)):
            if value < 1:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.frame_size % ENV_BLOCK != 0:
            raise ValueError("frame_size must be divisible by 4")
        if self.frame_size % 2 != 0:
            raise ValueError("frame_size must be even")
        missing = [s for s in self.filter_stages() if s not in self.taps]
        if missing:
            raise ValueError(f"taps missing for stages: {missing}")
        for stage, t in self.taps.items():
            if t < 1:
                raise ValueError(f"taps[{stage}] must be >= 1")
        for stage, a in self.gain_limit.items():
            if not (a > 0):
                raise ValueError(f"gain_limit[{stage}] must be > 0")
        if self.max_lag < MAX_PITCH_LAG + max(self.taps[s] for s in COMB_STAGES) // 2:
            raise ValueError("max_lag must cover the admissible pitch range plus half the tap span")


def default_config(variant: str = "nolace", **overrides) -> ModelConfig:
    return ModelConfig(variant=variant, **overrides)


def expected_tensor_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Names and shapes of every tensor a complete model must provide.

    Conv weights are stored (out_channels, in_channels, kernel); recurrent
    weights follow the stacked (reset, update, candidate) gate layout.
    """
    n_r, n_h, n_f = config.n_r, config.n_h, config.n_f
    shapes: dict[str, tuple[int, ...]] = {
        "encoder.conv1.w": (n_r, n_f, 1),
        "encoder.conv1.b": (n_r,),
        "encoder.cpool.w": (n_h, n_r, 4),
        "encoder.cpool.b": (n_h,),
        "encoder.conv2.w": (n_h, n_h, 2),
        "encoder.conv2.b": (n_h,),
        "encoder.tconv.w": (n_h, n_h, 4),
        "encoder.tconv.b": (n_h,),
        "encoder.gru.w_ih": (3 * n_h, n_h),
        "encoder.gru.w_hh": (3 * n_h, n_h),
        "encoder.gru.b_ih": (3 * n_h,),
        "encoder.gru.b_hh": (3 * n_h,),
    }
    if config.variant == "nolace":
        for name in FTRANS_STAGES:
            shapes[f"{name}.w"] = (n_h, n_h, 2)
            shapes[f"{name}.b"] = (n_h,)
    for name in COMB_STAGES:
        taps = config.taps[name]
        shapes[f"{name}.w_shape"] = (taps, n_h)
        shapes[f"{name}.b_shape"] = (taps,)
        shapes[f"{name}.w_gain"] = (1, n_h)
        shapes[f"{name}.b_gain"] = (1,)
        shapes[f"{name}.w_ft"] = (1, n_h)
        shapes[f"{name}.b_ft"] = (1,)
    for name, (c_in, c_out) in config.conv_stages().items():
        taps = config.taps[name]
        shapes[f"{name}.w_shape"] = (c_out, c_in, taps, n_h)
        shapes[f"{name}.b_shape"] = (c_out, c_in, taps)
        shapes[f"{name}.w_gain"] = (c_out, n_h)
        shapes[f"{name}.b_gain"] = (c_out,)
    if config.variant == "nolace":
        env_in = config.env_blocks + 1 + n_h
        hidden = config.adashape_hidden
        for name in SHAPE_STAGES:
            shapes[f"{name}.conv1.w"] = (hidden, env_in, 2)
            shapes[f"{name}.conv1.b"] = (hidden,)
            shapes[f"{name}.conv2.w"] = (config.frame_size, hidden, 2)
            shapes[f"{name}.conv2.b"] = (config.frame_size,)
    return shapes
