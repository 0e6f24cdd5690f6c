"""Model configuration for the map association transformer.

A model is a sequence of stages; each stage repeats identical residual blocks
at a fixed channel width, and consecutive stages are bridged by a linear
channel projection (token count never changes). Every block runs one spatial
attention, one path attention (order configurable), and one FFN.

RoPE divisibility: path attention rotates over 2 axes and spatial attention
over 3, each axis needing an even channel chunk, so the per-head dimension
must be divisible by both 4 and 6 (hence by 12).
"""

from __future__ import annotations

from dataclasses import dataclass

from ..curves import CURVE_KINDS, DEFAULT_GRID_G, DEFAULT_GRID_R
from ..errors import ConfigError

__all__ = ["StageSpec", "ModelConfig", "desk_config", "full_config", "FULL_VARIANTS"]

ATTENTION_KINDS = ("spatial", "path")
POOLING_KINDS = ("avg", "max")

# per-head channel chunking: 2 RoPE axes for path attention, 3 for spatial
PATH_ROPE_AXES = 2
SPATIAL_ROPE_AXES = 3


@dataclass(frozen=True)
class StageSpec:
    """One stage: `blocks` residual blocks at `channels` width, `heads` heads."""

    blocks: int
    channels: int
    heads: int

    def __post_init__(self):
        for name in ("blocks", "channels", "heads"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"stage {name} must be a positive integer, got {v!r}")
        if self.channels % self.heads != 0:
            raise ConfigError(
                f"channels {self.channels} not divisible by {self.heads} heads"
            )
        head_dim = self.channels // self.heads
        for axes, kind in ((PATH_ROPE_AXES, "path"), (SPATIAL_ROPE_AXES, "spatial")):
            if head_dim % (2 * axes) != 0:
                raise ConfigError(
                    f"head dim {head_dim} not divisible by {2 * axes} "
                    f"({kind} attention rotates {axes} axes)"
                )


@dataclass(frozen=True)
class ModelConfig:
    """Full architecture plus the head/loss hyperparameters.

    `curve` is one of the four serialization curves or "random", in which case
    the forward pass draws one kind per block from a seeded stream.
    """

    stages: tuple = (StageSpec(1, 48, 4), StageSpec(1, 96, 4))
    patch_size: int = 1024
    curve: str = "hilbert"
    attention_order: tuple = ("spatial", "path")
    mlp_ratio: int = 4
    rope_base: float = 10000.0
    pooling: str = "avg"
    grid_g: float = DEFAULT_GRID_G
    grid_R: int = DEFAULT_GRID_R
    alpha: float = 1.0
    beta: float = 0.01

    def __post_init__(self):
        stages = tuple(
            s if isinstance(s, StageSpec) else StageSpec(*s) for s in self.stages
        )
        object.__setattr__(self, "stages", stages)
        object.__setattr__(self, "attention_order", tuple(self.attention_order))
        if not stages:
            raise ConfigError("at least one stage required")
        if self.patch_size < 1:
            raise ConfigError(f"patch_size must be >= 1, got {self.patch_size}")
        if self.curve != "random" and self.curve not in CURVE_KINDS:
            raise ConfigError(
                f"curve must be one of {CURVE_KINDS} or 'random', got {self.curve!r}"
            )
        if sorted(self.attention_order) != sorted(ATTENTION_KINDS):
            raise ConfigError(
                f"attention_order must permute {ATTENTION_KINDS}, "
                f"got {self.attention_order}"
            )
        if self.mlp_ratio < 1:
            raise ConfigError(f"mlp_ratio must be >= 1, got {self.mlp_ratio}")
        if not self.rope_base > 1.0:
            raise ConfigError(f"rope_base must be > 1, got {self.rope_base}")
        if self.pooling not in POOLING_KINDS:
            raise ConfigError(f"pooling must be one of {POOLING_KINDS}")
        if self.grid_g <= 0 or self.grid_R < 1:
            raise ConfigError("grid_g must be positive and grid_R >= 1")

    @property
    def n_blocks(self) -> int:
        return sum(s.blocks for s in self.stages)

    @property
    def out_channels(self) -> int:
        return self.stages[-1].channels


def desk_config(**overrides) -> ModelConfig:
    """Small config sized for tests and laptop runs: 2 stages, 1 block each."""
    kw = dict(
        stages=(StageSpec(1, 48, 4), StageSpec(1, 96, 4)),
        patch_size=8,
        curve="hilbert",
    )
    kw.update(overrides)
    return ModelConfig(**kw)


# Full-size variants. All share channels [96, 192, 384, 768, 1536], heads
# [4, 4, 8, 8, 8], MLP ratio 4, and patch size 1024; only block depth differs.
FULL_VARIANTS = {
    "T": (2, 2, 2, 2, 2),
    "S": (4, 4, 4, 4, 4),
    "M": (4, 4, 4, 8, 4),
    "L": (4, 4, 4, 12, 4),
}

_FULL_CHANNELS = (96, 192, 384, 768, 1536)
_FULL_HEADS = (4, 4, 8, 8, 8)


def full_config(variant: str = "L", **overrides) -> ModelConfig:
    """Full-size variant configs; useful for shape checks only at desk scale."""
    if variant not in FULL_VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}, pick from {sorted(FULL_VARIANTS)}")
    blocks = FULL_VARIANTS[variant]
    kw = dict(
        stages=tuple(
            StageSpec(b, c, h) for b, c, h in zip(blocks, _FULL_CHANNELS, _FULL_HEADS)
        ),
        patch_size=1024,
        curve="random",
    )
    kw.update(overrides)
    return ModelConfig(**kw)
