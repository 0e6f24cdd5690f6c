"""Named weight tensors for the transformer.

Weights travel as a flat {name: float32 ndarray} mapping. Linear layers use
the row-vector convention y = x @ W + b, so W has shape (fan_in, fan_out).

Naming scheme (fixed, also the manifest order on disk):

    embed.fc1.{weight,bias}               5 -> C0 -> C0 two-layer MLP
    embed.fc2.{weight,bias}
    stage{s}.block{b}.sa.norm.{weight,bias}   spatial attention
    stage{s}.block{b}.sa.{q,k,v,out}.{weight,bias}
    stage{s}.block{b}.pa.norm.{weight,bias}   path attention
    stage{s}.block{b}.pa.{q,k,v,out}.{weight,bias}
    stage{s}.block{b}.ffn.norm.{weight,bias}
    stage{s}.block{b}.ffn.{fc1,fc2}.{weight,bias}
    stage{s}.proj.{weight,bias}               channel bridge into stage s >= 1
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .config import ModelConfig

__all__ = ["EMBED_IN", "weight_spec", "init_weights", "validate_weights"]

# input feature width: [p1x, p1y, p2x, p2y, theta]
EMBED_IN = 5


def weight_spec(cfg: ModelConfig) -> list:
    """Ordered (name, shape) pairs for every tensor the config requires."""
    c0 = cfg.stages[0].channels
    spec = []

    def norm(name, c):
        spec.append((f"{name}.weight", (c,)))
        spec.append((f"{name}.bias", (c,)))

    def linear(name, fi, fo):
        spec.append((f"{name}.weight", (fi, fo)))
        spec.append((f"{name}.bias", (fo,)))

    linear("embed.fc1", EMBED_IN, c0)
    linear("embed.fc2", c0, c0)
    prev = c0
    for s, stage in enumerate(cfg.stages):
        c = stage.channels
        if s > 0:
            linear(f"stage{s}.proj", prev, c)
        for b in range(stage.blocks):
            base = f"stage{s}.block{b}"
            for attn in ("sa", "pa"):
                norm(f"{base}.{attn}.norm", c)
                for proj in ("q", "k", "v", "out"):
                    linear(f"{base}.{attn}.{proj}", c, c)
            norm(f"{base}.ffn.norm", c)
            linear(f"{base}.ffn.fc1", c, cfg.mlp_ratio * c)
            linear(f"{base}.ffn.fc2", cfg.mlp_ratio * c, c)
        prev = c
    return spec


def init_weights(cfg: ModelConfig, seed: int = 0) -> dict:
    """Seeded random weights: N(0, 1/fan_in) matrices, identity norms, zero biases.

    Tensors are drawn in weight_spec order from one generator, so a given
    (config, seed) pair always produces the same mapping.
    """
    rng = np.random.default_rng(seed)
    out = {}
    for name, shape in weight_spec(cfg):
        if name.endswith(".bias"):
            out[name] = np.zeros(shape, dtype=np.float32)
        elif len(shape) == 1:
            # norm scale
            out[name] = np.ones(shape, dtype=np.float32)
        else:
            fan_in = shape[0]
            w = rng.standard_normal(shape) / np.sqrt(fan_in)
            out[name] = w.astype(np.float32)
    return out


def validate_weights(weights: dict, cfg: ModelConfig) -> dict:
    """Check names, shapes, dtypes, and finiteness; report every discrepancy.

    Returns the mapping unchanged on success; raises one ConfigError listing
    all problems otherwise, so a bad checkpoint surfaces in a single pass.
    """
    spec = weight_spec(cfg)
    expected = dict(spec)
    problems = []
    for name, shape in spec:
        if name not in weights:
            problems.append(f"missing tensor {name} {shape}")
            continue
        t = np.asarray(weights[name])
        if tuple(t.shape) != shape:
            problems.append(f"{name}: shape {tuple(t.shape)}, expected {shape}")
        if t.dtype != np.float32:
            problems.append(f"{name}: dtype {t.dtype}, expected float32")
        elif not np.isfinite(t).all():
            problems.append(f"{name}: non-finite values")
    for name in sorted(weights):
        if name not in expected:
            problems.append(f"unexpected tensor {name}")
    if problems:
        raise ConfigError(
            "weights do not match the model config:\n  " + "\n  ".join(problems)
        )
    return weights
