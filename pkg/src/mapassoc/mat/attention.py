"""Attention mechanisms: multi-axis RoPE, path attention, spatial attention.

Both attention ops take float32 token matrices and return float32; all
internal arithmetic runs in float64 so results are reproducible bit-for-bit
and match a dense reference computation to well under 1e-5.

Path attention duplicates each token into every root-to-leaf path it lies on,
attends within each path, and scatter-means the copies back:

    v_j = mean over path copies i of out_i   where copy i originates from j

Spatial attention serializes tokens along a space-filling curve, splits the
serialized sequence into consecutive patches, attends within each patch, and
inverse-permutes the outputs back to token order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from ..curves import DEFAULT_ORDER, sort_tokens
from ..errors import ConfigError, TopologyError
from ..geometry import PathIndex

__all__ = [
    "AttnWeights",
    "gelu",
    "layer_norm",
    "rope_rotate",
    "path_attention",
    "spatial_attention",
]

_SQRT2 = np.sqrt(2.0)


def gelu(x: np.ndarray) -> np.ndarray:
    """Gaussian-error linear unit, exact erf form."""
    x = np.asarray(x)
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def layer_norm(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, eps: float = 1e-5):
    """Normalize the last axis to zero mean / unit variance, then scale-shift."""
    x64 = np.asarray(x, dtype=np.float64)
    mean = x64.mean(axis=-1, keepdims=True)
    var = x64.var(axis=-1, keepdims=True)
    out = (x64 - mean) / np.sqrt(var + eps)
    out = out * np.asarray(weight, dtype=np.float64) + np.asarray(bias, dtype=np.float64)
    return out.astype(np.asarray(x).dtype)


def rope_rotate(x: np.ndarray, positions, axes: int, base: float = 10000.0) -> np.ndarray:
    """Rotate channel pairs of `x` by per-axis position-dependent angles.

    x          (..., N, d) with d divisible by 2*axes
    positions  (N, axes) integers (a 1-D array is accepted when axes == 1)

    The head dimension is split into `axes` equal chunks; within chunk a,
    adjacent channel pairs (2i, 2i+1) rotate by positions[:, a] * base^(-2i/da)
    where da is the chunk width. Output dtype follows the input.
    """
    x = np.asarray(x)
    d = x.shape[-1]
    n = x.shape[-2]
    if axes < 1:
        raise ConfigError(f"need at least one rotation axis, got {axes}")
    if d % (2 * axes) != 0:
        raise ConfigError(f"head dim {d} not divisible by {2 * axes} for {axes} axes")
    pos = np.asarray(positions, dtype=np.float64)
    if pos.ndim == 1:
        pos = pos[:, None]
    if pos.shape != (n, axes):
        raise ConfigError(f"positions shape {pos.shape}, expected ({n}, {axes})")
    da = d // axes
    half = da // 2
    freqs = float(base) ** (-2.0 * np.arange(half, dtype=np.float64) / da)
    x64 = x.astype(np.float64)
    out = np.empty_like(x64)
    for a in range(axes):
        lo = a * da
        ang = pos[:, a, None] * freqs[None, :]  # (N, half)
        c, s = np.cos(ang), np.sin(ang)
        ev = x64[..., lo : lo + da : 2]
        od = x64[..., lo + 1 : lo + da : 2]
        out[..., lo : lo + da : 2] = ev * c - od * s
        out[..., lo + 1 : lo + da : 2] = ev * s + od * c
    return out.astype(x.dtype)


@dataclass(frozen=True)
class AttnWeights:
    """Projection weights of one attention op (row-vector convention)."""

    q_w: np.ndarray
    q_b: np.ndarray
    k_w: np.ndarray
    k_b: np.ndarray
    v_w: np.ndarray
    v_b: np.ndarray
    out_w: np.ndarray
    out_b: np.ndarray
    heads: int

    def __post_init__(self):
        c = np.asarray(self.q_w).shape[0]
        for name in ("q_w", "k_w", "v_w", "out_w"):
            shape = np.asarray(getattr(self, name)).shape
            if shape != (c, c):
                raise ConfigError(f"{name} shape {shape}, expected ({c}, {c})")
        for name in ("q_b", "k_b", "v_b", "out_b"):
            shape = np.asarray(getattr(self, name)).shape
            if shape != (c,):
                raise ConfigError(f"{name} shape {shape}, expected ({c},)")
        if self.heads < 1 or c % self.heads != 0:
            raise ConfigError(f"channels {c} not divisible by {self.heads} heads")

    @classmethod
    def from_dict(cls, weights: dict, prefix: str, heads: int) -> "AttnWeights":
        """Pull q/k/v/out tensors named `{prefix}.{q,k,v,out}.{weight,bias}`."""
        try:
            return cls(
                q_w=weights[f"{prefix}.q.weight"],
                q_b=weights[f"{prefix}.q.bias"],
                k_w=weights[f"{prefix}.k.weight"],
                k_b=weights[f"{prefix}.k.bias"],
                v_w=weights[f"{prefix}.v.weight"],
                v_b=weights[f"{prefix}.v.bias"],
                out_w=weights[f"{prefix}.out.weight"],
                out_b=weights[f"{prefix}.out.bias"],
                heads=heads,
            )
        except KeyError as err:
            raise ConfigError(f"missing attention tensor {err.args[0]}") from None

    @property
    def channels(self) -> int:
        return np.asarray(self.q_w).shape[0]


def _attend(x64: np.ndarray, w: AttnWeights, positions, base: float) -> np.ndarray:
    """Multi-head self-attention over one group of tokens, all float64.

    positions is None (no RoPE) or an (n, axes) integer array applied to both
    queries and keys per head.
    """
    n, c = x64.shape
    if c != w.channels:
        raise ConfigError(f"token width {c} does not match weights ({w.channels})")
    if n == 0:
        return x64.copy()
    q = x64 @ np.asarray(w.q_w, dtype=np.float64) + np.asarray(w.q_b, dtype=np.float64)
    k = x64 @ np.asarray(w.k_w, dtype=np.float64) + np.asarray(w.k_b, dtype=np.float64)
    v = x64 @ np.asarray(w.v_w, dtype=np.float64) + np.asarray(w.v_b, dtype=np.float64)
    hd = c // w.heads
    # (heads, n, hd)
    q = q.reshape(n, w.heads, hd).transpose(1, 0, 2)
    k = k.reshape(n, w.heads, hd).transpose(1, 0, 2)
    v = v.reshape(n, w.heads, hd).transpose(1, 0, 2)
    if positions is not None:
        axes = np.asarray(positions).shape[-1] if np.asarray(positions).ndim > 1 else 1
        q = rope_rotate(q, positions, axes, base)
        k = rope_rotate(k, positions, axes, base)
    scores = q @ k.transpose(0, 2, 1) / np.sqrt(hd)
    scores -= scores.max(axis=-1, keepdims=True)
    e = np.exp(scores)
    attn = e / e.sum(axis=-1, keepdims=True)
    out = attn @ v  # (heads, n, hd)
    out = out.transpose(1, 0, 2).reshape(n, c)
    return out @ np.asarray(w.out_w, dtype=np.float64) + np.asarray(w.out_b, dtype=np.float64)


def path_attention(
    tokens: np.ndarray,
    pidx: PathIndex,
    weights: AttnWeights,
    positions,
    rope_base: float = 10000.0,
) -> np.ndarray:
    """Per-path self-attention with scatter-mean merge of duplicated tokens.

    pidx.paths hold token indices into `tokens`; every token must appear on at
    least one path. `positions` gives each token's ordinal position inside its
    parent element (the instance-level RoPE axis); the path-level axis is the
    token's index along each path copy.
    """
    x = np.asarray(tokens)
    n = x.shape[0]
    covered = set()
    for p in pidx.paths:
        covered.update(int(i) for i in p)
    if covered and (min(covered) < 0 or max(covered) >= n):
        raise TopologyError(f"path token index out of range for {n} tokens")
    missing = sorted(set(range(n)) - covered)
    if missing:
        raise TopologyError(f"tokens not covered by any path: {missing}")
    inst = np.asarray(positions, dtype=np.int64)
    if inst.shape != (n,):
        raise ConfigError(f"positions shape {inst.shape}, expected ({n},)")
    x64 = x.astype(np.float64)
    acc = np.zeros_like(x64)
    cnt = np.zeros(n, dtype=np.float64)
    for path in pidx.paths:
        idx = np.asarray(path, dtype=np.int64)
        pos = np.stack([np.arange(len(idx), dtype=np.int64), inst[idx]], axis=1)
        out = _attend(x64[idx], weights, pos, rope_base)
        np.add.at(acc, idx, out)
        np.add.at(cnt, idx, 1.0)
    return (acc / cnt[:, None]).astype(x.dtype)


def spatial_attention(
    tokens: np.ndarray,
    coords,
    weights: AttnWeights,
    patch_size: int,
    kind: str,
    order: int = DEFAULT_ORDER,
    rope_base: float = 10000.0,
) -> np.ndarray:
    """Patch attention along a space-filling curve serialization.

    Tokens are sorted by curve index of their (x, y, r) grid cells, split into
    consecutive patches of `patch_size` (the last one shorter), attended per
    patch with 3-axis RoPE over the raw grid coordinates, and returned in the
    original token order.
    """
    x = np.asarray(tokens)
    n = x.shape[0]
    coords = np.asarray(coords, dtype=np.int64)
    if coords.shape != (n, 3):
        raise ConfigError(f"coords shape {coords.shape}, expected ({n}, 3)")
    if patch_size < 1:
        raise ConfigError(f"patch_size must be >= 1, got {patch_size}")
    if n == 0:
        return x.copy()
    ser = sort_tokens(coords, kind, order)
    x64 = x.astype(np.float64)
    xs = x64[ser.perm]
    ps = coords[ser.perm]
    out_ser = np.empty_like(xs)
    for start in range(0, n, patch_size):
        sl = slice(start, min(start + patch_size, n))
        out_ser[sl] = _attend(xs[sl], weights, ps[sl], rope_base)
    return out_ser[ser.inv].astype(x.dtype)
