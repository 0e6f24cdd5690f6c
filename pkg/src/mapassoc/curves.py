"""Space-filling-curve serialization of direction-vector tokens.

Tokens are quantized to an integer (x, y, r) grid cell: x/y from the vector
centroid at cell size ``g`` meters, r from the heading angle normalized to
[0, 2pi) and split into ``R`` sectors. Cells are then linearized by one of
four curve kinds:

``z``             Morton interleave, x least significant.
``z-trans``       Morton with axis roles permuted to (r, y, x).
``hilbert``       3D Hilbert curve (Skilling transpose construction).
``hilbert-trans`` Hilbert with axis roles permuted to (r, y, x).

Sorting by curve index with a stable original-index tie-break yields the
serialization permutation consumed by patch attention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import RangeError
from .geometry import DirVec

__all__ = [
    "GridCoord",
    "CURVE_KINDS",
    "SerializationOrder",
    "grid_encode",
    "grid_encode_batch",
    "curve_index",
    "curve_index_batch",
    "sort_tokens",
    "DEFAULT_GRID_G",
    "DEFAULT_GRID_R",
    "DEFAULT_ORDER",
]

CURVE_KINDS = ("z", "z-trans", "hilbert", "hilbert-trans")

DEFAULT_GRID_G = 0.1
DEFAULT_GRID_R = 16
DEFAULT_ORDER = 16

_TWO_PI = 2.0 * math.pi


class GridCoord(NamedTuple):
    """Integer grid cell: planar cell (x, y) plus heading sector r."""

    x: int
    y: int
    r: int


@dataclass(frozen=True)
class SerializationOrder:
    """A serialization permutation and its inverse.

    ``perm[i]`` is the original index of the token in serialized slot i;
    ``inv[j]`` is the serialized slot of original token j, so
    ``perm[inv[j]] == j``.
    """

    perm: np.ndarray
    inv: np.ndarray


def grid_encode(v: DirVec, g: float = DEFAULT_GRID_G, R: int = DEFAULT_GRID_R) -> GridCoord:
    """Quantize one vector to its grid cell."""
    if g <= 0.0:
        raise RangeError(f"cell size must be positive, got {g}")
    if R < 1:
        raise RangeError(f"sector count must be >= 1, got {R}")
    x = math.floor((v.p1.x + v.p2.x) / (2.0 * g))
    y = math.floor((v.p1.y + v.p2.y) / (2.0 * g))
    theta_norm = v.theta % _TWO_PI
    r = min(int(theta_norm // (_TWO_PI / R)), R - 1)
    return GridCoord(x, y, r)


def grid_encode_batch(
    vectors: Sequence[DirVec], g: float = DEFAULT_GRID_G, R: int = DEFAULT_GRID_R
) -> np.ndarray:
    """Quantize many vectors at once; returns an (N, 3) int64 array."""
    if g <= 0.0:
        raise RangeError(f"cell size must be positive, got {g}")
    if R < 1:
        raise RangeError(f"sector count must be >= 1, got {R}")
    if len(vectors) == 0:
        return np.zeros((0, 3), dtype=np.int64)
    a = np.array([v.as_tuple() for v in vectors], dtype=np.float64)
    x = np.floor((a[:, 0] + a[:, 2]) / (2.0 * g)).astype(np.int64)
    y = np.floor((a[:, 1] + a[:, 3]) / (2.0 * g)).astype(np.int64)
    theta_norm = np.mod(a[:, 4], _TWO_PI)
    r = np.minimum((theta_norm // (_TWO_PI / R)).astype(np.int64), R - 1)
    return np.stack([x, y, r], axis=1)


# ---------------------------------------------------------------------------
# curve linearization
#
# All kernels work on a (3, N) uint64 axes matrix where row 0 is the least
# significant Morton axis (and the leading Hilbert axis). The `-trans` kinds
# feed the rows in (r, y, x) order instead of (x, y, r).


def _check_range(axes: np.ndarray, order: int):
    if order < 1 or order > 20:
        raise RangeError(f"order must be in [1, 20], got {order}")
    lim = 1 << order
    if axes.size and (axes.min() < 0 or axes.max() >= lim):
        bad = axes.min() if axes.min() < 0 else axes.max()
        raise RangeError(f"coordinate {int(bad)} outside [0, {lim}) at order {order}")


def _morton(axes: np.ndarray, order: int) -> np.ndarray:
    # axes: (3, N) non-negative int64; row 0 least significant
    out = np.zeros(axes.shape[1], dtype=np.uint64)
    a = axes.astype(np.uint64)
    for bit in range(order):
        for axis in range(3):
            out |= ((a[axis] >> np.uint64(bit)) & np.uint64(1)) << np.uint64(3 * bit + axis)
    return out


def _hilbert_transpose(axes: np.ndarray, order: int) -> np.ndarray:
    # Skilling's axes-to-transpose, vectorized over columns.
    x = axes.astype(np.uint64).copy()
    n = x.shape[0]
    q = np.uint64(1 << (order - 1))
    one = np.uint64(1)
    while q > one:
        p = np.uint64(q - one)
        for i in range(n):
            hi = (x[i] & q) != 0
            # invert low bits of x[0] where bit q of x[i] is set
            x[0] = np.where(hi, x[0] ^ p, x[0])
            # otherwise exchange low bits of x[0] and x[i]
            t = np.where(hi, np.uint64(0), (x[0] ^ x[i]) & p)
            x[0] ^= t
            x[i] ^= t
        q >>= one
    for i in range(1, n):
        x[i] ^= x[i - 1]
    t = np.zeros_like(x[0])
    q = np.uint64(1 << (order - 1))
    while q > one:
        mask = (x[n - 1] & q) != 0
        t = np.where(mask, t ^ np.uint64(q - one), t)
        q >>= one
    for i in range(n):
        x[i] ^= t
    return x


def _hilbert(axes: np.ndarray, order: int) -> np.ndarray:
    x = _hilbert_transpose(axes, order)
    # interleave transposed bits, axis 0 most significant within each group
    out = np.zeros(axes.shape[1], dtype=np.uint64)
    n = x.shape[0]
    for bit in range(order - 1, -1, -1):
        for axis in range(n):
            out = (out << np.uint64(1)) | ((x[axis] >> np.uint64(bit)) & np.uint64(1))
    return out


def _axes_matrix(coords: np.ndarray, kind: str) -> np.ndarray:
    if kind in ("z", "hilbert"):
        return coords.T
    if kind in ("z-trans", "hilbert-trans"):
        return coords[:, ::-1].T
    raise RangeError(f"unknown curve kind {kind!r}; expected one of {CURVE_KINDS}")


def curve_index_batch(coords: np.ndarray, kind: str, order: int = DEFAULT_ORDER) -> np.ndarray:
    """Curve index for an (N, 3) array of non-negative (x, y, r) cells."""
    coords = np.asarray(coords, dtype=np.int64)
    if coords.ndim != 2 or coords.shape[1] != 3:
        raise RangeError(f"expected an (N, 3) coordinate array, got shape {coords.shape}")
    axes = _axes_matrix(coords, kind)
    _check_range(axes, order)
    if kind.startswith("z"):
        return _morton(axes, order)
    return _hilbert(axes, order)


def curve_index(coord: GridCoord, kind: str, order: int = DEFAULT_ORDER) -> int:
    """Curve index of a single non-negative grid cell."""
    arr = np.array([[coord[0], coord[1], coord[2]]], dtype=np.int64)
    return int(curve_index_batch(arr, kind, order)[0])


def sort_tokens(coords, kind: str, order: int = DEFAULT_ORDER) -> SerializationOrder:
    """Serialization permutation of tokens by curve index.

    Coordinates are offset by the per-call minimum on each axis before
    indexing, so negative cells are fine as long as each axis spread fits in
    ``order`` bits. Equal keys keep original order (stable sort), making the
    permutation a bijection with a deterministic tie-break.
    """
    coords = np.asarray(coords, dtype=np.int64)
    if coords.size == 0:
        e = np.zeros(0, dtype=np.int64)
        return SerializationOrder(perm=e, inv=e.copy())
    if coords.ndim != 2 or coords.shape[1] != 3:
        raise RangeError(f"expected an (N, 3) coordinate array, got shape {coords.shape}")
    shifted = coords - coords.min(axis=0, keepdims=True)
    keys = curve_index_batch(shifted, kind, order)
    perm = np.argsort(keys, kind="stable").astype(np.int64)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm), dtype=np.int64)
    return SerializationOrder(perm=perm, inv=inv)
