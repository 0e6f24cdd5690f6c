"""Topology-constrained bidirectional beam search over association rows.

Decoding runs per lane path. The seed hypothesis is the single most confident
(token, road) cell of the path's probability rows; hypotheses then grow one
token per step, leftward or rightward, only through road pairs connected in
the road graph (self-transitions always count as connected, since many
consecutive centerlines legitimately map to one road). All hypotheses reach
full span at the same step; the best-scoring one wins.

Scores are sums of log-probabilities. When no connected extension exists at
some step, the decoder falls back to the unconstrained argmax for that token
and flags the position, so the result is always total.

Tie-breaks, in order: higher score, lexicographically smaller label sequence,
smaller left span index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .assocmatrix import AssocMatrix
from .errors import ConfigError, LabelError
from .geometry import Association, Scene, enumerate_paths

__all__ = [
    "DecoderConfig",
    "Hypothesis",
    "DecodeResult",
    "init_token",
    "beam_decode",
    "decode_association",
]


@dataclass(frozen=True)
class DecoderConfig:
    """Beam width and an optional cap on beam-grown sequence length."""

    k: int = 5
    max_len: Union[int, None] = None

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"beam width must be >= 1, got {self.k}")
        if self.max_len is not None and self.max_len < 1:
            raise ConfigError(f"max_len must be >= 1, got {self.max_len}")


@dataclass(frozen=True)
class Hypothesis:
    """A partial decode: labels for the token interval span=[left, right]."""

    labels: tuple
    score: float
    span: tuple


@dataclass(frozen=True)
class DecodeResult:
    """Total labels for one lane path, position-aligned with the path."""

    labels: tuple
    score: float
    fallback: bool = False
    fallback_positions: tuple = ()


def _init_on_rows(rows: np.ndarray) -> tuple:
    """Globally best (token, column); ties take the lowest token then column."""
    row_best = rows.max(axis=1)
    t = int(np.argmax(row_best))
    j = int(np.argmax(rows[t]))
    return t, j


def init_token(probs: AssocMatrix, path) -> tuple:
    """Most confident (path position, road id) over a lane path's rows."""
    path = list(path)
    if not path:
        raise LabelError("empty lane path")
    rows = probs.rows_for(path)
    t, j = _init_on_rows(rows)
    return t, int(probs.road_ids[j])


def beam_decode(
    rows: np.ndarray,
    road_ids,
    sd_edges,
    cfg: DecoderConfig = DecoderConfig(),
) -> DecodeResult:
    """Decode one lane path's (T, K) probability rows into road labels.

    `sd_edges` is the directed road connectivity; an extension to the left
    prepends a predecessor of the current first label, to the right appends a
    successor of the current last label. Tokens outside the beam-grown span
    (only possible under a max_len cap) are filled by unconstrained argmax and
    flagged.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
        raise ConfigError(f"expected a (T, K) matrix with T, K >= 1, got {rows.shape}")
    road_ids = [int(r) for r in road_ids]
    if len(road_ids) != rows.shape[1]:
        raise ConfigError(f"{len(road_ids)} road ids for {rows.shape[1]} columns")
    t_steps = rows.shape[0]
    with np.errstate(divide="ignore"):
        logs = np.log(rows)
    known = set(road_ids)
    succ = {r: {r} for r in road_ids}
    pred = {r: {r} for r in road_ids}
    for a, b in sd_edges:
        a, b = int(a), int(b)
        if a in known and b in known:
            succ[a].add(b)
            pred[b].add(a)
    col = {r: j for j, r in enumerate(road_ids)}

    t0, j0 = _init_on_rows(rows)
    target = t_steps if cfg.max_len is None else min(cfg.max_len, t_steps)
    # beam entries: (Hypothesis, fallback position tuple)
    seed = Hypothesis(labels=(road_ids[j0],), score=float(logs[t0, j0]), span=(t0, t0))
    beam = [(seed, ())]
    while (beam[0][0].span[1] - beam[0][0].span[0] + 1) < target:
        cands = []
        for h, fb in beam:
            left, right = h.span
            if left > 0:
                t = left - 1
                for w in sorted(pred[h.labels[0]]):
                    s = h.score + logs[t, col[w]]
                    if s != -math.inf:
                        cands.append((Hypothesis((w,) + h.labels, s, (t, right)), fb))
            if right < t_steps - 1:
                t = right + 1
                for w in sorted(succ[h.labels[-1]]):
                    s = h.score + logs[t, col[w]]
                    if s != -math.inf:
                        cands.append((Hypothesis(h.labels + (w,), s, (left, t)), fb))
        if not cands:
            # dead end: take the unconstrained argmax for the next token
            for h, fb in beam:
                left, right = h.span
                if right < t_steps - 1:
                    t = right + 1
                    j = int(np.argmax(rows[t]))
                    cands.append(
                        (
                            Hypothesis(
                                h.labels + (road_ids[j],),
                                h.score + float(logs[t, j]),
                                (left, t),
                            ),
                            fb + (t,),
                        )
                    )
                else:
                    t = left - 1
                    j = int(np.argmax(rows[t]))
                    cands.append(
                        (
                            Hypothesis(
                                (road_ids[j],) + h.labels,
                                h.score + float(logs[t, j]),
                                (t, right),
                            ),
                            fb + (t,),
                        )
                    )
        cands.sort(key=lambda e: (-e[0].score, e[0].labels, e[0].span[0]))
        beam = cands[: cfg.k]
    best, fb = beam[0]
    labels, score = best.labels, best.score
    left, right = best.span
    if right - left + 1 < t_steps:
        # max_len cap: fill the uncovered flanks by per-token argmax
        full = []
        for t in range(t_steps):
            if left <= t <= right:
                full.append(labels[t - left])
            else:
                j = int(np.argmax(rows[t]))
                full.append(road_ids[j])
                score += float(logs[t, j])
                fb = fb + (t,)
        labels = tuple(full)
    return DecodeResult(
        labels=labels,
        score=float(score),
        fallback=bool(fb),
        fallback_positions=tuple(sorted(fb)),
    )


def decode_association(
    scene: Scene,
    amat: AssocMatrix,
    cfg: DecoderConfig = DecoderConfig(),
) -> Association:
    """Beam-decode every lane path of a scene into one total Association.

    A centerline on several paths takes its label from the highest-scoring
    path; ties go to the earlier path in enumeration order. Paths that needed
    an argmax fallback are listed in the association's meta.
    """
    labels = {}
    best_score = {}
    fallback_paths = []
    for pi, path in enumerate(enumerate_paths(scene.hd).paths):
        rows = amat.rows_for(path)
        res = beam_decode(rows, amat.road_ids, scene.sd.edges, cfg)
        if res.fallback:
            fallback_paths.append(pi)
        for cl, rid in zip(path, res.labels):
            if cl not in labels or res.score > best_score[cl]:
                labels[cl] = int(rid)
                best_score[cl] = res.score
    meta = {"method": "beam", "k": cfg.k}
    if fallback_paths:
        meta["fallback_paths"] = fallback_paths
    return Association(labels=labels, meta=meta)
