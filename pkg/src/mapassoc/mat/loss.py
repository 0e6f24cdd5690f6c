"""Association losses: cross-entropy over rows plus CTC over lane paths.

CTC treats the probability rows along one lane path as a length-T temporal
signal over K road classes plus a blank. The target for a path is its
ground-truth road sequence with consecutive repeats collapsed, matching CTC's
collapse semantics (many consecutive centerlines of one road are one label).
The blank occupies the LAST column (index K) of every log-probability row.
"""

from __future__ import annotations

import math

import numpy as np

from ..assocmatrix import AssocMatrix
from ..errors import ConfigError, LabelError
from ..geometry import Association, Scene, enumerate_paths

__all__ = [
    "collapse_repeats",
    "with_blank",
    "ctc_log_likelihood",
    "ctc_loss",
    "path_targets",
    "compute_loss",
]

_NEG_INF = -math.inf


def collapse_repeats(labels) -> tuple:
    """Merge consecutive equal labels: [A, A, B, A] -> (A, B, A)."""
    out = []
    for l in labels:
        if not out or out[-1] != l:
            out.append(l)
    return tuple(out)


def with_blank(prob_rows: np.ndarray, blank_prob: float = 0.0) -> np.ndarray:
    """Append a blank column to (T, K) probability rows; returns log-probs.

    Class probabilities are rescaled by (1 - blank_prob) so rows still sum to
    one. Zero entries map to -inf log-probability.
    """
    p = np.asarray(prob_rows, dtype=np.float64)
    if p.ndim != 2:
        raise ConfigError(f"expected (T, K) probability rows, got shape {p.shape}")
    if not 0.0 <= blank_prob < 1.0:
        raise ConfigError(f"blank_prob must be in [0, 1), got {blank_prob}")
    full = np.concatenate(
        [p * (1.0 - blank_prob), np.full((p.shape[0], 1), blank_prob)], axis=1
    )
    with np.errstate(divide="ignore"):
        return np.log(full)


def ctc_log_likelihood(logprobs: np.ndarray, labels) -> float:
    """Log-probability that the (T, K+1) emissions collapse to `labels`.

    Standard forward dynamic program over the blank-extended target; blank is
    column K. Returns -inf when no alignment exists (e.g. T too short for the
    repeats in the target).
    """
    lp = np.asarray(logprobs, dtype=np.float64)
    if lp.ndim != 2 or lp.shape[1] < 2:
        raise ConfigError(f"expected (T, K+1) log-probs with K >= 1, got {lp.shape}")
    t_steps, width = lp.shape
    blank = width - 1
    labels = [int(l) for l in labels]
    if any(l < 0 or l >= blank for l in labels):
        raise LabelError(f"label outside class range [0, {blank})")
    if len(labels) > t_steps:
        raise LabelError(f"target length {len(labels)} exceeds {t_steps} time steps")
    if not labels:
        return float(lp[:, blank].sum())
    ext = [blank]
    for l in labels:
        ext.extend((l, blank))
    s_len = len(ext)
    alpha = np.full(s_len, _NEG_INF)
    alpha[0] = lp[0, blank]
    alpha[1] = lp[0, ext[1]]
    for t in range(1, t_steps):
        prev = alpha
        alpha = np.full(s_len, _NEG_INF)
        for s in range(s_len):
            a = prev[s]
            if s >= 1:
                a = np.logaddexp(a, prev[s - 1])
            if s >= 2 and ext[s] != blank and ext[s] != ext[s - 2]:
                a = np.logaddexp(a, prev[s - 2])
            if a != _NEG_INF:
                alpha[s] = a + lp[t, ext[s]]
    return float(np.logaddexp(alpha[-1], alpha[-2]))


def ctc_loss(logprobs: np.ndarray, labels) -> float:
    """Negative log-likelihood form of ctc_log_likelihood."""
    return -ctc_log_likelihood(logprobs, labels)


def path_targets(
    scene: Scene,
    amat: AssocMatrix,
    gt: Association,
    blank_prob: float = 0.0,
) -> tuple:
    """Per-lane-path CTC inputs from a scene's matrix and ground truth.

    Returns (logprob_seqs, label_seqs): for every root-to-leaf lane path, the
    blank-extended log-probability rows of its centerlines and the collapsed
    ground-truth road-id sequence.
    """
    logprob_seqs = []
    label_seqs = []
    for path in enumerate_paths(scene.hd).paths:
        rows = amat.rows_for(path)
        logprob_seqs.append(with_blank(rows, blank_prob))
        try:
            seq = [gt[cid] for cid in path]
        except KeyError as err:
            raise LabelError(f"gt does not cover centerline {err.args[0]}") from None
        label_seqs.append(collapse_repeats(seq))
    return logprob_seqs, label_seqs


def compute_loss(
    probs: AssocMatrix,
    gt: Association,
    path_logprob_seqs,
    gt_label_seqs,
    alpha: float = 1.0,
    beta: float = 0.01,
) -> dict:
    """Weighted total of row cross-entropy and per-path CTC.

    ce   mean over centerlines of -log P[i, gt(i)]
    ctc  mean over lane paths of the CTC negative log-likelihood
    gt_label_seqs hold ROAD IDS; they are mapped to matrix columns here, so a
    label outside the candidate road set is an error.
    """
    col = {rid: j for j, rid in enumerate(probs.road_ids)}
    p64 = probs.probs.astype(np.float64)
    ce_terms = []
    for i, cid in enumerate(probs.centerline_ids):
        try:
            rid = gt[cid]
        except KeyError:
            raise LabelError(f"gt does not cover centerline {cid}") from None
        if rid not in col:
            raise LabelError(f"gt road {rid} not among candidate roads")
        with np.errstate(divide="ignore"):
            ce_terms.append(-np.log(p64[i, col[rid]]))
    ce = float(np.mean(ce_terms))
    if len(path_logprob_seqs) != len(gt_label_seqs):
        raise ConfigError(
            f"{len(path_logprob_seqs)} log-prob sequences vs "
            f"{len(gt_label_seqs)} label sequences"
        )
    ctc_terms = []
    for lp, seq in zip(path_logprob_seqs, gt_label_seqs):
        cols = []
        for rid in seq:
            if rid not in col:
                raise LabelError(f"gt road {rid} not among candidate roads")
            cols.append(col[rid])
        ctc_terms.append(ctc_loss(lp, cols))
    ctc = float(np.mean(ctc_terms)) if ctc_terms else 0.0
    return {"ce": ce, "ctc": ctc, "total": alpha * ce + beta * ctc}
