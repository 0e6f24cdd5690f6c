"""Classical association baselines: nearest-road and an HMM decoder.

The nearest-road baseline labels each centerline with the road closest to its
midpoint. The HMM treats roads as hidden states along each lane path:
Gaussian emissions on midpoint-to-road distance, transitions favoring staying
on a road or moving to a connected one. Both share the same vectorized
distance kernel, and the Gaussian emissions double as a soft association
matrix for the topology-constrained decoder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assocmatrix import AssocMatrix
from .errors import LabelError, NoFeasiblePathError
from .geometry import Association, Scene, enumerate_paths

__all__ = [
    "HmmParams",
    "knn_associate",
    "viterbi",
    "hmm_associate",
    "distance_assoc_matrix",
]


@dataclass(frozen=True)
class HmmParams:
    """HMM settings. The emission sigma matches the scale reconstructed from
    typical lane-to-road offsets; transition weights are normalized per row."""

    emission_sigma: float = 4.07
    transition_self: float = 0.7
    transition_adjacent: float = 0.3
    disallow_nonadjacent: bool = True


# ---------------------------------------------------------------------------
# distance kernel


def _polyline_dist_matrix(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    # points (N, 2), poly (M, 2) with distinct consecutive rows -> (N,) distances
    a = poly[:-1]
    seg = poly[1:] - a
    seg2 = (seg * seg).sum(axis=1)
    d = points[:, None, :] - a[None, :, :]
    t = np.clip((d * seg[None, :, :]).sum(axis=2) / seg2[None, :], 0.0, 1.0)
    foot = a[None, :, :] + t[:, :, None] * seg[None, :, :]
    diff = points[:, None, :] - foot
    return np.sqrt((diff * diff).sum(axis=2)).min(axis=1)


def _scene_distances(scene: Scene) -> tuple[np.ndarray, tuple, tuple]:
    """(n_centerlines, n_roads) midpoint distances, plus sorted id orders."""
    cls = sorted(scene.hd.centerlines, key=lambda c: c.id)
    roads = sorted(scene.sd.roads, key=lambda r: r.id)
    if not roads:
        raise LabelError("scene has no roads to associate against")
    mids = np.array([[c.vector.midpoint.x, c.vector.midpoint.y] for c in cls], dtype=np.float64)
    mids = mids.reshape(len(cls), 2)
    dist = np.empty((len(cls), len(roads)), dtype=np.float64)
    for j, road in enumerate(roads):
        poly = np.array(road.points, dtype=np.float64)
        if len(cls):
            dist[:, j] = _polyline_dist_matrix(mids, poly)
    cl_ids = tuple(c.id for c in cls)
    road_ids = tuple(r.id for r in roads)
    return dist, cl_ids, road_ids


def knn_associate(scene: Scene) -> Association:
    """Label every centerline with the road nearest its midpoint.

    Ties resolve to the lowest road id.
    """
    dist, cl_ids, road_ids = _scene_distances(scene)
    best = np.argmin(dist, axis=1)  # first min, columns ascend by road id
    labels = {c: int(road_ids[b]) for c, b in zip(cl_ids, best)}
    return Association(labels=labels, meta={"method": "knn"})


# ---------------------------------------------------------------------------
# HMM


def viterbi(log_emissions, log_transitions, log_prior) -> tuple[list, float]:
    """Most probable state sequence under sum of prior, emission, transition
    log-probabilities. Among ties, returns the lexicographically smallest
    sequence. Raises NoFeasiblePathError when every sequence scores -inf.
    """
    em = np.asarray(log_emissions, dtype=np.float64)
    tr = np.asarray(log_transitions, dtype=np.float64)
    pri = np.asarray(log_prior, dtype=np.float64)
    if em.ndim != 2 or em.shape[0] < 1:
        raise ValueError(f"emissions must be (T, S) with T >= 1, got {em.shape}")
    t_steps, n_states = em.shape
    if tr.shape != (n_states, n_states) or pri.shape != (n_states,):
        raise ValueError("transition or prior shape does not match state count")

    # beta[t][s]: best score of the suffix starting at t in state s.
    # Greedy forward reconstruction over beta picks the lexicographically
    # smallest optimal sequence (np.argmax returns the first maximum).
    beta = np.empty_like(em)
    beta[-1] = em[-1]
    for t in range(t_steps - 2, -1, -1):
        beta[t] = em[t] + np.max(tr + beta[t + 1][None, :], axis=1)
    totals = pri + beta[0]
    best = float(np.max(totals))
    if best == -math.inf or math.isnan(best):
        raise NoFeasiblePathError("all state sequences have zero probability")
    states = [int(np.argmax(totals))]
    for t in range(1, t_steps):
        cand = tr[states[-1]] + beta[t]
        states.append(int(np.argmax(cand)))
    return states, best


def _log_transition_matrix(scene: Scene, params: HmmParams, road_ids: tuple) -> np.ndarray:
    n = len(road_ids)
    col = {r: j for j, r in enumerate(road_ids)}
    succ = scene.sd.successors
    w = np.zeros((n, n), dtype=np.float64)
    for i, rid in enumerate(road_ids):
        adjacent = succ.get(rid, ())
        w[i, i] = params.transition_self
        if adjacent:
            share = params.transition_adjacent / len(adjacent)
            for other in adjacent:
                w[i, col[other]] += share
        if not params.disallow_nonadjacent:
            # lenient mode: a small uniform floor keeps every move possible
            floor = params.transition_adjacent / max(n, 1)
            for j in range(n):
                if j != i and w[i, j] == 0.0:
                    w[i, j] = floor
        w[i] /= w[i].sum()
    with np.errstate(divide="ignore"):
        return np.log(w)


def _log_emissions(dist: np.ndarray, sigma: float) -> np.ndarray:
    return -0.5 * (dist / sigma) ** 2 - math.log(sigma * math.sqrt(2.0 * math.pi))


def hmm_associate(scene: Scene, params: HmmParams = HmmParams()) -> Association:
    """Viterbi-decode road labels along every lane path.

    Tokens shared by several paths take the label from the path with the
    highest Viterbi score (ties keep the earlier path in enumeration order).
    A path with no feasible state sequence falls back to nearest-road labels
    for its tokens; the fallback paths are recorded in the association meta.
    """
    dist, cl_ids, road_ids = _scene_distances(scene)
    row_of = {c: i for i, c in enumerate(cl_ids)}
    log_em_all = _log_emissions(dist, params.emission_sigma)
    log_tr = _log_transition_matrix(scene, params, road_ids)
    log_prior = np.full(len(road_ids), -math.log(len(road_ids)), dtype=np.float64)

    knn_best = np.argmin(dist, axis=1)
    pidx = enumerate_paths(scene.hd)
    labels: dict = {}
    best_score: dict = {}
    fallback_paths = []
    for path_no, path in enumerate(pidx.paths):
        rows = [row_of[c] for c in path]
        em = log_em_all[rows]
        try:
            states, score = viterbi(em, log_tr, log_prior)
            path_labels = [int(road_ids[s]) for s in states]
        except NoFeasiblePathError:
            path_labels = [int(road_ids[knn_best[r]]) for r in rows]
            score = -math.inf
            fallback_paths.append(path_no)
        for cl, rid in zip(path, path_labels):
            if cl not in labels or score > best_score[cl]:
                labels[cl] = rid
                best_score[cl] = score
    meta = {"method": "hmm"}
    if fallback_paths:
        meta["fallback_paths"] = fallback_paths
    return Association(labels=labels, meta=meta)


def distance_assoc_matrix(scene: Scene, sigma: float = HmmParams.emission_sigma) -> AssocMatrix:
    """Soft association from Gaussian distance emissions, row-normalized.

    Gives classical methods a probability matrix the beam decoder can
    post-process.
    """
    dist, cl_ids, road_ids = _scene_distances(scene)
    logits = _log_emissions(dist, sigma)
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    return AssocMatrix(probs=p.astype(np.float32), centerline_ids=cl_ids, road_ids=road_ids)
