"""Association and reachability precision-recall, with hand-walked fixtures."""

from __future__ import annotations

import math

import numpy as np
import pytest

from mapassoc.baselines import knn_associate
from mapassoc.errors import ConfigError, CoverageError, InvalidGeometryError
from mapassoc.geometry import Association, HdGraph, Scene
from mapassoc.metrics import (
    DEFAULT_THRESHOLDS,
    MetricConfig,
    MetricReport,
    Prediction,
    association_pr,
    chamfer_distance,
    label_sequence,
    overlap_ratio,
    reachability_pr,
    report_table,
)
from mapassoc.scenegen import GenConfig, PerturbConfig, generate_scene, perturb_scene

from conftest import make_centerline
from oracles import chamfer_brute, lcs_overlap


# ---------------------------------------------------------------------------
# collapsed label sequences


def test_label_sequence_merges_runs(tiny):
    path = (0, 1, 2)
    assert label_sequence(path, tiny.gt, tiny.hd) == ((0,), (9.0,))
    mixed = Association(labels={0: 0, 1: 0, 2: 1})
    assert label_sequence(path, mixed, tiny.hd) == ((0, 1), (6.0, 3.0))
    alternating = Association(labels={0: 0, 1: 1, 2: 0})
    assert label_sequence(path, alternating, tiny.hd) == ((0, 1, 0), (3.0, 3.0, 3.0))


def test_label_sequence_single_token(tiny):
    assert label_sequence((4,), tiny.gt, tiny.hd) == ((1,), (3.0,))


def test_label_sequence_requires_coverage(tiny):
    with pytest.raises(CoverageError, match="does not cover"):
        label_sequence((0, 1), Association(labels={0: 0}), tiny.hd)
    with pytest.raises(CoverageError, match="no centerline"):
        label_sequence((99,), Association(labels={99: 0}), tiny.hd)


# ---------------------------------------------------------------------------
# overlap ratio


def test_overlap_identical_is_one():
    seq = ((3, 7), (4.0, 2.5))
    assert overlap_ratio(seq, seq) == 1.0


def test_overlap_disjoint_is_zero():
    assert overlap_ratio(((1,), (5.0,)), ((2,), (5.0,))) == 0.0


def test_overlap_half_match():
    pred = ((0, 1), (4.0, 4.0))
    gt = ((0, 2), (4.0, 4.0))
    assert overlap_ratio(pred, gt) == pytest.approx(0.5)


def test_overlap_clamps_to_one():
    # prediction covers more length than the ground truth run
    assert overlap_ratio(((5,), (12.0,)), ((5,), (8.0,))) == 1.0


def test_overlap_prefers_longer_common_subsequence():
    # matching (0, 1) in order beats matching only the long 1-run
    pred = ((0, 1), (2.0, 2.0))
    gt = ((1, 0, 1), (1.0, 2.0, 1.0))
    # lcs picks 0 then 1 (or 1 then 0 skipped); best aligned sum = 2 + 1
    assert overlap_ratio(pred, gt) == pytest.approx(3.0 / 4.0)


def test_overlap_zero_length_ground_truth_raises():
    with pytest.raises(InvalidGeometryError):
        overlap_ratio(((0,), (1.0,)), ((), ()))


def test_overlap_matches_exhaustive_alignment():
    rng = np.random.default_rng(21)
    for _ in range(200):
        n, m = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        pl = [int(x) for x in rng.integers(0, 3, size=n)]
        gl = [int(x) for x in rng.integers(0, 3, size=m)]
        pv = [float(x) for x in rng.uniform(0.5, 5.0, size=n)]
        gv = [float(x) for x in rng.uniform(0.5, 5.0, size=m)]
        got = overlap_ratio((pl, pv), (gl, gv))
        want = lcs_overlap(pl, pv, gl, gv)
        assert got == pytest.approx(want, abs=1e-12)


# ---------------------------------------------------------------------------
# chamfer distance


def test_chamfer_examples():
    assert chamfer_distance([(0.0, 0.0)], [(3.0, 4.0)]) == pytest.approx(5.0)
    pts = [(0.0, 0.0), (2.0, 1.0)]
    assert chamfer_distance(pts, pts) == 0.0
    assert chamfer_distance([(0.0, 0.0), (1.0, 0.0)], [(0.0, 0.0)]) == pytest.approx(0.25)


def test_chamfer_symmetric_and_matches_brute():
    rng = np.random.default_rng(3)
    for _ in range(25):
        a = rng.uniform(-10, 10, size=(int(rng.integers(1, 8)), 2))
        b = rng.uniform(-10, 10, size=(int(rng.integers(1, 8)), 2))
        got = chamfer_distance(a, b)
        assert got == pytest.approx(chamfer_brute(a.tolist(), b.tolist()), rel=1e-12)
        assert got == pytest.approx(chamfer_distance(b, a), rel=1e-12)


def test_chamfer_rejects_empty():
    with pytest.raises(InvalidGeometryError):
        chamfer_distance([], [(0.0, 0.0)])


# ---------------------------------------------------------------------------
# metric config


def test_bucket_of():
    cfg = MetricConfig()
    assert cfg.bucket_of(0.0) == 0
    assert cfg.bucket_of(4.99) == 0
    assert cfg.bucket_of(5.0) == 1
    assert cfg.bucket_of(74.9) == 14
    assert cfg.bucket_of(1e9) == 14
    with pytest.raises(ConfigError):
        cfg.bucket_of(-1.0)


def test_metric_config_validation():
    with pytest.raises(ConfigError):
        MetricConfig(thresholds=(0.9, 0.5))
    with pytest.raises(ConfigError):
        MetricConfig(thresholds=(0.0, 0.5))
    with pytest.raises(ConfigError):
        MetricConfig(thresholds=())
    with pytest.raises(ConfigError):
        MetricConfig(length_buckets=((0.0, 5.0), (6.0, math.inf)))
    with pytest.raises(ConfigError):
        MetricConfig(length_buckets=((0.0, 5.0), (5.0, 10.0)))
    with pytest.raises(ConfigError):
        MetricConfig(point_match_tau=0.0)
    with pytest.raises(ConfigError):
        MetricConfig(chamfer_tau=-1.0)


# ---------------------------------------------------------------------------
# association precision-recall


def test_association_self_evaluation_is_exactly_one(tiny, grid42):
    for scene in (tiny, grid42):
        rep = association_pr([scene.gt], [scene])
        np.testing.assert_array_equal(rep.precision, 1.0)
        np.testing.assert_array_equal(rep.recall, 1.0)
        np.testing.assert_array_equal(rep.f1, 1.0)
        assert rep.ap == rep.ar == rep.af1 == 1.0
        assert int(rep.counts[:, :, 1].sum()) == 0
        assert int(rep.counts[:, :, 2].sum()) == 0


def test_association_hand_walked_two_path_fixture(tiny):
    # chain (0,1,2): predicted (0,0,1) overlaps gt (0,0,0) by 6/9 = 0.667,
    # a TP up to threshold 0.65 and an FP beyond; chain (3,4,5) is perfect
    pred = Association(labels={0: 0, 1: 0, 2: 1, 3: 1, 4: 1, 5: 1})
    rep = association_pr([pred], [tiny])
    tp = rep.counts[:, :, 0].sum(axis=1)
    fp = rep.counts[:, :, 1].sum(axis=1)
    for i, th in enumerate(rep.thresholds):
        if th <= 6.0 / 9.0:
            assert (tp[i], fp[i]) == (2, 0)
        else:
            assert (tp[i], fp[i]) == (1, 1)
    # both paths are 9 m long: bucket 1 only
    assert set(np.nonzero(rep.counts.sum(axis=(0, 2)))[0]) == {1}
    assert rep.ap == pytest.approx((4 * 1.0 + 6 * 0.5) / 10.0)
    assert rep.ar == 1.0
    assert rep.at_threshold(0.7)["f1"] == pytest.approx(2 * 0.5 / 1.5)


def test_association_empty_prediction_graph_scores_zero(tiny):
    pred = Prediction(assoc=Association(labels={}), hd=HdGraph(centerlines=(), edges=()))
    rep = association_pr([pred], [tiny])
    np.testing.assert_array_equal(rep.precision, 0.0)
    np.testing.assert_array_equal(rep.recall, 0.0)
    np.testing.assert_array_equal(rep.f1, 0.0)
    assert int(rep.counts[:, :, 2].sum()) == 2 * len(rep.thresholds)


def test_association_tp_monotone_in_threshold():
    scenes, preds = [], []
    for seed in range(6):
        s = generate_scene(GenConfig(seed=seed))
        noisy = perturb_scene(s, PerturbConfig(gps_shift=2.0, dropout_rate=0.1, seed=seed))
        scenes.append(noisy)
        preds.append(knn_associate(noisy))
    rep = association_pr(preds, scenes)
    tp = rep.counts[:, :, 0].sum(axis=1)
    assert np.all(np.diff(tp) <= 0)
    gt_paths = rep.counts[0, :, :].sum()
    assert np.all(rep.counts.sum(axis=(1, 2)) == gt_paths)  # one verdict per path


def test_association_scene_order_invariant(tiny, grid42):
    preds = [knn_associate(tiny), knn_associate(grid42)]
    a = association_pr(preds, [tiny, grid42])
    b = association_pr(preds[::-1], [grid42, tiny])
    np.testing.assert_array_equal(a.counts, b.counts)


def test_association_validates_inputs(tiny):
    with pytest.raises(ConfigError, match="predictions"):
        association_pr([tiny.gt], [tiny, tiny])
    with pytest.raises(CoverageError, match="does not cover"):
        association_pr([Association(labels={0: 0})], [tiny])
    bare = Scene(sd=tiny.sd, hd=tiny.hd)  # no ground truth
    with pytest.raises(CoverageError, match="no ground-truth"):
        association_pr([tiny.gt], [bare])
    with pytest.raises(ConfigError, match="expected Association"):
        association_pr([{"0": 0}], [tiny])


# ---------------------------------------------------------------------------
# reachability precision-recall


def test_reachability_identical_graph_is_all_tp(grid42):
    rep = reachability_pr([grid42.gt], [grid42])
    np.testing.assert_array_equal(rep.precision, 1.0)
    np.testing.assert_array_equal(rep.recall, 1.0)
    # verdicts repeat across the threshold axis
    assert all(np.array_equal(rep.counts[0], rep.counts[i]) for i in range(len(rep.thresholds)))


def shifted_hd(hd: HdGraph, dx: float) -> HdGraph:
    return HdGraph(
        centerlines=tuple(
            make_centerline(
                c.id,
                (c.vector.p1.x + dx, c.vector.p1.y),
                (c.vector.p2.x + dx, c.vector.p2.y),
            )
            for c in hd.centerlines
        ),
        edges=hd.edges,
        boundaries=hd.boundaries,
    )


def test_reachability_shifted_graph_counts_fp(tiny):
    # 2 m shift: endpoints still match under a 3 m tau, but the chamfer
    # distance equals the shift and exceeds the 1 m tolerance
    pred = Prediction(assoc=tiny.gt, hd=shifted_hd(tiny.hd, 2.0))
    cfg = MetricConfig(point_match_tau=3.0, chamfer_tau=1.0)
    rep = reachability_pr([pred], [tiny], cfg)
    assert int(rep.counts[0, :, 1].sum()) == 2  # both paths FP
    np.testing.assert_array_equal(rep.precision, 0.0)
    cfg_loose = MetricConfig(point_match_tau=3.0, chamfer_tau=2.5)
    rep2 = reachability_pr([pred], [tiny], cfg_loose)
    np.testing.assert_array_equal(rep2.precision, 1.0)


def test_reachability_far_shift_is_missed_entirely(tiny):
    # beyond point_match_tau no endpoints pair up: FN, never FP
    pred = Prediction(assoc=tiny.gt, hd=shifted_hd(tiny.hd, 10.0))
    rep = reachability_pr([pred], [tiny])
    assert int(rep.counts[0, :, 2].sum()) == 2
    assert int(rep.counts[0, :, 1].sum()) == 0


def test_reachability_verdict_follows_chamfer_oracle(tiny):
    # bow the middle centerline upward; endpoints stay fixed
    bowed = HdGraph(
        centerlines=(
            tiny.hd.by_id[0],
            make_centerline(1, (3.0, 1.7), (6.0, 1.7)),
            tiny.hd.by_id[2],
            tiny.hd.by_id[3],
            tiny.hd.by_id[4],
            tiny.hd.by_id[5],
        ),
        edges=tiny.hd.edges,
    )
    pred = Prediction(assoc=tiny.gt, hd=bowed)

    def path_pts(hd, path):
        pts = []
        for cid in path:
            v = hd.by_id[cid].vector
            pts.extend([(v.p1.x, v.p1.y), (v.p2.x, v.p2.y)])
        return pts

    d = chamfer_brute(path_pts(bowed, (0, 1, 2)), path_pts(tiny.hd, (0, 1, 2)))
    for tau, want_tp in ((d + 0.05, 2), (d - 0.05, 1)):
        rep = reachability_pr([pred], [tiny], MetricConfig(chamfer_tau=tau))
        assert int(rep.counts[0, :, 0].sum()) == want_tp


# ---------------------------------------------------------------------------
# reports


def test_report_roundtrip_through_json(grid42):
    rep = association_pr([knn_associate(grid42)], [grid42])
    doc = rep.to_json()
    assert doc["buckets"][-1][1] is None  # inf serializes as null
    back = MetricReport.from_json(doc)
    assert back.thresholds == rep.thresholds
    assert back.buckets == rep.buckets
    np.testing.assert_array_equal(back.counts, rep.counts)
    np.testing.assert_array_equal(back.precision, rep.precision)
    assert doc["ap_50_95"] == rep.ap


def test_report_counts_validation():
    with pytest.raises(ConfigError, match="counts shape"):
        MetricReport(thresholds=(0.5,), buckets=((0.0, math.inf),), counts=np.zeros((2, 1, 3)))
    with pytest.raises(ConfigError, match="non-negative"):
        MetricReport(
            thresholds=(0.5,), buckets=((0.0, math.inf),), counts=np.full((1, 1, 3), -1)
        )


def test_report_table_layout(tiny):
    rep = association_pr([tiny.gt], [tiny])
    text = report_table({"knn": rep, "a-much-longer-name": rep})
    lines = text.splitlines()
    assert len(lines) == 3
    assert lines[0].startswith("Method")
    for col in ("A-F1^50", "A-P^50:95", "A-F1^50:95"):
        assert col in lines[0]
    assert lines[1].startswith("knn")
    assert "100.0" in lines[1]
    # all rows align to the same width
    assert len({len(l) for l in lines}) == 1


def test_report_table_marks_missing_thresholds(tiny):
    cfg = MetricConfig(thresholds=(0.6, 0.8))
    rep = association_pr([tiny.gt], [tiny], cfg)
    text = report_table({"x": rep})
    assert "-" in text.splitlines()[1]


def test_default_thresholds_are_50_to_95():
    assert DEFAULT_THRESHOLDS == (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95)
