import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_force_best_pair, generate_repeat, generating_pose
from semvtr.errors import InsufficientLandmarks, NoValidPair
from semvtr.geometry import PlanarTransform, Pose, wrap_angle
from semvtr.relocalizer import (PairRelocalizer, candidate_error, common_unique_landmarks,
                                compose_relocalization, find_best_pair, make_candidate,
                                relocalize_pose, top_count, RelocalizationResult)
from semvtr.semantic_map import SemanticMap, insert_landmark

DEG = math.pi / 180
LABELS = [f"obj{k:02d}" for k in range(12)]


def build_map(map_id, items):
    m = SemanticMap(map_id)
    for label, pos in items:
        insert_landmark(m, label, pos, dedup_threshold=0.5)
    return m


def random_teach(rng, n):
    return {LABELS[k]: (rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(0, 2)) for k in range(n)}


def assert_recovered(res, s, dtheta, dx, dy, tol=1e-9):
    assert res.scale == pytest.approx(s, abs=tol)
    assert abs(wrap_angle(res.transform.alpha - dtheta)) <= tol
    assert res.transform.dx == pytest.approx(dx, abs=tol)
    assert res.transform.dy == pytest.approx(dy, abs=tol)


def test_common_unique_landmarks():
    teach = build_map("t", [("clock", (0, 0, 1)), ("monitor", (2, 0, 1)),
                            ("chair", (1, 1, 0)), ("chair", (4, 4, 0))])
    repeat = build_map("r", [("clock", (0, 0, 1)), ("chair", (1, 1, 0)), ("monitor", (2, 0, 1))])
    assert [c[0] for c in common_unique_landmarks(teach, repeat)] == ["clock", "monitor"]
    assert common_unique_landmarks({"a": (0, 0, 0)}, {"b": (0, 0, 0)}) == []
    five = {LABELS[k]: (k, k * k, 0) for k in range(5)}
    assert len(common_unique_landmarks(five, five)) == 5


def test_top_count():
    assert [top_count(n) for n in (3, 4, 5, 6, 7, 9, 10, 12)] == [3, 3, 3, 3, 4, 5, 5, 6]


def test_candidate_error_examples():
    teach = {"A": (0, 0, 0), "B": (0, 2, 0), "C": (1, 1, 0)}
    repeat = {"A": (0, 0, 0), "B": (0, 2, 0), "C": (1.1, 1, 0)}
    common = common_unique_landmarks(teach, repeat)
    pair = make_candidate(common, 0, 1)
    gamma, res = candidate_error(pair, common, 3)
    # both frames are the identity and the scale is 1: residual is (1 - 1.1)^2
    assert res["A"] == 0 and res["B"] == 0
    assert res["C"] == pytest.approx((1 - 1.1) ** 2, abs=1e-15)
    assert gamma == pytest.approx(0.01, abs=1e-15)
    gamma2, _ = candidate_error(pair, common, 2)
    assert gamma2 == 0.0
    same = common_unique_landmarks(teach, teach)
    g, res = candidate_error(make_candidate(same, 0, 2), same, 3)
    assert g == 0.0 and all(v == 0.0 for v in res.values())


def test_compose_relocalization_examples():
    teach = {"a": (0, 0, 0), "b": (0, 2, 0)}
    repeat = {"a": (1, 0, 0), "b": (3, 0, 0)}
    common = [(k, teach[k], repeat[k]) for k in ("a", "b")]
    pair = make_candidate(common, 0, 1)
    t = compose_relocalization(pair)
    assert t.alpha == pytest.approx(90 * DEG)
    res = RelocalizationResult(("a", "b"), pair.scale, t, 0.0)
    for label in ("a", "b"):
        p = relocalize_pose(res, Pose(*repeat[label], frame_id="repeat"))
        assert p.position == pytest.approx(teach[label], abs=1e-12)
    ident = compose_relocalization(make_candidate([(k, teach[k], teach[k]) for k in "ab"], 0, 1))
    assert (ident.alpha, ident.dx, ident.dy) == pytest.approx((0, 0, 0), abs=1e-15)
    scaled = {k: tuple(3.7 * c for c in v) for k, v in repeat.items()}
    t2 = compose_relocalization(make_candidate([(k, teach[k], scaled[k]) for k in "ab"], 0, 1))
    assert t2.alpha == pytest.approx(t.alpha, abs=1e-15)


def test_find_best_pair_identity():
    rng = np.random.default_rng(0)
    teach = random_teach(rng, 6)
    res = find_best_pair(teach, teach)
    assert res.gamma == 0.0 and res.scale == 1.0
    assert (res.transform.alpha, res.transform.dx, res.transform.dy) == pytest.approx((0, 0, 0), abs=1e-12)
    assert res.best_pair == (LABELS[0], LABELS[1])  # every pair ties at 0


def test_find_best_pair_ground_truth():
    rng = np.random.default_rng(1)
    teach = random_teach(rng, 6)
    gt = (2.0, 90 * DEG, 1.0, 0.0)
    res = find_best_pair(teach, generate_repeat(teach, *gt))
    assert_recovered(res, *gt)
    assert res.gamma < 1e-18


def test_find_best_pair_with_relocated_objects():
    rng = np.random.default_rng(2)
    teach = random_teach(rng, 10)
    gt = (0.8, -2.0, 3.0, -1.5)
    repeat = generate_repeat(teach, *gt)
    moved = rng.choice(10, 4, replace=False)
    for k in moved:
        x, y, z = repeat[LABELS[k]]
        ang = rng.uniform(0, 2 * math.pi)
        r = rng.uniform(1.0, 3.0)
        repeat[LABELS[k]] = (x + r * math.cos(ang), y + r * math.sin(ang), z)
    res = find_best_pair(teach, repeat)
    assert_recovered(res, *gt)
    top5 = sorted(res.residuals, key=res.residuals.get)[:5]
    assert not {LABELS[k] for k in moved} & set(top5)


def test_find_best_pair_errors():
    with pytest.raises(InsufficientLandmarks):
        find_best_pair({"a": (0, 0, 0), "b": (1, 0, 0)}, {"a": (0, 0, 0), "b": (1, 0, 0)})
    stacked = {"a": (0, 0, 0), "b": (0, 0, 1), "c": (0, 0, 2)}
    with pytest.raises(NoValidPair):
        find_best_pair(stacked, stacked)


def test_relocalize_pose_examples():
    res = RelocalizationResult(("a", "b"), 2.0, PlanarTransform.identity(), 0.0)
    p = relocalize_pose(res, Pose(1, 0, 0, 30 * DEG, "repeat"))
    assert (p.x, p.y, p.z, p.heading, p.frame_id) == pytest.approx((2, 0, 0, 30 * DEG, "teach"))
    res = RelocalizationResult(("a", "b"), 1.0, PlanarTransform(90 * DEG, 0, 0), 0.0)
    p = relocalize_pose(res, Pose(1, 0, 0, 0, "repeat"))
    assert (p.x, p.y, p.z) == pytest.approx((0, 1, 0), abs=1e-15)
    assert p.heading == pytest.approx(90 * DEG)


def test_relocalize_pose_ground_truth():
    rng = np.random.default_rng(3)
    teach = random_teach(rng, 7)
    gt = (1.7, 2.5, -4.0, 2.0)
    res = find_best_pair(teach, generate_repeat(teach, *gt))
    pose_r = (0.3, -1.2, 0.1, 1.0)
    expect = generating_pose(*gt, pose_r)
    p = relocalize_pose(res, Pose(*pose_r, frame_id="repeat"))
    assert (p.x, p.y, p.z) == pytest.approx(expect[:3], abs=1e-9)
    assert abs(wrap_angle(p.heading - expect[3])) < 1e-9


def test_estimator_api():
    rng = np.random.default_rng(4)
    teach = random_teach(rng, 5)
    gt = (1.3, 0.4, 1.0, 2.0)
    est = PairRelocalizer()
    assert est.get_params() == {"h": None}
    est.fit(teach, generate_repeat(teach, *gt))
    assert est.scale_ == pytest.approx(gt[0], abs=1e-9)
    poses = np.array([[0.0, 0.0, 0.0, 0.0], [1.0, -2.0, 0.5, 3.0]])
    out = est.transform(poses)
    for row, pr in zip(out, poses):
        expect = generating_pose(*gt, pr)
        assert row[:3] == pytest.approx(expect[:3], abs=1e-9)
        assert abs(wrap_angle(row[3] - expect[3])) < 1e-9
    with pytest.raises(ValueError):
        est.transform(np.zeros((2, 3)))
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        PairRelocalizer().transform(poses)


gt_params = st.tuples(st.floats(0.5, 2.0), st.floats(-math.pi, math.pi),
                      st.floats(-5, 5), st.floats(-5, 5))


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 8), st.integers(0, 2**32 - 1), gt_params)
def test_exact_recovery_property(n, seed, gt):
    teach = random_teach(np.random.default_rng(seed), n)
    res = find_best_pair(teach, generate_repeat(teach, *gt))
    assert_recovered(res, *gt)
    assert res.gamma < 1e-18
    i, j = res.best_pair
    assert res.residuals[i] <= 1e-12 and res.residuals[j] <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 8), st.integers(0, 2**32 - 1), st.floats(0.1, 10.0))
def test_matches_brute_force_and_candidate_path(n, seed, noise):
    rng = np.random.default_rng(seed)
    teach = random_teach(rng, n)
    repeat = {k: tuple(c + rng.normal(0, noise) for c in v) for k, v in teach.items()}
    res = find_best_pair(teach, repeat)
    pair, gamma, residuals = brute_force_best_pair(teach, repeat)
    assert res.best_pair == pair
    assert res.gamma == gamma
    assert res.residuals == residuals


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 8), st.integers(0, 2**32 - 1), gt_params, st.floats(0.2, 5.0))
def test_rescale_invariance(n, seed, gt, c):
    teach = random_teach(np.random.default_rng(seed), n)
    repeat = generate_repeat(teach, *gt)
    scaled = {k: tuple(c * v for v in p) for k, p in repeat.items()}
    a = find_best_pair(teach, repeat)
    b = find_best_pair(teach, scaled)
    assert b.scale == pytest.approx(a.scale / c, rel=1e-9)
    pose = (0.5, 0.25, 0.0, 0.3)
    pa = relocalize_pose(a, Pose(*pose, frame_id="repeat"))
    pb = relocalize_pose(b, Pose(c * pose[0], c * pose[1], c * pose[2], pose[3], "repeat"))
    assert pb.position == pytest.approx(pa.position, abs=1e-9)
    assert abs(wrap_angle(pb.heading - pa.heading)) < 1e-9
