"""Teach/repeat map relocalization from the best matching pair of unique objects.

For every pair of labels shared (and unique) in both maps, each map is
expressed in a frame anchored on the pair, the repeat side is scaled by the
ratio of pair distances, and the pair is scored by the sum of the ``h``
smallest squared per-object residuals.  The winning pair yields the scale and
the planar transform taking repeat-map coordinates into the teach map.
"""
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import DegeneratePair, FrameMismatch, InsufficientLandmarks, NoValidPair
from .geometry import (MIN_PAIR_SEPARATION, PairFrame, PlanarTransform, Pose, apply_point,
                       build_pair_frame, compose, invert, map_to_pair_transform,
                       pair_frame_coords)
from .semantic_map import SemanticMap, unique_landmarks

MIN_COMMON = 3


@dataclass(frozen=True)
class CandidatePair:
    label_i: str
    label_j: str
    teach_frame: PairFrame
    repeat_frame: PairFrame
    scale: float


@dataclass
class RelocalizationResult:
    best_pair: tuple
    scale: float
    transform: PlanarTransform
    gamma: float
    residuals: dict = field(default_factory=dict)
    teach_id: str = "teach"
    repeat_id: str = "repeat"

    def to_dict(self):
        return {
            "best_pair": list(self.best_pair),
            "scale": self.scale,
            "dtheta": self.transform.alpha,
            "dx": self.transform.dx,
            "dy": self.transform.dy,
            "gamma": self.gamma,
            "residuals": dict(self.residuals),
        }


def top_count(n):
    """Number of best-fitting objects that enter the pair score."""
    return max(MIN_COMMON, math.ceil(n / 2))


def _as_label_dict(m):
    if isinstance(m, SemanticMap):
        return {lm.label: lm.position for lm in unique_landmarks(m)}
    return {str(k): tuple(float(c) for c in v) for k, v in dict(m).items()}


def common_unique_landmarks(teach, repeat):
    """(label, teach_pos, repeat_pos) for labels unique in both maps, label-sorted."""
    t = _as_label_dict(teach)
    r = _as_label_dict(repeat)
    return [(label, t[label], r[label]) for label in sorted(t.keys() & r.keys())]


def _dist3(a, b):
    dx, dy, dz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def make_candidate(common, i, j):
    label_i, t_i, r_i = common[i]
    label_j, t_j, r_j = common[j]
    if label_j < label_i:
        raise ValueError("pair labels must be lexicographically ordered")
    d_r = _dist3(r_i, r_j)
    if d_r == 0.0:
        raise DegeneratePair(f"({label_i}, {label_j}) coincide in the repeat map")
    return CandidatePair(label_i, label_j, build_pair_frame(t_i, t_j), build_pair_frame(r_i, r_j),
                         _dist3(t_i, t_j) / d_r)


def candidate_error(pair, common, h):
    """(gamma, residuals) of a candidate pair; residuals are keyed by label."""
    if len(common) < MIN_COMMON:
        raise InsufficientLandmarks(f"need at least {MIN_COMMON} common objects, got {len(common)}")
    if not 0 < h <= len(common):
        raise ValueError(f"h={h} outside 1..{len(common)}")
    teach = np.array([c[1] for c in common], dtype=float)
    repeat = np.array([c[2] for c in common], dtype=float)
    a = pair_frame_coords(pair.teach_frame, teach)
    b = pair.scale * pair_frame_coords(pair.repeat_frame, repeat)
    d = a - b
    res = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]
    gamma = math.fsum(np.sort(res)[:h])
    return gamma, {c[0]: float(r) for c, r in zip(common, res)}


def _pair_scores(teach, repeat, h):
    """Vectorized gamma for every index pair (i < j), in lexicographic order.

    Degenerate pairs score +inf.  Arithmetic matches candidate_error
    operation-for-operation so both paths give bit-identical gammas.
    """
    n = len(teach)
    ii, jj = np.array(list(combinations(range(n), 2))).T

    def frames(pts):
        ox, oy = pts[ii, 0], pts[ii, 1]
        ux = pts[jj, 0] - ox
        uy = pts[jj, 1] - oy
        norm = np.sqrt(ux * ux + uy * uy)
        ok = norm >= MIN_PAIR_SEPARATION
        safe = np.where(ok, norm, 1.0)
        ux, uy = ux / safe, uy / safe
        rx = pts[None, :, 0] - ox[:, None]
        ry = pts[None, :, 1] - oy[:, None]
        local = np.empty((len(ii), n, 3))
        local[..., 0] = rx * uy[:, None] + ry * (-ux)[:, None]
        local[..., 1] = rx * ux[:, None] + ry * uy[:, None]
        local[..., 2] = pts[None, :, 2]
        return local, ok

    def dist3(pts):
        d = pts[jj] - pts[ii]
        return np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2])

    lt, ok_t = frames(teach)
    lr, ok_r = frames(repeat)
    d_r = dist3(repeat)
    ok = ok_t & ok_r & (d_r > 0.0)
    scale = dist3(teach) / np.where(ok, d_r, 1.0)
    diff = lt - scale[:, None, None] * lr
    res = diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1] + diff[..., 2] * diff[..., 2]
    top = np.sort(res, axis=1)[:, :h]
    gamma = np.array([math.fsum(row) if good else math.inf for row, good in zip(top, ok)])
    return ii, jj, gamma


def compose_relocalization(pair):
    """Planar transform T* such that teach = scale * T*(repeat).

    The teach-side pair transform is expressed in repeat units (its
    translation divided by the scale) so that scaling after the rigid motion
    lands exactly on teach coordinates.
    """
    a_t = map_to_pair_transform(pair.teach_frame)
    a_r = map_to_pair_transform(pair.repeat_frame)
    a_t_repeat_units = PlanarTransform(a_t.alpha, a_t.dx / pair.scale, a_t.dy / pair.scale)
    return compose(invert(a_t_repeat_units), a_r)


def find_best_pair(teach, repeat, h=None):
    common = common_unique_landmarks(teach, repeat)
    n = len(common)
    if n < MIN_COMMON:
        raise InsufficientLandmarks(f"need at least {MIN_COMMON} common unique objects, got {n}")
    h = top_count(n) if h is None else h
    t = np.array([c[1] for c in common], dtype=float)
    r = np.array([c[2] for c in common], dtype=float)
    ii, jj, gamma = _pair_scores(t, r, h)
    k = int(np.argmin(gamma))  # first minimum == lexicographically smallest pair
    if not math.isfinite(gamma[k]):
        raise NoValidPair("every candidate pair is degenerate")
    pair = make_candidate(common, int(ii[k]), int(jj[k]))
    g, residuals = candidate_error(pair, common, h)
    return RelocalizationResult(
        best_pair=(pair.label_i, pair.label_j),
        scale=pair.scale,
        transform=compose_relocalization(pair),
        gamma=g,
        residuals=residuals,
        teach_id=getattr(teach, "map_id", "teach"),
        repeat_id=getattr(repeat, "map_id", "repeat"),
    )


def relocalize_pose(result, p_r):
    if p_r.frame_id != result.repeat_id:
        raise FrameMismatch(f"pose frame {p_r.frame_id!r} != repeat map {result.repeat_id!r}")
    x, y, z = apply_point(result.transform, p_r.position)
    s = result.scale
    return Pose(s * x, s * y, s * z, p_r.heading + result.transform.alpha, result.teach_id)


class PairRelocalizer(BaseEstimator):
    """Estimator wrapper: ``fit(teach, repeat)`` then ``transform(poses)``.

    Maps may be SemanticMap instances or ``{label: (x, y, z)}`` dicts of
    unique objects.  ``h=None`` uses max(3, ceil(N / 2)).

    Attributes
    ----------
    result_ : RelocalizationResult
    best_pair_, scale_, transform_, gamma_, residuals_ : views into ``result_``
    """

    def __init__(self, h=None):
        self.h = h

    def fit(self, teach, repeat):
        self.result_ = find_best_pair(teach, repeat, h=self.h)
        self.best_pair_ = self.result_.best_pair
        self.scale_ = self.result_.scale
        self.transform_ = self.result_.transform
        self.gamma_ = self.result_.gamma
        self.residuals_ = self.result_.residuals
        return self

    def transform(self, X):
        """Map repeat-frame poses, rows of (x, y, z, heading), into the teach frame."""
        check_is_fitted(self, "result_")
        X = check_array(X, ensure_2d=True, dtype=float)
        if X.shape[1] != 4:
            raise ValueError(f"expected (n, 4) poses, got {X.shape}")
        out = np.empty_like(X)
        rid = self.result_.repeat_id
        for k, row in enumerate(X):
            p = relocalize_pose(self.result_, Pose(*row, frame_id=rid))
            out[k] = (p.x, p.y, p.z, p.heading)
        return out

    def relocalize(self, pose):
        check_is_fitted(self, "result_")
        return relocalize_pose(self.result_, pose)
