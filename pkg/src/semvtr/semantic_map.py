"""Teach-phase semantic map: landmarks from detections + feature points, keyframes, JSON I/O."""
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator

from .errors import FrameMismatch, SchemaError
from .geometry import Pose

SCHEMA_VERSION = 1

INSERTED = "inserted"
MERGED = "merged"
APPENDED = "appended"
SKIPPED = "skipped"


@dataclass(frozen=True)
class Landmark:
    label: str
    instance: int
    position: tuple
    unique: bool = True


@dataclass(frozen=True)
class Detection:
    label: str
    bbox: tuple  # (u_min, v_min, u_max, v_max)
    frame: int = 0

    def __post_init__(self):
        u0, v0, u1, v1 = self.bbox
        if not (u0 < u1 and v0 < v1):
            raise ValueError(f"degenerate bbox {self.bbox}")

    @property
    def upper_middle(self):
        return (0.5 * (self.bbox[0] + self.bbox[2]), self.bbox[1])


@dataclass(frozen=True)
class FeaturePoint:
    pixel: tuple
    position: tuple


@dataclass
class SemanticMap:
    map_id: str
    landmarks: list = field(default_factory=list)
    keyframes: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def labels(self):
        return [lm.label for lm in self.landmarks]

    def positions(self):
        return np.array([lm.position for lm in self.landmarks], dtype=float).reshape(-1, 3)


def estimate_object_position(det, features, pixel_radius=20.0, min_features=3):
    """Mean 3D position of features near the bbox upper-middle point, or None."""
    cu, cv = det.upper_middle
    r2 = pixel_radius * pixel_radius
    chosen = [f.position for f in features
              if (f.pixel[0] - cu) ** 2 + (f.pixel[1] - cv) ** 2 <= r2]
    if not chosen or len(chosen) < min_features:
        return None
    n = len(chosen)
    return tuple(sum(float(p[k]) for p in chosen) / n for k in range(3))


def reject_partial(det, image_w, image_h, border_margin=10.0):
    u0, v0, u1, v1 = det.bbox
    return (u0 < border_margin or v0 < border_margin
            or image_w - u1 < border_margin or image_h - v1 < border_margin)


def _refresh_uniqueness(smap, label):
    same = [i for i, lm in enumerate(smap.landmarks) if lm.label == label]
    flag = len(same) == 1
    for i in same:
        if smap.landmarks[i].unique != flag:
            smap.landmarks[i] = replace(smap.landmarks[i], unique=flag)


def insert_landmark(smap, label, position, dedup_threshold=0.5):
    """Add a landmark unless a same-label one already sits within ``dedup_threshold``.

    Near-duplicates leave the map untouched (first estimate is kept).
    """
    position = tuple(float(v) for v in position)
    same = [lm for lm in smap.landmarks if lm.label == label]
    for lm in same:
        if math.dist(lm.position, position) < dedup_threshold:
            return MERGED
    instance = max((lm.instance for lm in same), default=-1) + 1
    smap.landmarks.append(Landmark(label, instance, position, True))
    _refresh_uniqueness(smap, label)
    return INSERTED


def unique_landmarks(smap):
    return [lm for lm in smap.landmarks if lm.unique]


def record_keyframe(smap, pose, min_spacing=0.1):
    if pose.frame_id != smap.map_id:
        raise FrameMismatch(f"pose frame {pose.frame_id!r} != map {smap.map_id!r}")
    if smap.keyframes:
        last = smap.keyframes[-1]
        if math.dist(last.position, pose.position) < min_spacing:
            return SKIPPED
    smap.keyframes.append(pose)
    return APPENDED


# -- persistence -------------------------------------------------------------

def map_to_dict(smap):
    return {
        "schema_version": SCHEMA_VERSION,
        "map_id": smap.map_id,
        "meta": dict(smap.meta),
        "landmarks": [
            {"label": lm.label, "instance": lm.instance, "pos": list(lm.position), "unique": lm.unique}
            for lm in smap.landmarks
        ],
        "keyframes": [{"x": k.x, "y": k.y, "z": k.z, "heading": k.heading} for k in smap.keyframes],
    }


def _get(d, key, path, kind):
    if not isinstance(d, dict) or key not in d:
        raise SchemaError(path, "missing")
    value = d[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(path, "expected number")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaError(path, "expected integer")
        return value
    if not isinstance(value, kind):
        raise SchemaError(path, f"expected {kind.__name__}")
    return value


def _point(value, path):
    if (not isinstance(value, list) or len(value) != 3
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)):
        raise SchemaError(path, "expected [x, y, z]")
    return tuple(float(v) for v in value)


def map_from_dict(d):
    if not isinstance(d, dict):
        raise SchemaError("$", "expected object")
    version = _get(d, "schema_version", "schema_version", int)
    if version != SCHEMA_VERSION:
        raise SchemaError("schema_version", f"unsupported version {version}")
    map_id = _get(d, "map_id", "map_id", str)
    meta = _get(d, "meta", "meta", dict)
    for k, v in meta.items():
        if not isinstance(v, str):
            raise SchemaError(f"meta.{k}", "expected string")
    landmarks = []
    for i, item in enumerate(_get(d, "landmarks", "landmarks", list)):
        p = f"landmarks[{i}]"
        landmarks.append(Landmark(
            label=_get(item, "label", f"{p}.label", str),
            instance=_get(item, "instance", f"{p}.instance", int),
            position=_point(_get(item, "pos", f"{p}.pos", list), f"{p}.pos"),
            unique=_get(item, "unique", f"{p}.unique", bool),
        ))
    keyframes = []
    for i, item in enumerate(_get(d, "keyframes", "keyframes", list)):
        p = f"keyframes[{i}]"
        keyframes.append(Pose(*(_get(item, k, f"{p}.{k}", float) for k in ("x", "y", "z", "heading")),
                              frame_id=map_id))
    return SemanticMap(map_id, landmarks, keyframes, dict(meta))


def save_map(smap, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(map_to_dict(smap), fh, indent=1)
        fh.write("\n")


def load_map(path):
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"invalid JSON: {exc}") from exc
    return map_from_dict(data)


class SemanticMapBuilder(BaseEstimator):
    """Incrementally builds a SemanticMap from per-frame observations.

    Parameters mirror the mapping heuristics: features within ``pixel_radius``
    of a box's upper-middle point are averaged (at least ``min_features``),
    boxes touching the image border are dropped, and same-label estimates
    closer than ``dedup_threshold`` are treated as re-sightings.

    Attributes
    ----------
    map_ : SemanticMap
        The map built so far.
    """

    def __init__(self, map_id="map", pixel_radius=20.0, min_features=3, border_margin=10.0,
                 dedup_threshold=0.5, keyframe_spacing=0.1, image_w=640, image_h=480):
        self.map_id = map_id
        self.pixel_radius = pixel_radius
        self.min_features = min_features
        self.border_margin = border_margin
        self.dedup_threshold = dedup_threshold
        self.keyframe_spacing = keyframe_spacing
        self.image_w = image_w
        self.image_h = image_h

    def _ensure_map(self):
        if not hasattr(self, "map_"):
            self.map_ = SemanticMap(self.map_id)
        return self.map_

    def partial_fit(self, detections, features, pose=None):
        smap = self._ensure_map()
        for det in detections:
            if reject_partial(det, self.image_w, self.image_h, self.border_margin):
                continue
            pos = estimate_object_position(det, features, self.pixel_radius, self.min_features)
            if pos is not None:
                insert_landmark(smap, det.label, pos, self.dedup_threshold)
        if pose is not None:
            record_keyframe(smap, pose, self.keyframe_spacing)
        return self

    def fit(self, observations):
        """Build from scratch over an iterable of (detections, features, pose) triples."""
        self.map_ = SemanticMap(self.map_id)
        for detections, features, pose in observations:
            self.partial_fit(detections, features, pose)
        return self

    def n_unique(self):
        return len(unique_landmarks(self._ensure_map()))
