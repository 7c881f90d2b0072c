"""Deterministic synthetic stand-in for the camera + SLAM + detector stack.

A run's map frame has its origin at the run's start pose (x along the start
heading, z up) and is scaled by a per-run factor drawn log-uniformly from
``NoiseSpec.slam_scale_range``, mimicking monocular scale ambiguity.

Objects are stored by their reference point: the top-centre of a bounding
sphere of the given radius.  That point projects onto the upper-middle of
the detection box, which is where the mapper looks for features.
"""
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import BootstrapFailed, SchemaError, UnknownLabel
from .geometry import Pose, wrap_angle
from .repeater import ControlCommand
from .semantic_map import Detection, FeaturePoint, _get, _point


@dataclass(frozen=True)
class WorldObject:
    label: str
    pos: tuple
    radius: float = 0.2

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"object {self.label!r}: radius must be > 0")


@dataclass(frozen=True)
class NoiseSpec:
    feature_sigma: float = 0.02
    slam_scale_range: tuple = (0.5, 2.0)
    odom_sigma: float = 0.0
    features_per_object: int = 8

    def __post_init__(self):
        lo, hi = self.slam_scale_range
        if not 0 < lo <= hi:
            raise ValueError(f"bad slam_scale_range {self.slam_scale_range}")
        if self.feature_sigma < 0 or self.odom_sigma < 0:
            raise ValueError("noise sigmas must be >= 0")


@dataclass(frozen=True)
class CameraSpec:
    horizontal_fov: float = math.pi / 2
    max_range: float = 6.0
    image_w: int = 640
    image_h: int = 480
    focal: float = 320.0
    height: float = 0.3

    def __post_init__(self):
        if not 0 < self.horizontal_fov < math.pi:
            raise ValueError("horizontal_fov must be in (0, pi)")
        if self.max_range <= 0:
            raise ValueError("max_range must be > 0")


@dataclass(frozen=True)
class WorldSpec:
    objects: tuple
    teach_path: tuple
    rng_seed: int = 0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    camera: CameraSpec = field(default_factory=CameraSpec)

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "teach_path", tuple(tuple(map(float, w)) for w in self.teach_path))
        if len(self.teach_path) < 2:
            raise ValueError("teach_path needs at least two waypoints")

    def labels(self):
        return [o.label for o in self.objects]

    def default_start(self):
        (x0, y0), (x1, y1) = self.teach_path[:2]
        return Pose(x0, y0, 0.0, math.atan2(y1 - y0, x1 - x0))


# -- world files -------------------------------------------------------------

def world_to_dict(world):
    return {
        "objects": [{"label": o.label, "pos": list(o.pos), "radius": o.radius} for o in world.objects],
        "teach_path": [list(w) for w in world.teach_path],
        "noise": {**asdict(world.noise), "slam_scale_range": list(world.noise.slam_scale_range)},
        "camera": asdict(world.camera),
        "seed": world.rng_seed,
    }


def _section(d, name, cls):
    raw = d.get(name, {})
    if not isinstance(raw, dict):
        raise SchemaError(name, "expected object")
    known = {f for f in cls.__dataclass_fields__}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise SchemaError(f"{name}.{key}", "unknown field")
        if key == "slam_scale_range":
            if not isinstance(value, list) or len(value) != 2:
                raise SchemaError(f"{name}.{key}", "expected [min, max]")
            value = tuple(float(v) for v in value)
        elif isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"{name}.{key}", "expected number")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise SchemaError(name, str(exc)) from exc


def world_from_dict(d):
    if not isinstance(d, dict):
        raise SchemaError("$", "expected object")
    objects = []
    for i, item in enumerate(_get(d, "objects", "objects", list)):
        p = f"objects[{i}]"
        try:
            objects.append(WorldObject(
                _get(item, "label", f"{p}.label", str),
                _point(_get(item, "pos", f"{p}.pos", list), f"{p}.pos"),
                _get(item, "radius", f"{p}.radius", float) if isinstance(item, dict) and "radius" in item else 0.2,
            ))
        except ValueError as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"{p}.radius", str(exc)) from exc
    path = _get(d, "teach_path", "teach_path", list)
    for i, w in enumerate(path):
        if (not isinstance(w, list) or len(w) != 2
                or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in w)):
            raise SchemaError(f"teach_path[{i}]", "expected [x, y]")
    if len(path) < 2:
        raise SchemaError("teach_path", "needs at least two waypoints")
    seed = _get(d, "seed", "seed", int) if "seed" in d else 0
    return WorldSpec(objects, path, seed, _section(d, "noise", NoiseSpec), _section(d, "camera", CameraSpec))


def load_world(path):
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"invalid JSON: {exc}") from exc
    return world_from_dict(data)


def save_world(world, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(world_to_dict(world), fh, indent=1)
        fh.write("\n")


def perturb_objects(world, moves):
    """Copy of ``world`` with the listed objects moved.

    ``moves`` is a sequence of (label, new_pos).  A label shared by several
    objects moves the first one not already moved by this call.
    """
    objects = list(world.objects)
    moved = set()
    for label, new_pos in moves:
        idx = [k for k, o in enumerate(objects) if o.label == label]
        if not idx:
            raise UnknownLabel(f"no object labelled {label!r}")
        free = [k for k in idx if k not in moved] or idx
        k = free[0]
        moved.add(k)
        objects[k] = replace(objects[k], pos=tuple(float(v) for v in new_pos))
    return replace(world, objects=tuple(objects))


# -- runs --------------------------------------------------------------------

class SimRun:
    """One SLAM session: ground-truth robot state plus the run's scaled map frame."""

    def __init__(self, world, start, run_seed=0, scale=None, map_id=None):
        self.world = world
        self.start = Pose(start.x, start.y, start.z, start.heading, "world")
        seeds = list(run_seed) if isinstance(run_seed, (tuple, list)) else [run_seed]
        self.rng = np.random.default_rng([world.rng_seed, *seeds])
        lo, hi = world.noise.slam_scale_range
        drawn = float(np.exp(self.rng.uniform(math.log(lo), math.log(hi))))
        self.scale = drawn if scale is None else float(scale)
        self.map_id = map_id or "run-" + "-".join(map(str, seeds))
        self.pose = self.start
        self.t = 0.0
        self.frame = 0
        self._odom_err = np.zeros(2)
        self._cos0 = math.cos(self.start.heading)
        self._sin0 = math.sin(self.start.heading)

    # frame changes
    def to_map_points(self, pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, 3)
        rx = pts[:, 0] - self.start.x
        ry = pts[:, 1] - self.start.y
        out = np.empty_like(pts)
        out[:, 0] = self.scale * (self._cos0 * rx + self._sin0 * ry)
        out[:, 1] = self.scale * (-self._sin0 * rx + self._cos0 * ry)
        out[:, 2] = self.scale * (pts[:, 2] - self.start.z)
        return out

    def to_map_pose(self, pose):
        x, y, z = self.to_map_points([pose.position])[0]
        return Pose(x, y, z, pose.heading - self.start.heading, self.map_id)

    def to_world_pose(self, map_pose):
        x, y = map_pose.x / self.scale, map_pose.y / self.scale
        return Pose(self.start.x + self._cos0 * x - self._sin0 * y,
                    self.start.y + self._sin0 * x + self._cos0 * y,
                    self.start.z + map_pose.z / self.scale,
                    map_pose.heading + self.start.heading, "world")

    def map_pose(self):
        """SLAM-reported robot pose in this run's map frame (odometry drift included)."""
        p = self.to_map_pose(self.pose)
        if not self._odom_err.any():
            return p
        return Pose(p.x + self._odom_err[0], p.y + self._odom_err[1], p.z, p.heading, p.frame_id)

    # sensing
    def visible(self, pose=None):
        """Indices of objects inside the horizontal frustum and range."""
        pose = pose or self.pose
        cam = self.world.camera
        half = 0.5 * cam.horizontal_fov
        out = []
        for k, o in enumerate(self.world.objects):
            rx, ry = o.pos[0] - pose.x, o.pos[1] - pose.y
            d = math.hypot(rx, ry)
            # bearing is undefined for an object at the camera itself
            if d == 0.0 or d > cam.max_range:
                continue
            if abs(wrap_angle(math.atan2(ry, rx) - pose.heading)) < half:
                out.append(k)
        return out

    def project(self, pts, pose=None):
        """Pinhole projection of world points; returns (u, v, depth) arrays."""
        pose = pose or self.pose
        cam = self.world.camera
        pts = np.asarray(pts, dtype=float).reshape(-1, 3)
        c, s = math.cos(pose.heading), math.sin(pose.heading)
        rx, ry = pts[:, 0] - pose.x, pts[:, 1] - pose.y
        fwd = c * rx + s * ry
        left = -s * rx + c * ry
        up = pts[:, 2] - cam.height
        with np.errstate(divide="ignore", invalid="ignore"):
            u = 0.5 * cam.image_w - cam.focal * left / fwd
            v = 0.5 * cam.image_h - cam.focal * up / fwd
        return u, v, fwd

    def bbox(self, obj, pose=None):
        """Unclipped image box of the object's bounding sphere."""
        cam = self.world.camera
        centre = (obj.pos[0], obj.pos[1], obj.pos[2] - obj.radius)
        u, v, d = self.project([centre], pose)
        half = cam.focal * obj.radius / d[0]
        return (u[0] - half, v[0] - half, u[0] + half, v[0] + half)

    def observe(self, pose=None):
        pose = pose or self.pose
        cam = self.world.camera
        noise = self.world.noise
        w, h = cam.image_w, cam.image_h
        detections, features = [], []
        for k in self.visible(pose):
            obj = self.world.objects[k]
            u0, v0, u1, v1 = self.bbox(obj, pose)
            u0, u1 = min(max(u0, 0.0), w - 1.0), min(max(u1, 1.0), float(w))
            v0, v1 = min(max(v0, 0.0), h - 1.0), min(max(v1, 1.0), float(h))
            if u1 <= u0:
                u1 = u0 + 1.0
            if v1 <= v0:
                v1 = v0 + 1.0
            detections.append(Detection(obj.label, (u0, v0, u1, v1), self.frame))
            n = noise.features_per_object
            samples = np.asarray(obj.pos, dtype=float) + self.rng.normal(0.0, 1.0, (n, 3)) * noise.feature_sigma
            us, vs, ds = self.project(samples, pose)
            mapped = self.to_map_points(samples)
            for j in range(n):
                if ds[j] > 0 and 0 <= us[j] <= w and 0 <= vs[j] <= h:
                    features.append(FeaturePoint((float(us[j]), float(vs[j])), tuple(map(float, mapped[j]))))
        self.frame += 1
        return detections, features

    # motion
    def step(self, cmd, dt):
        if dt <= 0:
            raise ValueError("dt must be > 0")
        p = self.pose
        v, w = cmd.linear_velocity, cmd.angular_velocity
        self.pose = Pose(p.x + v * math.cos(p.heading) * dt,
                         p.y + v * math.sin(p.heading) * dt,
                         p.z, wrap_angle(p.heading + w * dt), "world")
        self.t += dt
        sigma = self.world.noise.odom_sigma
        if sigma > 0:
            self._odom_err += self.rng.normal(0.0, sigma, 2)
        return self.pose


def spawn_run(world, start, run_seed=0, scale=None, map_id=None):
    return SimRun(world, start, run_seed, scale, map_id)


def observe(run, pose=None):
    return run.observe(pose)


def robot_step(run, cmd, dt):
    return run.step(cmd, dt)


def default_bootstrap_pattern(omega=0.5):
    """One full turn in place."""
    return [(ControlCommand(0.0, omega), 2.0 * math.pi / omega)]


def bootstrap_motion(run, pattern, builder, dt=0.05, min_unique=3, stop_early=True):
    """Execute a scripted motion, feeding observations to ``builder``.

    Returns the list of (ground-truth pose, map pose) samples.  With
    ``stop_early`` the script is cut once ``min_unique`` unique objects are
    mapped.  Raises BootstrapFailed if that count is never reached.
    """
    samples = []

    def look():
        dets, feats = run.observe()
        mp = run.map_pose()
        builder.partial_fit(dets, feats, mp)
        samples.append((run.pose, mp))
        return builder.n_unique() >= min_unique

    ready = look()
    for cmd, duration in pattern:
        if ready and stop_early:
            break
        for _ in range(int(round(duration / dt))):
            run.step(cmd, dt)
            ready = look()
            if ready and stop_early:
                break
    if builder.n_unique() < min_unique:
        raise BootstrapFailed(f"only {builder.n_unique()} unique objects mapped (need {min_unique})")
    return samples
