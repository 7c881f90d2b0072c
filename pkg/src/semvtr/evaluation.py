"""Teach/repeat orchestration, trial metrics and batch statistics."""
import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .config import VTRConfig
from .errors import (BootstrapFailed, InsufficientLandmarks, NoValidPair, SchemaError,
                     StepBudgetExceeded)
from .geometry import Pose, wrap_angle
from .relocalizer import PairRelocalizer
from .repeater import (FORWARD, ControlLimits, RepeatPlan, RepeatTrace,
                       control_step, parse_direction, run_repeat)
from .semantic_map import SemanticMapBuilder, record_keyframe
from .simworld import bootstrap_motion, default_bootstrap_pattern, spawn_run

METRICS = ("start_distance", "end_distance", "start_angle_diff", "end_angle_diff")


def configure_world(world, cfg):
    """Apply config-file camera/noise overrides to a world."""
    try:
        camera = replace(world.camera, **cfg.camera) if cfg.camera else world.camera
        noise = world.noise
        if cfg.noise:
            over = dict(cfg.noise)
            if "slam_scale_range" in over:
                over["slam_scale_range"] = tuple(over["slam_scale_range"])
            noise = replace(noise, **over)
    except (TypeError, ValueError) as exc:
        raise SchemaError("config", str(exc)) from exc
    return replace(world, camera=camera, noise=noise)


def _builder(cfg, map_id, camera):
    m = cfg.mapping
    return SemanticMapBuilder(map_id, m.pixel_radius, m.min_features, m.border_margin,
                              m.dedup_threshold, m.keyframe_spacing, camera.image_w, camera.image_h)


def _limits(cfg):
    r = cfg.repeat
    return ControlLimits(r.v_max, r.omega_max, r.k_lin, r.k_ang)


def _plan(cfg, direction=FORWARD):
    r = cfg.repeat
    return RepeatPlan(direction, 0, r.goal_tolerance, r.lookahead, r.heading_deadband)


@dataclass
class TeachResult:
    map: object
    trajectory: list  # ground-truth poses at which observations were taken
    run: object


def teach_run(world, start=None, run_seed=0, cfg=None):
    """Drive the teach path waypoints, observing every step, and build the teach map."""
    cfg = cfg or VTRConfig()
    start = start or world.default_start()
    run = spawn_run(world, start, run_seed, map_id="teach")
    builder = _builder(cfg, "teach", world.camera)
    plan, limits = _plan(cfg), _limits(cfg)
    dt = cfg.repeat.dt
    trajectory = []

    def look():
        dets, feats = run.observe()
        builder.partial_fit(dets, feats, run.map_pose())
        trajectory.append(run.pose)

    look()
    steps = 0
    for wx, wy in world.teach_path:
        while True:
            cmd = control_step(run.pose, (wx, wy), plan, limits)
            if cmd.is_stop:
                break
            if steps >= cfg.repeat.step_budget:
                raise StepBudgetExceeded(RepeatTrace())
            run.step(cmd, dt)
            steps += 1
            look()
    smap = builder.map_
    record_keyframe(smap, run.map_pose(), 0.0)
    smap.meta.update({
        "kind": "teach",
        "world_seed": str(world.rng_seed),
        "run_seed": str(run_seed),
        "slam_scale": repr(run.scale),
        "origin_x": repr(run.start.x),
        "origin_y": repr(run.start.y),
        "origin_z": repr(run.start.z),
        "origin_heading": repr(run.start.heading),
    })
    return TeachResult(smap, trajectory, run)


def teach_keyframes_world(teach_map):
    """Teach keyframes in the simulator's ground-truth frame (evaluation only)."""
    meta = teach_map.meta
    try:
        lam = float(meta["slam_scale"])
        ox, oy, oz, oh = (float(meta[k]) for k in ("origin_x", "origin_y", "origin_z", "origin_heading"))
    except KeyError as exc:
        raise SchemaError(f"meta.{exc.args[0]}", "teach map lacks simulator ground-truth metadata") from exc
    c, s = math.cos(oh), math.sin(oh)
    out = []
    for k in teach_map.keyframes:
        x, y = k.x / lam, k.y / lam
        out.append(Pose(ox + c * x - s * y, oy + s * x + c * y, oz + k.z / lam, k.heading + oh, "world"))
    return out


def _angle_deg(a, b):
    return abs(math.degrees(wrap_angle(a - b)))


def _point_segment_distance(p, a, b):
    ax, ay = b[0] - a[0], b[1] - a[1]
    L2 = ax * ax + ay * ay
    t = 0.0 if L2 == 0 else max(0.0, min(1.0, ((p[0] - a[0]) * ax + (p[1] - a[1]) * ay) / L2))
    return math.hypot(p[0] - a[0] - t * ax, p[1] - a[1] - t * ay)


def cross_track_rms(path_xy, points):
    if not points:
        return math.nan
    if len(path_xy) == 1:
        d = [math.dist(p, path_xy[0]) for p in points]
    else:
        d = [min(_point_segment_distance(p, a, b) for a, b in zip(path_xy, path_xy[1:])) for p in points]
    return math.sqrt(sum(v * v for v in d) / len(d))


def compute_metrics(teach_map, trace, direction=FORWARD, keyframes_world=None):
    """Start/end distance and heading errors of a ground-truth trace.

    Start metrics are measured against the keyframe the traversal nominally
    begins at (first keyframe forward, last keyframe backward); end metrics
    against the terminal keyframe of the traversal.
    """
    if not trace.rows:
        raise ValueError("empty trace")
    kfs = keyframes_world if keyframes_world is not None else teach_keyframes_world(teach_map)
    direction = parse_direction(direction)
    origin, terminal = (kfs[0], kfs[-1]) if direction == FORWARD else (kfs[-1], kfs[0])
    _, x0, y0, h0, _, _ = trace.rows[0]
    _, x1, y1, h1, _, _ = trace.rows[-1]
    follow = [(r[1], r[2]) for r in trace.rows if r[4] == "follow"]
    return {
        "start_distance": math.hypot(x0 - origin.x, y0 - origin.y),
        "start_angle_diff": _angle_deg(h0, origin.heading),
        "end_distance": math.hypot(x1 - terminal.x, y1 - terminal.y),
        "end_angle_diff": _angle_deg(h1, terminal.heading),
        "cross_track_rms": cross_track_rms([(k.x, k.y) for k in kfs], follow),
    }


@dataclass
class TrialReport:
    trial_id: int
    direction: str
    start_distance: float
    end_distance: float
    start_angle_diff: float
    end_angle_diff: float
    completed: bool
    gamma: float
    chosen_pair: str
    scale: float = math.nan
    cross_track_rms: float = math.nan
    status: str = "ok"

    def to_dict(self):
        return asdict(self)


REPORT_FIELDS = [f.name for f in fields(TrialReport)]


def run_trial(world, teach_map, start, direction=FORWARD, run_seed=(0,), cfg=None, trial_id=0):
    """Bootstrap, relocalize and repeat from one ground-truth start pose.

    Returns (TrialReport, RepeatTrace).  Failures never raise: they are
    recorded in ``report.status`` with ``completed=False``.
    """
    cfg = cfg or VTRConfig()
    direction = parse_direction(direction)
    run = spawn_run(world, start, run_seed, map_id="repeat")
    trace = RepeatTrace()
    trace.add(run.t, run.pose, "bootstrap", -1)
    builder = _builder(cfg, "repeat", world.camera)
    b = cfg.bootstrap
    gamma, pair, scale, status = math.nan, "", math.nan, "ok"
    try:
        samples = bootstrap_motion(run, default_bootstrap_pattern(b.omega), builder, cfg.repeat.dt,
                                   b.min_unique, stop_early=not b.full_sweep)
        trace.rows = [(k * cfg.repeat.dt, gt.x, gt.y, gt.heading, "bootstrap", -1)
                      for k, (gt, _) in enumerate(samples)]
        reloc = PairRelocalizer().fit(teach_map, builder.map_)
        gamma, scale = reloc.gamma_, reloc.scale_
        pair = "|".join(reloc.best_pair_)
        run_repeat(teach_map, reloc.result_, run.map_pose(), direction, run, _plan(cfg, direction),
                   _limits(cfg), cfg.repeat.dt, cfg.repeat.step_budget, trace)
    except BootstrapFailed:
        status = "BootstrapFailed"
    except InsufficientLandmarks:
        status = "InsufficientLandmarks"
    except NoValidPair:
        status = "NoValidPair"
    except StepBudgetExceeded:
        status = "StepBudgetExceeded"
    m = compute_metrics(teach_map, trace, direction)
    report = TrialReport(trial_id, direction, m["start_distance"], m["end_distance"],
                         m["start_angle_diff"], m["end_angle_diff"], trace.completed, gamma, pair,
                         scale, m["cross_track_rms"], status)
    return report, trace


def _trial_job(args):
    world, teach_map, start, direction, run_seed, cfg, trial_id = args
    report, _ = run_trial(world, teach_map, start, direction, run_seed, cfg, trial_id)
    return report


def run_batch(world, teach_map, starts, direction=FORWARD, seed=0, cfg=None, jobs=1):
    """One trial per start pose; trial ``i`` uses run seed ``(seed, i)``.

    Results do not depend on ``jobs``.
    """
    cfg = cfg or VTRConfig()
    args = [(world, teach_map, s, direction, (seed, i), cfg, i) for i, s in enumerate(starts)]
    if jobs <= 1 or len(args) <= 1:
        return [_trial_job(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_trial_job, args))


def summarize(reports):
    """Mean and (population) standard deviation of each metric over completed trials."""
    done = [r for r in reports if r.completed]
    summary = {"trials": len(reports), "completed": len(done), "empty": not done, "metrics": {}}
    for name in METRICS:
        values = np.array([getattr(r, name) for r in done], dtype=float)
        summary["metrics"][name] = (
            {"mean": float(values.mean()), "std": float(values.std())} if done
            else {"mean": None, "std": None})
    return summary


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def reports_to_csv(reports, fh=None):
    out = fh if fh is not None else io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(REPORT_FIELDS)
    for r in reports:
        w.writerow([_fmt(getattr(r, f)) for f in REPORT_FIELDS])
    return out.getvalue() if fh is None else None


def reports_from_csv(text):
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        kw = {}
        for f in fields(TrialReport):
            v = row[f.name]
            if f.name == "trial_id":
                v = int(v)
            elif f.name == "completed":
                v = v == "True"
            elif f.name in ("direction", "chosen_pair", "status"):
                pass
            else:
                v = float(v)
            kw[f.name] = v
        out.append(TrialReport(**kw))
    return out


def parse_pose(text):
    """'x,y,heading_deg' -> ground-truth Pose."""
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected 'x,y,heading_deg', got {text!r}")
    x, y, h = (float(p) for p in parts)
    return Pose(x, y, 0.0, math.radians(h))


def load_starts(path):
    """Start poses from JSON ([[x, y, deg], ...] or [{"x", "y", "heading_deg"}, ...]) or text lines."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        return [parse_pose(ln) for ln in lines]
    if not isinstance(data, list):
        raise SchemaError("$", "expected a list of start poses")
    out = []
    for i, item in enumerate(data):
        try:
            if isinstance(item, dict):
                x, y, h = float(item["x"]), float(item["y"]), float(item["heading_deg"])
            else:
                x, y, h = (float(v) for v in item)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"[{i}]", "expected x, y, heading_deg") from exc
        out.append(Pose(x, y, 0.0, math.radians(h)))
    return out
