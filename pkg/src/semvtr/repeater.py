"""Closed-loop teach-path repetition with a rotate-then-drive controller."""
import csv
import io
import math
from dataclasses import dataclass, field

from .errors import EmptyPath, StepBudgetExceeded
from .geometry import wrap_angle
from .relocalizer import relocalize_pose

FORWARD = "forward"
BACKWARD = "backward"
PHASES = ("bootstrap", "approach", "follow", "done")


def parse_direction(value):
    v = str(value).lower()
    if v in ("fwd", "forward", "f"):
        return FORWARD
    if v in ("bwd", "backward", "b"):
        return BACKWARD
    raise ValueError(f"unknown direction {value!r}")


@dataclass(frozen=True)
class ControlCommand:
    linear_velocity: float = 0.0
    angular_velocity: float = 0.0

    @property
    def is_stop(self):
        return self.linear_velocity == 0.0 and self.angular_velocity == 0.0


@dataclass(frozen=True)
class ControlLimits:
    v_max: float = 0.5
    omega_max: float = 1.0
    k_lin: float = 1.0
    k_ang: float = 1.0


@dataclass(frozen=True)
class RepeatPlan:
    direction: str = FORWARD
    start_index: int = 0
    goal_tolerance: float = 0.05
    lookahead: float = 1.0
    heading_deadband: float = math.radians(5.0)

    def __post_init__(self):
        object.__setattr__(self, "direction", parse_direction(self.direction))
        if not 0.0 < self.lookahead <= 1.0:
            raise ValueError(f"lookahead must be in (0, 1], got {self.lookahead}")
        if self.start_index < 0:
            raise ValueError("start_index must be >= 0")


def _xy(p):
    return (p.x, p.y) if hasattr(p, "x") else (p[0], p[1])


def closest_keyframe(path, pose):
    """Index of the keyframe nearest (planar) to ``pose``; ties go to the lower index."""
    if not path:
        raise EmptyPath("teach path has no keyframes")
    px, py = _xy(pose)
    best, best_d = 0, math.inf
    for k, kf in enumerate(path):
        x, y = _xy(kf)
        d = math.hypot(x - px, y - py)
        if d < best_d:
            best, best_d = k, d
    return best


def next_goal(path, current, direction, lookahead=1.0):
    """Farthest keyframe along the path within ``lookahead`` arc length (at least one step)."""
    step = 1 if parse_direction(direction) == FORWARD else -1
    last = len(path) - 1 if step == 1 else 0
    if current == last:
        return current
    arc = 0.0
    k = current
    while k != last:
        a, b = _xy(path[k]), _xy(path[k + step])
        seg = math.hypot(b[0] - a[0], b[1] - a[1])
        if arc + seg > lookahead and k != current:
            break
        arc += seg
        k += step
        if arc > lookahead:
            break
    return k


def control_step(pose, goal, plan, limits):
    dx, dy = goal[0] - pose.x, goal[1] - pose.y
    dist = math.hypot(dx, dy)
    if dist <= plan.goal_tolerance:
        return ControlCommand(0.0, 0.0)
    err = wrap_angle(math.atan2(dy, dx) - pose.heading)
    if abs(err) > plan.heading_deadband:
        return ControlCommand(0.0, math.copysign(limits.omega_max, err))
    v = min(limits.v_max, limits.k_lin * dist)
    w = max(-limits.omega_max, min(limits.omega_max, limits.k_ang * err))
    return ControlCommand(v, w)


@dataclass
class RepeatTrace:
    rows: list = field(default_factory=list)  # (t, x, y, heading, phase, goal_index)
    completed: bool = False

    def add(self, t, pose, phase, goal_index):
        self.rows.append((t, pose.x, pose.y, pose.heading, phase, goal_index))

    def goal_indices(self, phase=None):
        return [r[5] for r in self.rows if phase is None or r[4] == phase]

    def to_csv(self, fh=None):
        out = fh if fh is not None else io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["t", "x", "y", "heading", "phase", "goal_index"])
        for t, x, y, h, phase, g in self.rows:
            w.writerow([repr(t), repr(x), repr(y), repr(h), phase, g])
        return out.getvalue() if fh is None else None


def run_repeat(teach, reloc, start, direction, sim, plan=None, limits=None, dt=0.05,
               step_budget=20000, trace=None):
    """Drive ``sim`` along the teach keyframes.

    ``start`` is the robot pose in the repeat map at hand-over; afterwards the
    simulator's repeat-frame odometry is mapped into the teach frame with the
    single relocalization result.  Trace rows hold the simulator's
    ground-truth pose.  Raises StepBudgetExceeded (carrying the trace) if the
    terminal keyframe is not reached within ``step_budget`` steps.
    """
    path = teach.keyframes
    if len(path) < 2:
        raise EmptyPath("teach map needs at least two keyframes")
    direction = parse_direction(direction)
    limits = limits or ControlLimits()
    trace = trace if trace is not None else RepeatTrace()
    terminal = len(path) - 1 if direction == FORWARD else 0

    pose_t = relocalize_pose(reloc, start)
    idx = closest_keyframe(path, pose_t)
    base = plan or RepeatPlan(direction)
    plan = RepeatPlan(direction, idx, base.goal_tolerance, base.lookahead, base.heading_deadband)
    phase = "approach"
    trace.add(sim.t, sim.pose, phase, idx)
    steps = 0
    while True:
        goal = path[idx]
        cmd = control_step(pose_t, (goal.x, goal.y), plan, limits)
        if cmd.is_stop:
            if idx == terminal:
                break
            idx = next_goal(path, idx, direction, plan.lookahead)
            phase = "follow"
            continue
        if steps >= step_budget:
            trace.completed = False
            raise StepBudgetExceeded(trace)
        sim.step(cmd, dt)
        steps += 1
        pose_t = relocalize_pose(reloc, sim.map_pose())
        trace.add(sim.t, sim.pose, phase, idx)
    trace.add(sim.t, sim.pose, "done", idx)
    trace.completed = True
    return trace
