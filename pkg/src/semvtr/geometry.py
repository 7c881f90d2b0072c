"""Planar rigid transforms about the vertical axis.

Everything here works on 3D points but only ever rotates/translates the
horizontal (x, y) part; z passes through untouched.  +z is up.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePair

TWO_PI = 2.0 * math.pi
MIN_PAIR_SEPARATION = 1e-9


def wrap_angle(a):
    """Normalize an angle to (-pi, pi]."""
    r = math.remainder(a, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


@dataclass(frozen=True)
class PlanarTransform:
    alpha: float = 0.0
    dx: float = 0.0
    dy: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", wrap_angle(float(self.alpha)))
        object.__setattr__(self, "dx", float(self.dx))
        object.__setattr__(self, "dy", float(self.dy))

    @classmethod
    def identity(cls):
        return cls(0.0, 0.0, 0.0)

    def matrix(self):
        """4x4 homogeneous form (rotation about z, translation in x/y)."""
        c, s = math.cos(self.alpha), math.sin(self.alpha)
        return np.array([[c, -s, 0.0, self.dx],
                         [s, c, 0.0, self.dy],
                         [0.0, 0.0, 1.0, 0.0],
                         [0.0, 0.0, 0.0, 1.0]])

    def __matmul__(self, other):
        return compose(self, other)


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    z: float = 0.0
    heading: float = 0.0
    frame_id: str = "world"

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))

    @property
    def position(self):
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class PairFrame:
    origin: tuple
    y_axis: tuple
    x_axis: tuple


def _rotate(alpha, x, y):
    c, s = math.cos(alpha), math.sin(alpha)
    return c * x - s * y, s * x + c * y


def compose(a, b):
    """Transform equivalent to applying ``b`` first, then ``a``."""
    tx, ty = _rotate(a.alpha, b.dx, b.dy)
    return PlanarTransform(a.alpha + b.alpha, tx + a.dx, ty + a.dy)


def invert(t):
    tx, ty = _rotate(-t.alpha, t.dx, t.dy)
    return PlanarTransform(-t.alpha, -tx, -ty)


def apply_point(t, p):
    x, y = _rotate(t.alpha, p[0], p[1])
    return (x + t.dx, y + t.dy, p[2])


def apply_points(t, pts):
    """Vectorized apply_point over an (n, 3) array."""
    pts = np.asarray(pts, dtype=float)
    c, s = math.cos(t.alpha), math.sin(t.alpha)
    out = pts.copy()
    out[:, 0] = c * pts[:, 0] - s * pts[:, 1] + t.dx
    out[:, 1] = s * pts[:, 0] + c * pts[:, 1] + t.dy
    return out


def apply_pose(t, pose):
    x, y, z = apply_point(t, pose.position)
    return Pose(x, y, z, pose.heading + t.alpha, pose.frame_id)


def build_pair_frame(first, second):
    """Frame anchored at ``first`` with +y pointing (horizontally) at ``second``."""
    ux = second[0] - first[0]
    uy = second[1] - first[1]
    norm = math.sqrt(ux * ux + uy * uy)
    if norm < MIN_PAIR_SEPARATION:
        raise DegeneratePair(f"horizontal separation {norm:.3g} below {MIN_PAIR_SEPARATION}")
    ux, uy = ux / norm, uy / norm
    # cross(y, up) with up = +z
    return PairFrame(origin=tuple(float(v) for v in first), y_axis=(ux, uy), x_axis=(uy, -ux))


def map_to_pair_transform(frame):
    """Transform taking map coordinates into the pair frame's coordinates."""
    yx, yy = frame.y_axis
    # rows of the rotation are (x_axis, y_axis) = (cos a, -sin a), (sin a, cos a)
    alpha = math.atan2(yx, yy)
    ox, oy = frame.origin[0], frame.origin[1]
    tx, ty = _rotate(alpha, ox, oy)
    return PlanarTransform(alpha, -tx, -ty)


def pair_frame_coords(frame, pts):
    """Coordinates of ``pts`` (n, 3) in ``frame``, computed from the frame axes.

    z is left as-is, matching map_to_pair_transform.
    """
    pts = np.asarray(pts, dtype=float)
    rx = pts[:, 0] - frame.origin[0]
    ry = pts[:, 1] - frame.origin[1]
    out = np.empty_like(pts)
    out[:, 0] = rx * frame.x_axis[0] + ry * frame.x_axis[1]
    out[:, 1] = rx * frame.y_axis[0] + ry * frame.y_axis[1]
    out[:, 2] = pts[:, 2]
    return out
