"""Desk-scale lab scenario: an 8 m x 6 m room with 11 objects (two chairs)."""
import math

from .geometry import Pose
from .simworld import CameraSpec, NoiseSpec, WorldObject, WorldSpec

LAB_OBJECTS = (
    ("tv-monitor", (7.6, 1.5, 1.0), 0.30),
    ("clock", (7.8, 4.0, 1.6), 0.15),
    ("oven", (4.5, 5.6, 0.9), 0.35),
    ("suitcase", (3.0, 0.2, 0.6), 0.30),
    ("handbag", (5.0, 3.2, 0.4), 0.15),
    ("umbrella", (7.2, 5.6, 1.0), 0.20),
    ("bottle", (2.5, 3.5, 0.8), 0.10),
    ("potted-plant", (0.4, 5.0, 0.8), 0.30),
    ("sofa", (1.5, 5.5, 0.9), 0.50),
    ("chair", (4.0, 2.4, 0.9), 0.30),
    ("chair", (7.0, 2.2, 0.9), 0.30),
)

LAB_TEACH_PATH = ((1.0, 1.0), (6.0, 1.0), (6.0, 4.5))

# (x, y, heading in degrees) ground-truth start poses
FORWARD_STARTS = (
    (3.5, 3.0, 180.0),
    (1.0, 4.0, -90.0),
    (4.0, 2.5, 135.0),
    (3.0, 0.3, 90.0),
    (2.0, 2.5, -45.0),
    (0.5, 3.6, 0.0),
    (0.6, 2.0, 180.0),
    (5.0, 0.3, 180.0),
    (3.0, 1.8, 90.0),
    (2.5, 4.0, -135.0),
)

BACKWARD_STARTS = (
    (6.3, 4.0, -90.0),
    (5.0, 4.5, -60.0),
    (7.0, 3.0, -120.0),
    (5.5, 1.5, 180.0),
    (4.0, 3.5, 170.0),
    (6.5, 5.2, -100.0),
    (3.0, 1.5, -160.0),
)

# moves used for the relocation study: four unique objects plus one chair
RELOCATION_MOVES = (
    ("chair", (2.0, 4.0, 0.9)),
    ("handbag", (3.5, 4.5, 0.4)),
    ("clock", (7.8, 0.6, 1.6)),
    ("oven", (2.8, 5.6, 0.9)),
    ("suitcase", (7.0, 4.2, 0.6)),
)


def lab_world(seed=7, feature_sigma=0.02, slam_scale_range=(0.5, 2.0), odom_sigma=0.0):
    return WorldSpec(
        objects=tuple(WorldObject(label, pos, r) for label, pos, r in LAB_OBJECTS),
        teach_path=LAB_TEACH_PATH,
        rng_seed=seed,
        noise=NoiseSpec(feature_sigma=feature_sigma, slam_scale_range=tuple(slam_scale_range),
                        odom_sigma=odom_sigma),
        camera=CameraSpec(),
    )


def as_poses(starts):
    return [Pose(x, y, 0.0, math.radians(h)) for x, y, h in starts]
