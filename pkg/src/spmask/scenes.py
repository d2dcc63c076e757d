"""Synthetic indoor scenes for tests, benchmarks and the CLI demo."""
from dataclasses import dataclass

import numpy as np

from .geometry import PointCloud


@dataclass(frozen=True)
class SyntheticScene:
    cloud: PointCloud
    instance: np.ndarray  # per-point object id, -1 for room structure
    boxes: np.ndarray  # (num_objects, 6)
    classes: tuple  # class name per object


# (center, size, rgb, class)
_OBJECTS = (
    ((1.0, 1.0, 0.4), (0.8, 0.6, 0.8), (0.7, 0.2, 0.2), "cabinet"),
    ((2.8, 1.2, 0.25), (0.5, 0.5, 0.5), (0.2, 0.6, 0.2), "chair"),
    ((2.8, 2.8, 0.25), (0.5, 0.5, 0.5), (0.2, 0.5, 0.3), "chair"),
    ((1.2, 2.9, 0.375), (1.2, 0.7, 0.75), (0.3, 0.3, 0.8), "table"),
)
_ROOM = 4.0


def _box_surface(rng, center, size, count):
    """Points on the five visible faces of a box (no bottom face)."""
    size = np.asarray(size)
    areas = np.array([size[0] * size[1], size[1] * size[2], size[1] * size[2], size[0] * size[2], size[0] * size[2]])
    face = rng.choice(5, size=count, p=areas / areas.sum())
    u = rng.random((count, 3)) - 0.5
    pts = u * size
    pts[face == 0, 2] = size[2] / 2
    pts[face == 1, 0] = -size[0] / 2
    pts[face == 2, 0] = size[0] / 2
    pts[face == 3, 1] = -size[1] / 2
    pts[face == 4, 1] = size[1] / 2
    return pts + np.asarray(center)


def synthetic_room(n_points=5000, seed=0, noise=0.002):
    """Floor, two walls and four furniture boxes, with per-object ids and boxes."""
    rng = np.random.default_rng(seed)
    n_obj = n_points // 2
    n_floor = (n_points - n_obj) // 2
    n_wall = n_points - n_obj - n_floor
    floor = np.column_stack([rng.random((n_floor, 2)) * _ROOM, np.zeros(n_floor)])
    wx = n_wall // 2
    wall_x = np.column_stack([rng.random(wx) * _ROOM, np.zeros(wx), rng.random(wx) * 2.5])
    wall_y = np.column_stack([np.zeros(n_wall - wx), rng.random(n_wall - wx) * _ROOM, rng.random(n_wall - wx) * 2.5])
    parts = [floor, wall_x, wall_y]
    colors = [np.tile([0.6, 0.55, 0.5], (n_floor, 1)), np.tile([0.9, 0.9, 0.85], (n_wall, 1))]
    instance = [np.full(n_points - n_obj, -1)]
    per_obj = np.full(len(_OBJECTS), n_obj // len(_OBJECTS))
    per_obj[: n_obj - per_obj.sum()] += 1
    boxes = []
    for oid, ((center, size, rgb, _), cnt) in enumerate(zip(_OBJECTS, per_obj)):
        parts.append(_box_surface(rng, center, size, cnt))
        colors.append(np.tile(rgb, (cnt, 1)))
        instance.append(np.full(cnt, oid))
        boxes.append(center + size)
    pos = np.concatenate(parts) + rng.normal(scale=noise, size=(n_points, 3))
    col = np.clip(np.concatenate(colors) + rng.normal(scale=0.02, size=(n_points, 3)), 0.0, 1.0)
    return SyntheticScene(
        cloud=PointCloud(pos, col),
        instance=np.concatenate(instance),
        boxes=np.array(boxes, dtype=np.float64),
        classes=tuple(o[3] for o in _OBJECTS),
    )
