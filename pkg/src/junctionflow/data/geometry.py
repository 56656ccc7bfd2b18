"""Control volumes of the on-ramp junction and the network boundaries.

Coordinates are metres with traffic moving in +x. The freeway occupies
y in [0, 10.5] (three 3.5 m lanes), the on-ramp lane y in [-3.5, 0]. The
network's left boundary is the left edge of V2, the right boundary the right
edge of V3; their distance is 2 s with s the road length used by the solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..kvfile import read_kv, write_kv

LANE_WIDTH = 3.5


@dataclass(frozen=True)
class ControlVolume:
    """Closed axis-aligned rectangle; ``diameter`` is its longitudinal extent."""

    name: str
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ConfigError(f"degenerate control volume {self.name}")

    @property
    def diameter(self) -> float:
        return self.x_max - self.x_min

    @property
    def center_x(self) -> float:
        return 0.5 * (self.x_min + self.x_max)

    def contains(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        # NaN positions (vehicle absent) compare False
        return (x >= self.x_min) & (x <= self.x_max) & (y >= self.y_min) & (y <= self.y_max)


@dataclass(frozen=True)
class JunctionGeometry:
    volumes: tuple  # (V1, V2, V3)

    def __post_init__(self):
        if len(self.volumes) != 3:
            raise ConfigError("geometry needs exactly three control volumes")
        v1, v2, v3 = self.volumes
        if v2.x_max >= v3.x_min:
            raise ConfigError("V2 and V3 must be disjoint with a gap between them")
        if v1.x_max >= v3.x_min:
            raise ConfigError("V1 must end before V3 starts")
        overlap_y = min(v1.y_max, v2.y_max) - max(v1.y_min, v2.y_min)
        if overlap_y > 0 and min(v1.x_max, v2.x_max) > max(v1.x_min, v2.x_min):
            raise ConfigError("V1 and V2 overlap")

    @property
    def left_boundary(self) -> float:
        return self.volumes[1].x_min

    @property
    def right_boundary(self) -> float:
        return self.volumes[2].x_max

    @property
    def road_length(self) -> float:
        """Half the distance between the network boundaries."""
        return 0.5 * (self.right_boundary - self.left_boundary)

    def road_at(self, y) -> int:
        """Incoming road (1 ramp, 2 freeway) of a point at lateral position y."""
        v1, v2 = self.volumes[0], self.volumes[1]
        if v1.y_min <= y <= v1.y_max and not (v2.y_min <= y <= v2.y_max):
            return 1
        return 2


def default_geometry() -> JunctionGeometry:
    s = 135.14
    return JunctionGeometry(
        (
            ControlVolume("V1", -85.0, 0.0, -LANE_WIDTH, 0.0),
            ControlVolume("V2", -s, -35.14, 0.0, 3 * LANE_WIDTH),
            ControlVolume("V3", 35.14, s, 0.0, 3 * LANE_WIDTH),
        )
    )


def write_geometry(path, geometry: JunctionGeometry, meta=None) -> None:
    items = {}
    for vol in geometry.volumes:
        for key in ("x_min", "x_max", "y_min", "y_max"):
            items[f"{vol.name}.{key}"] = float(getattr(vol, key))
    write_kv(path, "geometry", items, meta)


def read_geometry(path) -> JunctionGeometry:
    kv = read_kv(path, "geometry")
    try:
        vols = tuple(
            ControlVolume(name, *(float(kv[f"{name}.{k}"]) for k in ("x_min", "x_max", "y_min", "y_max")))
            for name in ("V1", "V2", "V3")
        )
    except KeyError as exc:
        raise ConfigError(f"{path}: missing geometry key {exc}") from None
    return JunctionGeometry(vols)
