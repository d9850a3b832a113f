from __future__ import annotations

"""Value types shared by the world, renderer and perception modules."""

import logging
import math
import os
import sys
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np
from shapely.geometry import Polygon

from src.errors import InvalidArgumentError

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
try:
    from config import Config
except ImportError:
    import config as config_mod
    Config = config_mod.Config


class ContactClass(Enum):
    """What the sensing window touches. Declaration order is the tie-break order."""

    EDGE = 'edge'
    CORNER = 'corner'
    IN_FABRIC = 'infabric'
    GRASP_FAILURE = 'graspfail'

    @property
    def index(self) -> int:
        return CLASS_ORDER.index(self)

    @classmethod
    def parse(cls, label: str) -> 'ContactClass':
        try:
            return cls(label.strip().lower())
        except ValueError:
            raise InvalidArgumentError(f"unknown contact class '{label}'") from None


CLASS_ORDER: Tuple[ContactClass, ...] = tuple(ContactClass)


def wrap_line_angle(theta: float) -> float:
    """Map an undirected line angle into (-pi/2, pi/2]."""
    t = float(theta) % math.pi
    if t > math.pi / 2:
        t -= math.pi
    return t


@dataclass(frozen=True)
class EdgePose:
    """Cloth edge line in the sensor frame: a point on the line and its angle (rad)."""

    x: float
    y: float
    theta: float

    def normal(self) -> np.ndarray:
        return np.array([-math.sin(self.theta), math.cos(self.theta)])

    def offset(self) -> float:
        """Signed distance from the sensor origin to the line along the left normal."""
        return float(self.normal() @ np.array([self.x, self.y]))

    def canonical(self) -> 'EdgePose':
        """Same line, represented by the foot of the perpendicular from the origin."""
        theta = wrap_line_angle(self.theta)
        n = np.array([-math.sin(theta), math.cos(theta)])
        d = float(n @ np.array([self.x, self.y]))
        return EdgePose(x=d * n[0] + 0.0, y=d * n[1] + 0.0, theta=theta)

    def distance_to(self, other: 'EdgePose') -> float:
        a, b = self.canonical(), other.canonical()
        return math.hypot(a.x - b.x, a.y - b.y)

    def angle_error(self, other: 'EdgePose') -> float:
        """Unsigned line-angle difference in [0, pi/2]."""
        return abs(wrap_line_angle(self.theta - other.theta))

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.x, self.y, self.theta)


def fit_line_tls(points: np.ndarray) -> Tuple[np.ndarray, float, float]:
    """Total-least-squares line through 2D points.

    Returns (centroid, direction angle in (-pi/2, pi/2], rms orthogonal residual).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise InvalidArgumentError("line fit needs at least two points")
    centroid = pts.mean(axis=0)
    _, s, vt = np.linalg.svd(pts - centroid, full_matrices=False)
    direction = vt[0]
    theta = wrap_line_angle(math.atan2(direction[1], direction[0]))
    residual = float(s[-1] / math.sqrt(pts.shape[0])) if s.size > 1 else 0.0
    return centroid, theta, residual


def rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class SensorFootprint:
    """Rectangular sensing window placed in the world (mm, rad)."""

    center: Tuple[float, float]
    heading: float
    width_mm: float = Config.FOOTPRINT_WIDTH_MM
    height_mm: float = Config.FOOTPRINT_HEIGHT_MM

    def __post_init__(self) -> None:
        if not (self.width_mm > 0 and self.height_mm > 0):
            raise InvalidArgumentError(
                f"footprint extent must be positive, got {self.width_mm}x{self.height_mm}"
            )
        if not (np.all(np.isfinite(self.center)) and math.isfinite(self.heading)):
            raise InvalidArgumentError("footprint pose must be finite")

    def corners_world(self) -> np.ndarray:
        hw, hh = self.width_mm / 2, self.height_mm / 2
        local = np.array([[-hw, -hh], [hw, -hh], [hw, hh], [-hw, hh]])
        return self.sensor_to_world(local)

    def polygon(self) -> Polygon:
        return Polygon(self.corners_world())

    def world_to_sensor(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (pts - np.asarray(self.center)) @ rotation(self.heading)

    def sensor_to_world(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts @ rotation(self.heading).T + np.asarray(self.center)

    def translated(self, dx: float, dy: float) -> 'SensorFootprint':
        return SensorFootprint(
            center=(self.center[0] + dx, self.center[1] + dy),
            heading=self.heading,
            width_mm=self.width_mm,
            height_mm=self.height_mm,
        )
