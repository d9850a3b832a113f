from __future__ import annotations

"""Planar cloth model: boundary generators and local contact queries."""

import logging
import math
import os
import sys
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np
import shapely
from shapely.geometry import LinearRing, Point, Polygon

from src.common import ContactClass, EdgePose, SensorFootprint, fit_line_tls
from src.errors import GenerationFailureError, InvalidArgumentError

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

LEFT_OF_EDGE = 'left_of_edge'
RIGHT_OF_EDGE = 'right_of_edge'

_SIDE_NORMALS = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
_SAMPLE_STEP_MM = 0.25


@dataclass(frozen=True, eq=False)
class ClothEdge:
    boundary: np.ndarray
    corner_indices: Tuple[int, int, int, int]
    perturbation_seed: Optional[int] = None

    def __post_init__(self) -> None:
        pts = np.asarray(self.boundary, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 4:
            raise InvalidArgumentError("boundary must be an (n >= 4, 2) vertex array")
        if len(self.corner_indices) != 4:
            raise InvalidArgumentError("exactly four corner indices are required")
        if any(not 0 <= int(i) < pts.shape[0] for i in self.corner_indices):
            raise InvalidArgumentError(f"corner indices out of range: {self.corner_indices}")
        object.__setattr__(self, 'boundary', pts)
        object.__setattr__(self, 'corner_indices', tuple(int(i) for i in self.corner_indices))

    @cached_property
    def polygon(self) -> Polygon:
        poly = Polygon(self.boundary)
        shapely.prepare(poly)
        return poly

    @property
    def corners(self) -> np.ndarray:
        return self.boundary[list(self.corner_indices)]

    @property
    def n_vertices(self) -> int:
        return int(self.boundary.shape[0])

    def is_simple(self) -> bool:
        return bool(LinearRing(self.boundary).is_simple)

    def max_segment_mm(self) -> float:
        seg = np.roll(self.boundary, -1, axis=0) - self.boundary
        return float(np.max(np.hypot(seg[:, 0], seg[:, 1])))

    def translated(self, dx: float, dy: float) -> 'ClothEdge':
        return ClothEdge(self.boundary + np.array([dx, dy]), self.corner_indices, self.perturbation_seed)


@dataclass(frozen=True)
class ContactQueryResult:
    true_class: ContactClass
    true_edge_pose: Optional[EdgePose]
    coverage_fraction: float
    cloth_side: Optional[str] = None


def _check_dimensions(width_mm: float, height_mm: float) -> None:
    for name, value in (('width_mm', width_mm), ('height_mm', height_mm)):
        if not 50.0 <= float(value) <= 1000.0:
            raise InvalidArgumentError(f"{name} must be in [50, 1000], got {value}")


def _check_seed(seed: int) -> int:
    if int(seed) != seed or seed < 0:
        raise InvalidArgumentError(f"seed must be a non-negative integer, got {seed}")
    return int(seed)


def _rectangle_outline(width_mm: float, height_mm: float, spacing_mm: float):
    """Counter-clockwise rectangle samples starting at the lower-left corner."""
    hw, hh = width_mm / 2.0, height_mm / 2.0
    vertices = np.array([[-hw, -hh], [hw, -hh], [hw, hh], [-hw, hh]])
    points: List[np.ndarray] = []
    normals: List[np.ndarray] = []
    sides: List[int] = []
    corners: List[int] = []
    for side in range(4):
        start, end = vertices[side], vertices[(side + 1) % 4]
        n_seg = int(math.ceil(np.linalg.norm(end - start) / spacing_mm))
        corners.append(len(points))
        for k in range(n_seg):
            points.append(start + (end - start) * (k / n_seg))
            if k == 0:
                normal = _SIDE_NORMALS[side] + _SIDE_NORMALS[side - 1]
                normals.append(normal / np.linalg.norm(normal))
            else:
                normals.append(_SIDE_NORMALS[side])
            sides.append(side)
    return np.array(points), np.array(normals), np.array(sides), tuple(corners)


def _boundary_noise(points, normals, corners, seed: int, noise_mm: float) -> np.ndarray:
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(-noise_mm, noise_mm, size=points.shape[0])
    offsets[list(corners)] = 0.0
    return points + offsets[:, None] * normals


def _densify(points: np.ndarray, corners: Tuple[int, ...], max_step: float):
    out: List[np.ndarray] = []
    remap = {}
    n = points.shape[0]
    for i in range(n):
        start, end = points[i], points[(i + 1) % n]
        pieces = max(1, int(math.ceil(np.linalg.norm(end - start) / max_step)))
        remap[i] = len(out)
        for j in range(pieces):
            out.append(start + (end - start) * (j / pieces))
    return np.array(out), tuple(remap[c] for c in corners)


def make_flattened(
    width_mm: float,
    height_mm: float,
    seed: int,
    noise_mm: float = Config.CLOTH_NOISE_MM,
) -> ClothEdge:
    """Axis-aligned rectangle centred on the origin with small seeded boundary noise."""
    _check_dimensions(width_mm, height_mm)
    seed = _check_seed(seed)
    if not 0.0 <= noise_mm <= 1.0:
        raise InvalidArgumentError(f"noise_mm must be in [0, 1], got {noise_mm}")
    points, normals, _, corners = _rectangle_outline(
        float(width_mm), float(height_mm), Config.CLOTH_VERTEX_SPACING_MM
    )
    noisy = _boundary_noise(points, normals, corners, seed, noise_mm)
    return ClothEdge(noisy, corners, seed)


def make_crumpled(
    width_mm: float,
    height_mm: float,
    severity: float,
    seed: int,
    noise_mm: float = Config.CLOTH_NOISE_MM,
    max_retries: int = Config.CRUMPLE_MAX_RETRIES,
) -> ClothEdge:
    """Flattened outline perturbed by low-frequency waves and inward folds.

    The displacement is damped and retried until the outline is simple.
    """
    if not 0.0 <= severity <= 1.0:
        raise InvalidArgumentError(f"severity must be in [0, 1], got {severity}")
    flat = make_flattened(width_mm, height_mm, seed, noise_mm)
    if severity == 0.0:
        return flat

    points, normals, sides, corners = _rectangle_outline(
        float(width_mm), float(height_mm), Config.CLOTH_VERTEX_SPACING_MM
    )
    base = flat.boundary
    seg = np.hypot(*(np.roll(points, -1, axis=0) - points).T)
    arc = np.concatenate([[0.0], np.cumsum(seg)[:-1]])
    perimeter = float(seg.sum())

    rng = np.random.default_rng((seed, 1))
    freqs = rng.integers(2, 9, size=3)
    amps = rng.uniform(0.3, 1.0, size=3)
    amps = amps / amps.sum()
    phases = rng.uniform(0.0, 2 * math.pi, size=3)
    wave = np.zeros_like(arc)
    for f, a, p in zip(freqs, amps, phases):
        wave += a * np.sin(2 * math.pi * f * arc / perimeter + p)
    wave *= Config.CRUMPLE_WAVE_MM * severity

    side_lengths = [float(width_mm), float(height_mm)] * 2
    folds = np.zeros_like(arc)
    n_folds = 1 + int(round(severity * 4))
    for k in range(n_folds):
        side = int(rng.integers(0, 4))
        along = rng.uniform(0.25, 0.75) * side_lengths[side]
        center = arc[corners[side]] + along
        width = min(Config.CRUMPLE_FOLD_WIDTH_MM, side_lengths[side] / 8.0)
        depth = Config.CRUMPLE_FOLD_DEPTH_MM * severity * (1.0 if k == 0 else rng.uniform(0.6, 1.0))
        delta = np.abs(arc - center)
        delta = np.minimum(delta, perimeter - delta)
        folds += depth * np.exp(-0.5 * (delta / width) ** 2)

    displacement = wave - folds
    damping = 1.0
    for attempt in range(max_retries + 1):
        candidate = base + (damping * displacement)[:, None] * normals
        if LinearRing(candidate).is_simple:
            dense, dense_corners = _densify(candidate, corners, Config.CLOTH_MAX_SEGMENT_MM)
            if attempt:
                logger.warning("Crumpled outline needed %d damping retries (seed %d)", attempt, seed)
            return ClothEdge(dense, dense_corners, seed)
        damping *= 0.6
    raise GenerationFailureError(
        f"could not generate a simple crumpled outline after {max_retries} retries "
        f"(severity={severity}, seed={seed})"
    )


def _sample_lines(geometry, step: float = _SAMPLE_STEP_MM) -> np.ndarray:
    samples: List[np.ndarray] = []
    for part in getattr(geometry, 'geoms', [geometry]):
        if part.is_empty or part.geom_type not in ('LineString', 'LinearRing'):
            continue
        length = part.length
        if length <= 0:
            continue
        n = max(2, int(math.ceil(length / step)) + 1)
        pts = shapely.line_interpolate_point(part, np.linspace(0.0, length, n))
        samples.append(shapely.get_coordinates(pts))
    if not samples:
        return np.empty((0, 2))
    return np.vstack(samples)


def query_contact(cloth: ClothEdge, fp: SensorFootprint) -> ContactQueryResult:
    """Ground-truth contact class and local edge pose for a footprint placement."""
    fp_poly = fp.polygon()
    inter = cloth.polygon.intersection(fp_poly)
    if inter.is_empty or inter.area <= 0.0:
        return ContactQueryResult(ContactClass.GRASP_FAILURE, None, 0.0)
    if cloth.polygon.contains(fp_poly):
        return ContactQueryResult(ContactClass.IN_FABRIC, None, 1.0)

    coverage = min(inter.area / fp_poly.area, float(np.nextafter(1.0, 0.0)))
    has_corner = any(fp_poly.contains(Point(c)) for c in cloth.corners)
    true_class = ContactClass.CORNER if has_corner else ContactClass.EDGE

    local = _sample_lines(cloth.polygon.exterior.intersection(fp_poly))
    if local.shape[0] < 2:
        local = np.asarray(inter.exterior.coords) if hasattr(inter, 'exterior') else local
    sensor_pts = fp.world_to_sensor(local)
    centroid, theta, _ = fit_line_tls(sensor_pts)
    pose = EdgePose(float(centroid[0]), float(centroid[1]), theta).canonical()

    region_center = fp.world_to_sensor(np.array(inter.centroid.coords[0]))[0]
    side = LEFT_OF_EDGE if pose.normal() @ (region_center - np.array([pose.x, pose.y])) > 0 else RIGHT_OF_EDGE
    return ContactQueryResult(true_class, pose, float(coverage), side)


def boundary_arc_lengths(cloth: ClothEdge) -> np.ndarray:
    seg = np.hypot(*(np.roll(cloth.boundary, -1, axis=0) - cloth.boundary).T)
    return np.concatenate([[0.0], np.cumsum(seg)])


def point_along_boundary(cloth: ClothEdge, corner: int, distance_mm: float) -> Tuple[np.ndarray, float]:
    """Point reached by walking the boundary from a structural corner, and the local tangent angle."""
    ring = LinearRing(np.roll(cloth.boundary, -cloth.corner_indices[corner], axis=0))
    perimeter = ring.length
    s = float(distance_mm) % perimeter
    here = np.array(ring.interpolate(s).coords[0])
    ahead = np.array(ring.interpolate(min(s + 2.0, perimeter)).coords[0])
    behind = np.array(ring.interpolate(max(s - 2.0, 0.0)).coords[0])
    tangent = ahead - behind
    return here, math.atan2(tangent[1], tangent[0])


def to_text(cloth: ClothEdge) -> str:
    lines = [f"CLOTH v1 {cloth.n_vertices}"]
    lines.extend(f"{x:.17g} {y:.17g}" for x, y in cloth.boundary)
    lines.append("CORNERS " + " ".join(str(i) for i in cloth.corner_indices))
    return "\n".join(lines) + "\n"


def from_text(text: str) -> ClothEdge:
    rows = [row.strip() for row in text.strip().splitlines() if row.strip()]
    if not rows:
        raise InvalidArgumentError("empty cloth description")
    header = rows[0].split()
    if len(header) != 3 or header[0] != 'CLOTH' or header[1] != 'v1':
        raise InvalidArgumentError(f"bad cloth header: '{rows[0]}'")
    n = int(header[2])
    if len(rows) != n + 2:
        raise InvalidArgumentError(f"expected {n} vertices, found {len(rows) - 2}")
    try:
        boundary = np.array([[float(v) for v in row.split()] for row in rows[1:n + 1]])
    except ValueError as exc:
        raise InvalidArgumentError(f"bad vertex line: {exc}") from None
    footer = rows[-1].split()
    if footer[0] != 'CORNERS' or len(footer) != 5:
        raise InvalidArgumentError(f"bad corner line: '{rows[-1]}'")
    return ClothEdge(boundary, tuple(int(i) for i in footer[1:]))


def save_cloth(cloth: ClothEdge, path: str) -> None:
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write(to_text(cloth))


def load_cloth(path: str) -> ClothEdge:
    with open(path, 'r', encoding='utf-8') as handle:
        return from_text(handle.read())
