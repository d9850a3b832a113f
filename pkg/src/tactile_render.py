from __future__ import annotations

"""Procedural tactile image synthesis.

Turns an edge annotation (or a cloth placed under a sensor footprint) into a
grayscale tactile frame: cloth-side pixels sit at the contact intensity,
modulated by a cloth-fixed texture, the rest at the background intensity, and
the transition follows an error-function profile across the boundary normal.
"""

import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
import shapely
from PIL import Image
from scipy.special import erf

from src.cloth_world import LEFT_OF_EDGE, RIGHT_OF_EDGE, ClothEdge
from src.common import CLASS_ORDER, ContactClass, EdgePose, SensorFootprint
from src.errors import DatasetWriteError, InvalidArgumentError, InvalidDatasetError

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

LABELS_FILE = 'labels.csv'
META_FILE = 'dataset.json'
LABEL_HEADER = ['file', 'x_mm', 'y_mm', 'theta_rad', 'class']


class TextureId(str, Enum):
    PLAIN = 'plain'
    STRIPES = 'stripes'
    DOTS = 'dots'
    WEAVE = 'weave'


@dataclass(frozen=True)
class RenderParams:
    texture_id: str = TextureId.PLAIN.value
    texture_amplitude: float = 0.0
    contact_softness_mm: float = Config.CONTACT_SOFTNESS_MM
    noise_sigma: float = 0.0
    seed: int = 0
    contact_intensity: float = Config.CONTACT_INTENSITY
    background_intensity: float = Config.BACKGROUND_INTENSITY

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, 'texture_id', TextureId(self.texture_id).value)
        except ValueError:
            raise InvalidArgumentError(f"unknown texture_id '{self.texture_id}'") from None
        if not 0.0 <= self.texture_amplitude <= 1.0:
            raise InvalidArgumentError(f"texture_amplitude must be in [0, 1], got {self.texture_amplitude}")
        if self.noise_sigma < 0.0:
            raise InvalidArgumentError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.texture_amplitude + self.noise_sigma > 1.0:
            raise InvalidArgumentError("texture_amplitude + noise_sigma must not exceed 1")
        if not 0.1 <= self.contact_softness_mm <= 5.0:
            raise InvalidArgumentError(
                f"contact_softness_mm must be in [0.1, 5.0], got {self.contact_softness_mm}"
            )
        for name in ('contact_intensity', 'background_intensity'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidArgumentError(f"{name} must be in [0, 1]")

    def with_seed(self, seed: int) -> 'RenderParams':
        return replace(self, seed=int(seed))

    @property
    def threshold(self) -> float:
        return 0.5 * (self.contact_intensity + self.background_intensity)


@dataclass(frozen=True, eq=False)
class TactileImage:
    pixels: np.ndarray
    mm_per_px: float

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim != 2 or px.size == 0:
            raise InvalidArgumentError("pixels must be a non-empty 2D array")
        if not np.all(np.isfinite(px)) or px.min() < 0.0 or px.max() > 1.0:
            raise InvalidArgumentError("pixel intensities must lie in [0, 1]")
        if not self.mm_per_px > 0:
            raise InvalidArgumentError(f"mm_per_px must be positive, got {self.mm_per_px}")
        object.__setattr__(self, 'pixels', px)

    @property
    def height_px(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width_px(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.pixels.shape

    def extent_mm(self) -> Tuple[float, float]:
        return self.width_px * self.mm_per_px, self.height_px * self.mm_per_px

    def grid(self) -> Tuple[np.ndarray, np.ndarray]:
        return pixel_grid(self.height_px, self.width_px, self.mm_per_px)


@dataclass(frozen=True)
class TactileSequence:
    frames: Tuple[TactileImage, ...]

    def __post_init__(self) -> None:
        frames = tuple(self.frames)
        if len(frames) != Config.SEQUENCE_LENGTH:
            raise InvalidArgumentError(
                f"a tactile sequence holds exactly {Config.SEQUENCE_LENGTH} frames, got {len(frames)}"
            )
        if len({f.shape for f in frames}) != 1:
            raise InvalidArgumentError("all frames of a sequence must share dimensions")
        object.__setattr__(self, 'frames', frames)

    @property
    def last(self) -> TactileImage:
        return self.frames[-1]


@dataclass(frozen=True)
class EdgeAnnotation:
    pose: EdgePose
    cloth_side: str = LEFT_OF_EDGE

    def __post_init__(self) -> None:
        if not -math.pi / 2 < self.pose.theta <= math.pi / 2:
            raise InvalidArgumentError(f"annotation theta must be in (-pi/2, pi/2], got {self.pose.theta}")
        if self.cloth_side not in (LEFT_OF_EDGE, RIGHT_OF_EDGE):
            raise InvalidArgumentError(f"unknown cloth_side '{self.cloth_side}'")


@lru_cache(maxsize=32)
def _cached_grid(height_px: int, width_px: int, mm_per_px: float):
    xs = (np.arange(width_px) - (width_px - 1) / 2.0) * mm_per_px
    ys = ((height_px - 1) / 2.0 - np.arange(height_px)) * mm_per_px
    X, Y = np.meshgrid(xs, ys)
    X.setflags(write=False)
    Y.setflags(write=False)
    return X, Y


def pixel_grid(height_px: int, width_px: int, mm_per_px: float) -> Tuple[np.ndarray, np.ndarray]:
    """Sensor-frame coordinates (mm) of every pixel centre; y points up, row 0 on top."""
    return _cached_grid(int(height_px), int(width_px), float(mm_per_px))


def _check_size(width_px: int, height_px: int, mm_per_px: float) -> None:
    if int(width_px) < 2 or int(height_px) < 2:
        raise InvalidArgumentError(f"image must be at least 2x2 px, got {width_px}x{height_px}")
    if not mm_per_px > 0:
        raise InvalidArgumentError(f"mm_per_px must be positive, got {mm_per_px}")


@dataclass(frozen=True)
class _TexturePattern:
    texture_id: str
    angle: float
    phase_u: float
    phase_v: float

    @classmethod
    def draw(cls, texture_id: str, rng: np.random.Generator) -> '_TexturePattern':
        return cls(
            texture_id=texture_id,
            angle=float(rng.uniform(0.0, math.pi)),
            phase_u=float(rng.uniform(0.0, 2 * math.pi)),
            phase_v=float(rng.uniform(0.0, 2 * math.pi)),
        )

    def evaluate(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Texture darkening in [0, 1] at cloth-frame coordinates."""
        if self.texture_id == TextureId.PLAIN.value:
            return np.zeros_like(X)
        c, s = math.cos(self.angle), math.sin(self.angle)
        u = X * c + Y * s
        v = -X * s + Y * c
        period = Config.TEXTURE_PERIOD_MM
        if self.texture_id == TextureId.STRIPES.value:
            return 0.5 * (1.0 + np.sin(2 * math.pi * u / period + self.phase_u))
        if self.texture_id == TextureId.WEAVE.value:
            return 0.25 * (2.0 + np.sin(2 * math.pi * u / period + self.phase_u)
                           + np.sin(2 * math.pi * v / period + self.phase_v))
        spacing = 1.2 * period
        uu = np.mod(u + self.phase_u * spacing / (2 * math.pi), spacing) - spacing / 2
        vv = np.mod(v + self.phase_v * spacing / (2 * math.pi), spacing) - spacing / 2
        return np.exp(-(uu ** 2 + vv ** 2) / (2 * Config.DOT_RADIUS_MM ** 2))


def blur_weight(signed_distance_mm: np.ndarray, softness_mm: float) -> np.ndarray:
    """Cloth weight across a boundary: Gaussian-CDF profile of the signed distance."""
    with np.errstate(invalid='ignore'):
        return 0.5 * (1.0 + erf(signed_distance_mm / (math.sqrt(2.0) * softness_mm)))


def _compose(
    weight: np.ndarray,
    texture: np.ndarray,
    params: RenderParams,
    rng: np.random.Generator,
) -> np.ndarray:
    contact = params.contact_intensity * (1.0 - params.texture_amplitude * texture)
    img = params.background_intensity + (contact - params.background_intensity) * weight
    if params.noise_sigma > 0:
        img = img + rng.normal(0.0, params.noise_sigma, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def _half_plane_distance(X, Y, pose: EdgePose, cloth_side: str, shift=(0.0, 0.0)) -> np.ndarray:
    n = pose.normal()
    d = (X - pose.x - shift[0]) * n[0] + (Y - pose.y - shift[1]) * n[1]
    return d if cloth_side == LEFT_OF_EDGE else -d


def _wedge_distance(X, Y, apex, bisector: float, opening: float, shift=(0.0, 0.0)) -> np.ndarray:
    h = opening / 2.0
    ax, ay = apex[0] + shift[0], apex[1] + shift[1]
    d1 = (X - ax) * math.sin(bisector + h) - (Y - ay) * math.cos(bisector + h)
    d2 = -(X - ax) * math.sin(bisector - h) + (Y - ay) * math.cos(bisector - h)
    return np.minimum(d1, d2)


def render_edge(
    ann: EdgeAnnotation,
    params: RenderParams,
    width_px: int = Config.IMAGE_WIDTH_PX,
    height_px: int = Config.IMAGE_HEIGHT_PX,
    mm_per_px: float = Config.MM_PER_PX,
) -> TactileImage:
    _check_size(width_px, height_px, mm_per_px)
    half_w, half_h = width_px * mm_per_px / 2.0, height_px * mm_per_px / 2.0
    if abs(ann.pose.x) > half_w or abs(ann.pose.y) > half_h:
        raise InvalidArgumentError(
            f"annotated pose ({ann.pose.x:.3f}, {ann.pose.y:.3f}) lies outside the "
            f"{2 * half_w:.2f} x {2 * half_h:.2f} mm image"
        )
    X, Y = pixel_grid(height_px, width_px, mm_per_px)
    rng = np.random.default_rng(params.seed)
    texture = _TexturePattern.draw(params.texture_id, rng).evaluate(X, Y)
    weight = blur_weight(_half_plane_distance(X, Y, ann.pose, ann.cloth_side), params.contact_softness_mm)
    return TactileImage(_compose(weight, texture, params, rng), mm_per_px)


@dataclass(frozen=True)
class ClassGeometry:
    """Final-frame contact layout of a synthetic grasp."""

    cls: ContactClass
    pose: Optional[EdgePose] = None
    cloth_side: str = LEFT_OF_EDGE
    apex: Tuple[float, float] = (0.0, 0.0)
    bisector: float = 0.0
    opening: float = math.pi / 2

    def distance(self, X, Y, shift=(0.0, 0.0)) -> np.ndarray:
        if self.cls == ContactClass.EDGE:
            return _half_plane_distance(X, Y, self.pose, self.cloth_side, shift)
        if self.cls == ContactClass.CORNER:
            return _wedge_distance(X, Y, self.apex, self.bisector, self.opening, shift)
        fill = np.inf if self.cls == ContactClass.IN_FABRIC else -np.inf
        return np.full_like(X, fill)


def sample_class_geometry(
    cls: ContactClass,
    rng: np.random.Generator,
    width_px: int,
    height_px: int,
    mm_per_px: float,
) -> ClassGeometry:
    short_side = min(width_px, height_px) * mm_per_px
    if cls == ContactClass.EDGE:
        theta = float(rng.uniform(-math.pi / 2, math.pi / 2))
        offset = float(rng.uniform(-0.17, 0.17)) * short_side
        side = LEFT_OF_EDGE if rng.random() < 0.5 else RIGHT_OF_EDGE
        normal = np.array([-math.sin(theta), math.cos(theta)])
        pose = EdgePose(offset * normal[0], offset * normal[1], theta).canonical()
        return ClassGeometry(cls, pose=pose, cloth_side=side)
    if cls == ContactClass.CORNER:
        apex = tuple(float(v) for v in rng.uniform(-0.06, 0.06, size=2) * short_side)
        bisector = float(rng.uniform(0.0, 2 * math.pi))
        opening = math.pi / 2 + float(rng.uniform(-1.0, 1.0)) * math.radians(10.0)
        pose = EdgePose(apex[0], apex[1], bisector + math.pi / 2).canonical()
        return ClassGeometry(cls, pose=pose, apex=apex, bisector=bisector, opening=opening)
    return ClassGeometry(cls)


def render_geometry_sequence(
    geometry: ClassGeometry,
    params: RenderParams,
    rng: np.random.Generator,
    width_px: int,
    height_px: int,
    mm_per_px: float,
    closure: bool = True,
) -> TactileSequence:
    """Frames of one contact geometry; texture follows params.seed, jitter and pixel noise come from rng."""
    _check_size(width_px, height_px, mm_per_px)
    X, Y = pixel_grid(height_px, width_px, mm_per_px)
    pattern = _TexturePattern.draw(params.texture_id, np.random.default_rng(params.seed))
    n = Config.SEQUENCE_LENGTH
    jitter_axis = Config.FRAME_JITTER_MM / math.sqrt(2.0)
    frames = []
    for k in range(n):
        last = k == n - 1
        shift = (0.0, 0.0) if last else tuple(rng.uniform(-jitter_axis, jitter_axis, size=2))
        strength = k / (n - 1) if closure else 1.0
        weight = strength * blur_weight(geometry.distance(X, Y, shift), params.contact_softness_mm)
        texture = pattern.evaluate(X - shift[0], Y - shift[1])
        frames.append(TactileImage(_compose(weight, texture, params, rng), mm_per_px))
    return TactileSequence(tuple(frames))


def render_class_sample(
    cls: ContactClass,
    params: RenderParams,
    seed: int,
    width_px: int = Config.IMAGE_WIDTH_PX,
    height_px: int = Config.IMAGE_HEIGHT_PX,
    mm_per_px: float = Config.MM_PER_PX,
    closure: bool = True,
) -> Tuple[TactileSequence, ContactClass]:
    """Five-frame grasp sequence ending in the class-characteristic footprint.

    With closure=True the contact strength ramps from none to full; with
    closure=False all frames show steady contact, as seen while sliding.
    """
    rng = np.random.default_rng(seed)
    geometry = sample_class_geometry(cls, rng, width_px, height_px, mm_per_px)
    seq = render_geometry_sequence(geometry, params, rng, width_px, height_px, mm_per_px, closure)
    return seq, cls


def _boundary_segments(geometry) -> np.ndarray:
    segs = []
    for part in getattr(geometry, 'geoms', [geometry]):
        if part.is_empty or part.geom_type not in ('LineString', 'LinearRing'):
            continue
        coords = np.asarray(part.coords)
        if coords.shape[0] >= 2:
            segs.append(np.stack([coords[:-1], coords[1:]], axis=1))
    return np.concatenate(segs) if segs else np.empty((0, 2, 2))


def _distance_to_segments(points: np.ndarray, segments: np.ndarray) -> np.ndarray:
    a = segments[:, 0, :]
    ab = segments[:, 1, :] - a
    length2 = np.maximum(np.einsum('ij,ij->i', ab, ab), 1e-18)
    rel = points[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum('nmj,mj->nm', rel, ab) / length2, 0.0, 1.0)
    closest = a[None, :, :] + t[..., None] * ab[None, :, :]
    return np.min(np.linalg.norm(points[:, None, :] - closest, axis=2), axis=1)


def render_observation(
    cloth: ClothEdge,
    fp: SensorFootprint,
    params: RenderParams,
    rng: np.random.Generator,
    width_px: int,
    height_px: int,
    mm_per_px: float,
) -> TactileImage:
    """Tactile frame of the true cloth region under a footprint.

    Texture is fixed to the cloth (drawn from params.seed); noise comes from rng.
    """
    _check_size(width_px, height_px, mm_per_px)
    X, Y = pixel_grid(height_px, width_px, mm_per_px)
    world = fp.sensor_to_world(np.column_stack([X.ravel(), Y.ravel()]))
    inside = shapely.contains_xy(cloth.polygon, world[:, 0], world[:, 1])

    reach = 0.5 * math.hypot(width_px, height_px) * mm_per_px + 4.0 * params.contact_softness_mm + 1.0
    cx, cy = fp.center
    window = shapely.box(cx - reach, cy - reach, cx + reach, cy + reach)
    segments = _boundary_segments(cloth.polygon.exterior.intersection(window))
    if segments.shape[0] == 0:
        signed = np.where(inside, np.inf, -np.inf)
    else:
        dist = _distance_to_segments(world, segments)
        signed = np.where(inside, dist, -dist)
    weight = blur_weight(signed.reshape(X.shape), params.contact_softness_mm)

    pattern = _TexturePattern.draw(params.texture_id, np.random.default_rng(params.seed))
    texture = pattern.evaluate(world[:, 0].reshape(X.shape), world[:, 1].reshape(X.shape))
    return TactileImage(_compose(weight, texture, params, rng), mm_per_px)


# ---------------------------------------------------------------------------
# Dataset generation and I/O
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoseRanges:
    x: Tuple[float, float] = (-3.0, 3.0)
    y: Tuple[float, float] = (-3.0, 3.0)
    theta: Tuple[float, float] = (-math.pi / 2 + 1e-9, math.pi / 2)

    def __post_init__(self) -> None:
        for name in ('x', 'y', 'theta'):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise InvalidArgumentError(f"pose range {name} is empty: [{lo}, {hi}]")

    def sample(self, rng: np.random.Generator) -> EdgePose:
        return EdgePose(
            float(rng.uniform(*self.x)),
            float(rng.uniform(*self.y)),
            float(rng.uniform(*self.theta)),
        )


@dataclass(frozen=True)
class ParamsDistribution:
    textures: Tuple[str, ...] = tuple(t.value for t in TextureId)
    amplitude: Tuple[float, float] = (0.0, 0.3)
    noise_sigma: Tuple[float, float] = (0.0, 0.05)
    softness_mm: Tuple[float, float] = (0.3, 1.0)

    def sample(self, rng: np.random.Generator) -> RenderParams:
        texture = self.textures[int(rng.integers(0, len(self.textures)))]
        amplitude = float(rng.uniform(*self.amplitude)) if texture != TextureId.PLAIN.value else 0.0
        noise = float(rng.uniform(*self.noise_sigma))
        return RenderParams(
            texture_id=texture,
            texture_amplitude=amplitude,
            contact_softness_mm=float(rng.uniform(*self.softness_mm)),
            noise_sigma=min(noise, 1.0 - amplitude),
            seed=int(rng.integers(0, 2 ** 31 - 1)),
        )


@dataclass
class LabeledSequence:
    sequence: TactileSequence
    cls: ContactClass
    pose: Optional[EdgePose] = None


@dataclass
class LabeledPose:
    image: TactileImage
    pose: EdgePose


@dataclass
class Dataset:
    sequences: List[LabeledSequence] = field(default_factory=list)
    poses: List[LabeledPose] = field(default_factory=list)
    mm_per_px: float = Config.MM_PER_PX


@dataclass(frozen=True)
class DatasetSummary:
    out_dir: str
    labels_path: str
    n_sequences: int
    n_pose_samples: int


def _class_job(cls: ContactClass, child: np.random.SeedSequence, dist, size, closure) -> LabeledSequence:
    rng = np.random.default_rng(child)
    params = dist.sample(rng)
    geometry = sample_class_geometry(cls, rng, *size)
    seq = render_geometry_sequence(geometry, params, rng, *size, closure=closure)
    return LabeledSequence(seq, cls, geometry.pose)


def _pose_job(child: np.random.SeedSequence, ranges: PoseRanges, dist, size) -> LabeledPose:
    rng = np.random.default_rng(child)
    params = dist.sample(rng)
    pose = ranges.sample(rng)
    side = LEFT_OF_EDGE if rng.random() < 0.5 else RIGHT_OF_EDGE
    image = render_edge(EdgeAnnotation(pose, side), params, *size)
    return LabeledPose(image, pose.canonical())


def synthesize_dataset(
    n_per_class: int,
    pose_ranges: PoseRanges = PoseRanges(),
    params_distribution: ParamsDistribution = ParamsDistribution(),
    seed: int = 0,
    width_px: int = Config.IMAGE_WIDTH_PX,
    height_px: int = Config.IMAGE_HEIGHT_PX,
    mm_per_px: float = Config.MM_PER_PX,
    n_pose_samples: Optional[int] = None,
    workers: int = 1,
) -> Dataset:
    """In-memory labelled dataset; each sample owns a spawned seed so sharding never changes output."""
    if int(n_per_class) < 1:
        raise InvalidArgumentError(f"n_per_class must be >= 1, got {n_per_class}")
    n_pose = int(n_per_class if n_pose_samples is None else n_pose_samples)
    size = (int(width_px), int(height_px), float(mm_per_px))
    _check_size(*size)
    children = np.random.SeedSequence(int(seed)).spawn(len(CLASS_ORDER) * n_per_class + n_pose)

    jobs = []
    for c, cls in enumerate(CLASS_ORDER):
        for i in range(n_per_class):
            child = children[c * n_per_class + i]
            jobs.append((_class_job, (cls, child, params_distribution, size, i % 2 == 0)))
    offset = len(CLASS_ORDER) * n_per_class
    for i in range(n_pose):
        jobs.append((_pose_job, (children[offset + i], pose_ranges, params_distribution, size)))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: job[0](*job[1]), jobs))
    else:
        results = [fn(*args) for fn, args in jobs]
    return Dataset(
        sequences=[r for r in results if isinstance(r, LabeledSequence)],
        poses=[r for r in results if isinstance(r, LabeledPose)],
        mm_per_px=float(mm_per_px),
    )


def write_pgm(image: TactileImage, path: str) -> None:
    levels = np.rint(image.pixels * 255.0).astype(np.uint8)
    Image.fromarray(levels).save(path, format='PPM')


def read_pgm(path: str, mm_per_px: float) -> TactileImage:
    with Image.open(path) as img:
        if img.mode != 'L':
            raise InvalidDatasetError(f"{path} is not an 8-bit grayscale PGM")
        levels = np.asarray(img, dtype=float)
    return TactileImage(levels / 255.0, mm_per_px)


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _pose_fields(pose: Optional[EdgePose]) -> List[str]:
    if pose is None:
        return ['', '', '']
    return [_fmt(pose.x), _fmt(pose.y), _fmt(pose.theta)]


def write_dataset(dataset: Dataset, out_dir: str, seed: Optional[int] = None) -> DatasetSummary:
    labels_path = os.path.join(out_dir, LABELS_FILE)
    try:
        os.makedirs(os.path.join(out_dir, 'seq'), exist_ok=True)
        os.makedirs(os.path.join(out_dir, 'pose'), exist_ok=True)
        rows = []
        counters = {cls: 0 for cls in CLASS_ORDER}
        for item in dataset.sequences:
            stem = f"seq/{item.cls.value}_{counters[item.cls]:05d}"
            counters[item.cls] += 1
            for k, frame in enumerate(item.sequence.frames):
                write_pgm(frame, os.path.join(out_dir, f"{stem}_f{k}.pgm"))
            rows.append([stem] + _pose_fields(item.pose) + [item.cls.value])
        for i, item in enumerate(dataset.poses):
            name = f"pose/pose_{i:05d}.pgm"
            write_pgm(item.image, os.path.join(out_dir, name))
            rows.append([name] + _pose_fields(item.pose) + [ContactClass.EDGE.value])
        with open(labels_path, 'w', newline='', encoding='utf-8') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(LABEL_HEADER)
            writer.writerows(rows)
        first = dataset.poses[0].image if dataset.poses else dataset.sequences[0].sequence.last
        meta = {
            'version': 1,
            'mm_per_px': dataset.mm_per_px,
            'width_px': first.width_px,
            'height_px': first.height_px,
            'seed': seed,
            'n_sequences': len(dataset.sequences),
            'n_pose_samples': len(dataset.poses),
        }
        with open(os.path.join(out_dir, META_FILE), 'w', encoding='utf-8') as handle:
            json.dump(meta, handle, indent=2, sort_keys=True)
            handle.write('\n')
    except OSError as exc:
        raise DatasetWriteError(f"cannot write dataset to '{out_dir}': {exc}") from exc
    logger.info("Wrote %d sequences and %d pose samples to %s",
                len(dataset.sequences), len(dataset.poses), out_dir)
    return DatasetSummary(out_dir, labels_path, len(dataset.sequences), len(dataset.poses))


def generate_dataset(
    out_dir: str,
    n_per_class: int,
    pose_ranges: PoseRanges = PoseRanges(),
    params_distribution: ParamsDistribution = ParamsDistribution(),
    seed: int = 0,
    width_px: int = Config.IMAGE_WIDTH_PX,
    height_px: int = Config.IMAGE_HEIGHT_PX,
    mm_per_px: float = Config.MM_PER_PX,
    n_pose_samples: Optional[int] = None,
    workers: int = 1,
) -> DatasetSummary:
    dataset = synthesize_dataset(
        n_per_class, pose_ranges, params_distribution, seed,
        width_px, height_px, mm_per_px, n_pose_samples, workers,
    )
    if dataset.poses:
        _log_fidelity(dataset.poses[0], width_px, height_px, mm_per_px)
    return write_dataset(dataset, out_dir, seed)


def _log_fidelity(sample: LabeledPose, width_px: int, height_px: int, mm_per_px: float) -> None:
    from src.metrics import fidelity_report

    reference = render_edge(EdgeAnnotation(sample.pose), RenderParams(), width_px, height_px, mm_per_px)
    report = fidelity_report(reference, sample.image)
    if report['ssim'] < 0:
        # opposite cloth side: compare against the mirrored reference
        reference = render_edge(EdgeAnnotation(sample.pose, RIGHT_OF_EDGE), RenderParams(),
                                width_px, height_px, mm_per_px)
        report = fidelity_report(reference, sample.image)
    logger.info("Render fidelity vs. noiseless reference: mse=%.5f ssim=%.4f", report['mse'], report['ssim'])


def _parse_pose(row: dict, path: str) -> Optional[EdgePose]:
    fields_ = [row.get('x_mm', ''), row.get('y_mm', ''), row.get('theta_rad', '')]
    if all(f == '' for f in fields_):
        return None
    try:
        return EdgePose(*(float(f) for f in fields_))
    except ValueError:
        raise InvalidDatasetError(f"{path}: unparseable pose in row for '{row.get('file')}'") from None


def load_dataset(path: str) -> Dataset:
    """Read a dataset written by write_dataset."""
    labels_path = os.path.join(path, LABELS_FILE)
    if not os.path.isfile(labels_path):
        raise FileNotFoundError(f"no {LABELS_FILE} under '{path}'")
    mm_per_px = Config.MM_PER_PX
    meta_path = os.path.join(path, META_FILE)
    if os.path.isfile(meta_path):
        try:
            with open(meta_path, 'r', encoding='utf-8') as handle:
                mm_per_px = float(json.load(handle)['mm_per_px'])
        except (ValueError, KeyError, TypeError) as exc:
            raise InvalidDatasetError(f"{meta_path}: {exc}") from None

    dataset = Dataset(mm_per_px=mm_per_px)
    with open(labels_path, 'r', newline='', encoding='utf-8') as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != LABEL_HEADER:
            raise InvalidDatasetError(f"{labels_path}: header must be {','.join(LABEL_HEADER)}")
        for row in reader:
            try:
                cls = ContactClass(row['class'])
            except ValueError:
                raise InvalidDatasetError(f"{labels_path}: unknown class '{row['class']}'") from None
            pose = _parse_pose(row, labels_path)
            name = row['file']
            try:
                if name.startswith('seq/'):
                    frames = tuple(
                        read_pgm(os.path.join(path, f"{name}_f{k}.pgm"), mm_per_px)
                        for k in range(Config.SEQUENCE_LENGTH)
                    )
                    dataset.sequences.append(LabeledSequence(TactileSequence(frames), cls, pose))
                elif name.startswith('pose/'):
                    if pose is None:
                        raise InvalidDatasetError(f"{labels_path}: pose sample '{name}' has no pose")
                    dataset.poses.append(LabeledPose(read_pgm(os.path.join(path, name), mm_per_px), pose))
                else:
                    raise InvalidDatasetError(f"{labels_path}: unrecognised file entry '{name}'")
            except (OSError, InvalidArgumentError) as exc:
                raise InvalidDatasetError(f"{labels_path}: cannot load '{name}': {exc}") from None
    logger.info("Loaded %d sequences and %d pose samples from %s",
                len(dataset.sequences), len(dataset.poses), path)
    return dataset
