from __future__ import annotations

"""Two-finger end-effector: rail carriages, abduction joints, grasp depth.

End-effector frame: x along the rail, y along the fingers at zero
abduction. Carriage positions are measured from the rail centre.
"""

import csv
import logging
import math
import os
import sys
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
from PIL import Image

from src.common import SensorFootprint, rotation
from src.errors import DatasetWriteError, InvalidArgumentError, InvalidStateError

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

_STATE_TOL = 1e-9


@dataclass(frozen=True)
class GripperConfig:
    rail_span_mm: float = Config.RAIL_SPAN_MM
    finger_length_mm: float = Config.FINGER_LENGTH_MM
    abduction_range_rad: float = Config.ABDUCTION_RANGE_RAD
    actuator_time_constant_s: float = Config.ACTUATOR_TIME_CONSTANT_S
    position_noise_mm: float = Config.POSITION_NOISE_MM
    depth_range_mm: float = Config.DEPTH_RANGE_MM

    def __post_init__(self) -> None:
        if not self.rail_span_mm > 0:
            raise InvalidArgumentError(f"rail_span_mm must be > 0, got {self.rail_span_mm}")
        if not self.finger_length_mm > 0:
            raise InvalidArgumentError(f"finger_length_mm must be > 0, got {self.finger_length_mm}")
        if not 0 < self.abduction_range_rad <= math.pi / 2:
            raise InvalidArgumentError(
                f"abduction_range_rad must be in (0, pi/2], got {self.abduction_range_rad}"
            )
        if not self.actuator_time_constant_s > 0:
            raise InvalidArgumentError("actuator_time_constant_s must be > 0")
        if self.position_noise_mm < 0 or self.depth_range_mm < 0:
            raise InvalidArgumentError("position_noise_mm and depth_range_mm must be >= 0")

    @property
    def half_span(self) -> float:
        return self.rail_span_mm / 2.0


@dataclass(frozen=True)
class GripperState:
    """Joint positions plus the end-effector pose in the world (mm, rad).

    Depth is the grasp-closure travel of each finger; hold flags record
    which finger clamps the cloth and which one slides.
    """

    left_pos_mm: float
    right_pos_mm: float
    left_ab_rad: float = 0.0
    right_ab_rad: float = 0.0
    yaw_rad: float = 0.0
    base_xy_mm: Tuple[float, float] = (0.0, 0.0)
    left_depth_mm: float = 0.0
    right_depth_mm: float = 0.0
    left_hold: bool = True
    right_hold: bool = False

    def validate(self, cfg: GripperConfig) -> 'GripperState':
        if self.left_pos_mm > self.right_pos_mm + _STATE_TOL:
            raise InvalidStateError(
                f"carriages crossed: left {self.left_pos_mm:.3f} > right {self.right_pos_mm:.3f}"
            )
        for name in ('left_pos_mm', 'right_pos_mm'):
            if abs(getattr(self, name)) > cfg.half_span + _STATE_TOL:
                raise InvalidStateError(f"{name} = {getattr(self, name):.3f} outside the rail")
        for name in ('left_ab_rad', 'right_ab_rad'):
            if abs(getattr(self, name)) > cfg.abduction_range_rad + _STATE_TOL:
                raise InvalidStateError(f"{name} = {getattr(self, name):.4f} beyond the abduction range")
        values = [self.left_pos_mm, self.right_pos_mm, self.left_ab_rad, self.right_ab_rad,
                  self.yaw_rad, *self.base_xy_mm, self.left_depth_mm, self.right_depth_mm]
        if not all(math.isfinite(v) for v in values):
            raise InvalidStateError("gripper state must be finite")
        return self

    def as_dict(self) -> Dict[str, object]:
        return {
            'left_pos_mm': self.left_pos_mm,
            'right_pos_mm': self.right_pos_mm,
            'left_ab_rad': self.left_ab_rad,
            'right_ab_rad': self.right_ab_rad,
            'yaw_rad': self.yaw_rad,
            'base_x_mm': self.base_xy_mm[0],
            'base_y_mm': self.base_xy_mm[1],
            'left_depth_mm': self.left_depth_mm,
            'right_depth_mm': self.right_depth_mm,
            'left_hold': self.left_hold,
            'right_hold': self.right_hold,
        }


@dataclass(frozen=True)
class ActuatorCommands:
    """Per-axis position targets; None keeps the axis where it is."""

    left_pos_mm: Optional[float] = None
    right_pos_mm: Optional[float] = None
    left_ab_rad: Optional[float] = None
    right_ab_rad: Optional[float] = None
    left_depth_mm: Optional[float] = None
    right_depth_mm: Optional[float] = None


def first_order_lag(position: float, target: float, dt: float, tau: float) -> float:
    return position + (target - position) * (1.0 - math.exp(-dt / tau))


@dataclass(frozen=True)
class ActuatorPlant:
    """Single lagged position axis with optional saturation."""

    time_constant_s: float = Config.ACTUATOR_TIME_CONSTANT_S
    lower: float = -math.inf
    upper: float = math.inf

    def step(self, position: float, target: float, dt: float) -> float:
        if dt <= 0:
            raise InvalidArgumentError(f"dt must be > 0, got {dt}")
        moved = first_order_lag(position, target, dt, self.time_constant_s)
        return min(max(moved, self.lower), self.upper)


def finger_sensor_local(cfg: GripperConfig, pos_mm: float, ab_rad: float, depth_mm: float = 0.0) -> np.ndarray:
    reach = cfg.finger_length_mm + depth_mm
    return np.array([pos_mm + reach * math.sin(ab_rad), reach * math.cos(ab_rad)])


def forward_kinematics(cfg: GripperConfig, state: GripperState) -> Tuple[SensorFootprint, SensorFootprint]:
    state.validate(cfg)
    R = rotation(state.yaw_rad)
    base = np.asarray(state.base_xy_mm, dtype=float)
    footprints = []
    for pos, ab, depth in ((state.left_pos_mm, state.left_ab_rad, state.left_depth_mm),
                           (state.right_pos_mm, state.right_ab_rad, state.right_depth_mm)):
        center = R @ finger_sensor_local(cfg, pos, ab, depth) + base
        footprints.append(SensorFootprint(center=(float(center[0]), float(center[1])),
                                          heading=state.yaw_rad + ab))
    return footprints[0], footprints[1]


def step_actuators(
    cfg: GripperConfig,
    state: GripperState,
    commands: ActuatorCommands,
    dt: float,
) -> GripperState:
    """Advance every commanded axis through its lag, saturating at the joint limits."""
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be > 0, got {dt}")
    rail = ActuatorPlant(cfg.actuator_time_constant_s, -cfg.half_span, cfg.half_span)
    joint = ActuatorPlant(cfg.actuator_time_constant_s, -cfg.abduction_range_rad, cfg.abduction_range_rad)
    depth = ActuatorPlant(cfg.actuator_time_constant_s, -cfg.depth_range_mm, cfg.depth_range_mm)

    def axis(plant: ActuatorPlant, name: str) -> float:
        current = getattr(state, name)
        target = getattr(commands, name)
        if target is None:
            return current
        return plant.step(current, target, dt)

    left = axis(rail, 'left_pos_mm')
    right = axis(rail, 'right_pos_mm')
    if left > right:
        # carriages share one rail; the moving one stops at the other
        if commands.left_pos_mm is not None:
            left = right
        else:
            right = left
    return replace(
        state,
        left_pos_mm=left,
        right_pos_mm=right,
        left_ab_rad=axis(joint, 'left_ab_rad'),
        right_ab_rad=axis(joint, 'right_ab_rad'),
        left_depth_mm=axis(depth, 'left_depth_mm'),
        right_depth_mm=axis(depth, 'right_depth_mm'),
    )


def read_encoders(cfg: GripperConfig, state: GripperState, rng: np.random.Generator) -> GripperState:
    """Measured joint state: true positions plus Gaussian encoder noise."""
    sigma = cfg.position_noise_mm
    if sigma <= 0:
        return state
    noise = rng.normal(0.0, sigma, size=6)
    return replace(
        state,
        left_pos_mm=state.left_pos_mm + noise[0],
        right_pos_mm=state.right_pos_mm + noise[1],
        left_ab_rad=state.left_ab_rad + noise[2] / cfg.finger_length_mm,
        right_ab_rad=state.right_ab_rad + noise[3] / cfg.finger_length_mm,
        left_depth_mm=state.left_depth_mm + noise[4],
        right_depth_mm=state.right_depth_mm + noise[5],
    )


# ---------------------------------------------------------------------------
# Workspace
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FingerWorkspace:
    name: str
    occupancy: np.ndarray
    area_mm2: float


@dataclass(frozen=True, eq=False)
class WorkspaceResult:
    fingers: Tuple[FingerWorkspace, FingerWorkspace]
    origin_mm: Tuple[float, float]
    resolution_mm: float
    abduction_range_rad: float

    @property
    def area_mm2(self) -> float:
        return sum(f.area_mm2 for f in self.fingers)

    @property
    def occupancy(self) -> np.ndarray:
        return self.fingers[0].occupancy | self.fingers[1].occupancy


def _reachable(x: np.ndarray, y: np.ndarray, carriage: Tuple[float, float], length: float, reach: float) -> np.ndarray:
    """Points reachable as carriage + length*(sin a, cos a) with |a| <= reach."""
    lo, hi = carriage
    valid = (y >= length * math.cos(reach)) & (y <= length)
    side = np.sqrt(np.clip(length ** 2 - y ** 2, 0.0, None))
    plus = (x - side >= lo) & (x - side <= hi)
    minus = (x + side >= lo) & (x + side <= hi)
    return valid & (plus | minus)


def compute_workspace(
    cfg: GripperConfig,
    resolution_mm: float = Config.WORKSPACE_RESOLUTION_MM,
    abduction_range_rad: Optional[float] = None,
) -> WorkspaceResult:
    """Rasterise the sensor-centre workspace of each finger.

    Each finger drives its own half of the rail. Area comes from 4x4
    supersampled membership per cell; the occupancy grid additionally marks
    every cell touched by a dense (carriage, abduction) sweep so that the
    zero-abduction baseline still shows up as a line.
    ``abduction_range_rad`` overrides the configured range, 0 included.
    """
    if not 0.5 <= resolution_mm <= 5.0:
        raise InvalidArgumentError(f"resolution_mm must be in [0.5, 5], got {resolution_mm}")
    reach = cfg.abduction_range_rad if abduction_range_rad is None else float(abduction_range_rad)
    if not 0.0 <= reach <= math.pi / 2:
        raise InvalidArgumentError(f"abduction range must be in [0, pi/2], got {reach}")
    length = cfg.finger_length_mm
    lateral = length * math.sin(reach)
    x0 = -cfg.half_span - lateral - resolution_mm
    y0 = length * math.cos(reach) - resolution_mm
    cols = int(math.ceil((cfg.rail_span_mm + 2 * lateral + 2 * resolution_mm) / resolution_mm)) + 1
    rows = int(math.ceil((length - y0 + resolution_mm) / resolution_mm)) + 1

    sub = (np.arange(4) + 0.5) / 4.0
    sx = (x0 + (np.arange(cols)[:, None] + sub[None, :]) * resolution_mm).ravel()
    sy = (y0 + (np.arange(rows)[:, None] + sub[None, :]) * resolution_mm).ravel()
    SX, SY = np.meshgrid(sx, sy)

    n_pos = max(2, int(math.ceil(cfg.half_span / (0.25 * resolution_mm))) + 1)
    n_ab = max(2, int(math.ceil(2 * reach * length / (0.25 * resolution_mm))) + 1)
    fingers = []
    for name, carriage in (('left', (-cfg.half_span, 0.0)), ('right', (0.0, cfg.half_span))):
        inside = _reachable(SX, SY, carriage, length, reach)
        fraction = inside.reshape(rows, 4, cols, 4).mean(axis=(1, 3))
        area = float(fraction.sum() * resolution_mm ** 2)

        P, A = np.meshgrid(np.linspace(*carriage, n_pos), np.linspace(-reach, reach, n_ab))
        px = P + length * np.sin(A)
        py = length * np.cos(A)
        ci = np.clip(((px - x0) / resolution_mm).astype(int), 0, cols - 1)
        ri = np.clip(((py - y0) / resolution_mm).astype(int), 0, rows - 1)
        occupancy = fraction > 0
        occupancy[ri.ravel(), ci.ravel()] = True
        # row 0 of the stored grid is the far edge of the workspace
        fingers.append(FingerWorkspace(name, occupancy[::-1].copy(), area))
        logger.debug("workspace %s finger: %.1f mm^2", name, area)
    result = WorkspaceResult(tuple(fingers), (x0, y0), float(resolution_mm), reach)
    logger.info("Workspace at abduction range %.1f deg: %.1f mm^2",
                math.degrees(reach), result.area_mm2)
    return result


def write_workspace_pgm(result: WorkspaceResult, path: str) -> None:
    levels = np.where(result.occupancy, 255, 0).astype(np.uint8)
    try:
        Image.fromarray(levels).save(path, format='PPM')
    except OSError as exc:
        raise DatasetWriteError(f"cannot write workspace image '{path}': {exc}") from exc


def write_workspace_csv(rows: List[Tuple[str, float]], path: str) -> None:
    try:
        with open(path, 'w', newline='', encoding='utf-8') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(['config', 'area_mm2'])
            for name, area in rows:
                writer.writerow([name, f"{area:.3f}"])
    except OSError as exc:
        raise DatasetWriteError(f"cannot write workspace summary '{path}': {exc}") from exc
