from __future__ import annotations

"""Closed-loop edge sliding: one finger holds a corner, the other slides.

Each control tick renders what both sensors see, classifies the last five
frames per finger, aligns the sliding finger to the estimated edge and
advances the end-effector until both fingers report a corner.
"""

import csv
import json
import logging
import math
import os
import sys
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np
from shapely.geometry import Point

from src.cloth_world import ClothEdge, make_crumpled, make_flattened, point_along_boundary
from src.common import ContactClass, EdgePose, SensorFootprint, rotation
from src.control import ControlGains, servo_substeps
from src.errors import InvalidArgumentError, InvalidModelError, InvalidTransitionError
from src.gripper import (
    ActuatorCommands,
    GripperConfig,
    GripperState,
    finger_sensor_local,
    forward_kinematics,
    read_encoders,
    step_actuators,
)
from src.perception import (
    ClassifierModel,
    RegressorModel,
    classify_features,
    estimate_pose,
    frame_features,
    sequence_features,
)
from src.tactile_render import RenderParams, TactileImage, render_observation

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

Renderer = Callable[..., TactileImage]

CONFIGURATIONS = ('flattened', 'crumpled')


class SlidingPhase(Enum):
    GRASP_CORNER = 'GraspCorner'
    SLIDE = 'Slide'
    CORRECT_SHALLOW = 'CorrectShallow'
    CORRECT_DEEP = 'CorrectDeep'
    REACHED_CORNER = 'ReachedCorner'
    FAILED = 'Failed'

    @property
    def terminal(self) -> bool:
        return self in (SlidingPhase.REACHED_CORNER, SlidingPhase.FAILED)


@dataclass(frozen=True)
class SlideAction:
    """Discrete command issued on a phase transition."""

    kind: str
    rotate_deg: float = 0.0
    depth_mm: float = 0.0


CONTINUE = SlideAction('continue')
STOP = SlideAction('stop')
HOLD = SlideAction('hold')


def classify_and_transition(
    phase: SlidingPhase,
    cls_moving: ContactClass,
    cls_fixed: ContactClass,
    elapsed_s: float = 0.0,
    max_duration_s: float = math.inf,
    action_complete: bool = True,
    rotation_deg: float = Config.CORRECTION_ROTATION_DEG,
    depth_mm: float = Config.CORRECTION_DEPTH_MM,
) -> Tuple[SlidingPhase, SlideAction]:
    """Next sliding phase and the discrete action to take.

    InFabric means the finger is in too deep: rotate clockwise and withdraw.
    GraspFailure means too shallow: rotate counter-clockwise and insert.
    """
    if phase.terminal:
        raise InvalidTransitionError(f"no transition out of terminal phase {phase.value}")
    if elapsed_s > max_duration_s:
        return SlidingPhase.FAILED, STOP

    if phase == SlidingPhase.GRASP_CORNER:
        if cls_fixed == ContactClass.CORNER:
            return SlidingPhase.SLIDE, CONTINUE
        return phase, HOLD
    if phase in (SlidingPhase.CORRECT_SHALLOW, SlidingPhase.CORRECT_DEEP):
        return (SlidingPhase.SLIDE, CONTINUE) if action_complete else (phase, HOLD)

    if cls_moving == ContactClass.IN_FABRIC:
        return SlidingPhase.CORRECT_SHALLOW, SlideAction('withdraw', -rotation_deg, -depth_mm)
    if cls_moving == ContactClass.GRASP_FAILURE:
        return SlidingPhase.CORRECT_DEEP, SlideAction('insert', rotation_deg, depth_mm)
    if cls_moving == ContactClass.CORNER and cls_fixed == ContactClass.CORNER:
        return SlidingPhase.REACHED_CORNER, STOP
    return SlidingPhase.SLIDE, CONTINUE


@dataclass(frozen=True, eq=False)
class EpisodeConfig:
    cloth: ClothEdge
    configuration: str = 'flattened'
    render_params: RenderParams = RenderParams()
    slide_speed_mm_s: float = Config.SLIDE_SPEED_MM_S
    control_rate_hz: float = Config.CONTROL_RATE_HZ
    max_duration_s: float = Config.MAX_DURATION_S
    correction_rotation_deg: float = Config.CORRECTION_ROTATION_DEG
    correction_depth_mm: float = Config.CORRECTION_DEPTH_MM
    seed: int = 0
    gripper: GripperConfig = GripperConfig()
    start_offset_mm: float = Config.START_OFFSET_MM
    carriage_offset_mm: float = Config.CARRIAGE_OFFSET_MM
    label: str = ''

    def __post_init__(self) -> None:
        if self.configuration not in CONFIGURATIONS:
            raise InvalidArgumentError(f"configuration must be one of {CONFIGURATIONS}, got '{self.configuration}'")
        if not 10.0 <= self.control_rate_hz <= 200.0:
            raise InvalidArgumentError(f"control_rate_hz must be in [10, 200], got {self.control_rate_hz}")
        if not self.max_duration_s > 0:
            raise InvalidArgumentError(f"max_duration_s must be > 0, got {self.max_duration_s}")
        if self.slide_speed_mm_s <= 0:
            raise InvalidArgumentError(f"slide_speed_mm_s must be > 0, got {self.slide_speed_mm_s}")
        if len(self.cloth.corner_indices) != 4:
            raise InvalidArgumentError("episode cloth must have four structural corners")

    @property
    def dt(self) -> float:
        return 1.0 / self.control_rate_hz


@dataclass(frozen=True)
class TrajectoryPoint:
    t: float
    phase: SlidingPhase
    class_moving: ContactClass
    class_fixed: ContactClass
    ey_mm: Optional[float]
    etheta_rad: Optional[float]
    u_yaw_deg: float
    u_ab_deg: float
    state: GripperState
    pose_estimate: Optional[EdgePose] = None

    def as_dict(self) -> Dict[str, object]:
        record = {
            't': round(self.t, 9),
            'phase': self.phase.value,
            'class_moving': self.class_moving.value,
            'class_fixed': self.class_fixed.value,
            'ey_mm': self.ey_mm,
            'etheta_rad': self.etheta_rad,
            'u_yaw_deg': self.u_yaw_deg,
            'u_ab_deg': self.u_ab_deg,
        }
        record.update(self.state.as_dict())
        return record


@dataclass
class TrialResult:
    success: bool
    duration_s: float
    final_phase: SlidingPhase
    trajectory: List[TrajectoryPoint] = field(default_factory=list)
    correction_counts: Dict[str, int] = field(default_factory=lambda: {'shallow': 0, 'deep': 0})
    reached_true_corner: bool = False

    @property
    def corrections(self) -> int:
        return sum(self.correction_counts.values())


class _FrameBuffer:
    """Last five per-frame feature vectors; the first frame pads an empty buffer."""

    def __init__(self) -> None:
        self._features: Deque[np.ndarray] = deque(maxlen=Config.SEQUENCE_LENGTH)

    def push(self, img: TactileImage) -> np.ndarray:
        feats = frame_features(img)
        if not self._features:
            self._features.extend([feats] * (Config.SEQUENCE_LENGTH - 1))
        self._features.append(feats)
        return sequence_features(list(self._features))


def _check_models(classifier, regressor) -> None:
    if not isinstance(classifier, ClassifierModel):
        raise InvalidModelError("run_episode needs a trained classifier model")
    if not isinstance(regressor, RegressorModel):
        raise InvalidModelError("run_episode needs a trained regressor model")
    for name, arr in (('classifier', classifier.weights), ('regressor', regressor.weights)):
        if arr.size == 0 or not np.all(np.isfinite(arr)):
            raise InvalidModelError(f"{name} parameters are missing or not finite")


def initial_state(cfg: EpisodeConfig) -> Tuple[GripperState, SensorFootprint]:
    """Moving finger on the edge near corner 0, fixed finger clamped on corner 0."""
    corner_point, corner_heading = point_along_boundary(cfg.cloth, 0, 0.0)
    fixed = SensorFootprint(center=(float(corner_point[0]), float(corner_point[1])), heading=corner_heading)
    start, heading = point_along_boundary(cfg.cloth, 0, cfg.start_offset_mm)
    local = finger_sensor_local(cfg.gripper, cfg.carriage_offset_mm, 0.0)
    base = start - rotation(heading) @ local
    state = GripperState(
        left_pos_mm=-cfg.carriage_offset_mm,
        right_pos_mm=cfg.carriage_offset_mm,
        yaw_rad=heading,
        base_xy_mm=(float(base[0]), float(base[1])),
    )
    return state, fixed


def _reached_far_corner(cloth: ClothEdge, fp: SensorFootprint) -> bool:
    poly = fp.polygon()
    return any(poly.contains(Point(c)) for c in cloth.corners[1:])


def run_episode(
    cfg: EpisodeConfig,
    classifier: ClassifierModel,
    regressor: RegressorModel,
    gains: ControlGains = ControlGains(),
    renderer: Renderer = render_observation,
) -> TrialResult:
    """Simulate one sliding trial; deterministic given cfg.seed.

    Control reads only rendered frames and encoder readings. The base
    advances along the end-effector heading; the yaw loop steers it onto the
    edge and yaw unloading moves accumulated abduction into yaw. The depth
    and abduction PIDs run at the servo rate, several steps per tick.
    Both footprints take the regressor's image extent.
    """
    _check_models(classifier, regressor)
    dt = cfg.dt
    servo_count, servo_dt = servo_substeps(dt)
    size = (regressor.width_px, regressor.height_px, regressor.mm_per_px)
    extent = {'width_mm': regressor.width_px * regressor.mm_per_px,
              'height_mm': regressor.height_px * regressor.mm_per_px}
    streams = np.random.SeedSequence(int(cfg.seed)).spawn(3)
    rng_moving, rng_fixed, rng_encoder = (np.random.default_rng(s) for s in streams)
    params = cfg.render_params.with_seed(int(streams[0].generate_state(1)[0]))

    state, fixed_fp = initial_state(cfg)
    fixed_fp = replace(fixed_fp, **extent)
    alignment = gains.alignment()
    ab_pid = gains.abduction_pid()
    depth_pid = gains.grasp_pid()
    ab_setpoint = 0.0
    depth_setpoint = 0.0
    buffers = (_FrameBuffer(), _FrameBuffer())

    phase = SlidingPhase.GRASP_CORNER
    result = TrialResult(success=False, duration_s=0.0, final_phase=phase)
    correction_ticks = 0
    t = 0.0
    moving_fp = replace(forward_kinematics(cfg.gripper, state)[1], **extent)
    while not phase.terminal:
        t += dt
        moving_fp = replace(forward_kinematics(cfg.gripper, state)[1], **extent)
        obs_moving = renderer(cfg.cloth, moving_fp, params, rng_moving, *size)
        obs_fixed = renderer(cfg.cloth, fixed_fp, params, rng_fixed, *size)
        cls_moving, _ = classify_features(classifier, buffers[0].push(obs_moving))
        cls_fixed, _ = classify_features(classifier, buffers[1].push(obs_fixed))
        measured = read_encoders(cfg.gripper, state, rng_encoder)

        settled = abs(depth_setpoint - measured.right_depth_mm) <= Config.SETTLE_TOLERANCE_MM
        previous = phase
        phase, action = classify_and_transition(
            phase, cls_moving, cls_fixed, t, cfg.max_duration_s,
            action_complete=settled or correction_ticks >= Config.MAX_CORRECTION_TICKS,
            rotation_deg=cfg.correction_rotation_deg,
            depth_mm=cfg.correction_depth_mm,
        )

        yaw = state.yaw_rad
        if action.kind in ('withdraw', 'insert'):
            result.correction_counts['shallow' if action.kind == 'withdraw' else 'deep'] += 1
            yaw += math.radians(action.rotate_deg)
            depth_setpoint = float(np.clip(depth_setpoint + action.depth_mm,
                                           -cfg.gripper.depth_range_mm, cfg.gripper.depth_range_mm))
            correction_ticks = 0
            alignment.reset()
        correction_ticks += 1 if phase in (SlidingPhase.CORRECT_SHALLOW, SlidingPhase.CORRECT_DEEP) else 0

        ey = etheta = None
        u_yaw = u_ab = 0.0
        pose = None
        if phase == SlidingPhase.SLIDE and cls_moving == ContactClass.EDGE:
            pose = estimate_pose(regressor, obs_moving)
            ey, etheta = pose.y, pose.theta
            u_yaw, u_ab = alignment.update(ey, etheta, dt)
            yaw += math.radians(u_yaw) * dt
            ab_setpoint = float(np.clip(ab_setpoint + math.radians(u_ab) * dt,
                                        -cfg.gripper.abduction_range_rad, cfg.gripper.abduction_range_rad))
        yaw += Config.YAW_UNLOAD_GAIN * measured.right_ab_rad * dt

        base = np.asarray(state.base_xy_mm, dtype=float)
        if phase == SlidingPhase.SLIDE and previous != SlidingPhase.GRASP_CORNER:
            base = base + cfg.slide_speed_mm_s * dt * np.array([math.cos(yaw), math.sin(yaw)])

        state = replace(state, yaw_rad=yaw, base_xy_mm=(float(base[0]), float(base[1])))
        for _ in range(servo_count):
            commands = ActuatorCommands(
                right_ab_rad=ab_pid.update(ab_setpoint - measured.right_ab_rad, servo_dt),
                right_depth_mm=depth_pid.update(depth_setpoint - measured.right_depth_mm, servo_dt),
            )
            state = step_actuators(cfg.gripper, state, commands, servo_dt)
            measured = read_encoders(cfg.gripper, state, rng_encoder)
        result.trajectory.append(TrajectoryPoint(
            t=t, phase=phase, class_moving=cls_moving, class_fixed=cls_fixed,
            ey_mm=ey, etheta_rad=etheta, u_yaw_deg=u_yaw, u_ab_deg=u_ab,
            state=state, pose_estimate=pose,
        ))
        if phase != previous:
            logger.debug("t=%.3f %s -> %s (moving %s, fixed %s)", t, previous.value, phase.value,
                         cls_moving.value, cls_fixed.value)

    result.final_phase = phase
    result.success = phase == SlidingPhase.REACHED_CORNER
    result.duration_s = t
    result.reached_true_corner = _reached_far_corner(cfg.cloth, moving_fp)
    logger.info("Episode seed %d finished: %s after %.2f s, corrections %s",
                cfg.seed, phase.value, t, result.correction_counts)
    if result.success and not result.reached_true_corner:
        logger.warning("Episode seed %d reported %s at t=%.2f s but no far corner lies under the moving sensor",
                       cfg.seed, phase.value, t)
    return result


def write_trajectory_jsonl(result: TrialResult, path: str) -> None:
    with open(path, 'w', encoding='utf-8') as handle:
        for point in result.trajectory:
            handle.write(json.dumps(point.as_dict(), sort_keys=True) + '\n')


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FabricProfile:
    name: str
    texture_id: str
    texture_amplitude: float
    noise_sigma: float
    severity: float

    def render_params(self) -> RenderParams:
        return RenderParams(texture_id=self.texture_id, texture_amplitude=self.texture_amplitude,
                            noise_sigma=self.noise_sigma)


DEFAULT_PROFILES: Tuple[FabricProfile, ...] = tuple(FabricProfile(*p) for p in Config.FABRIC_PROFILES)


def default_suite(
    seed: int = 0,
    profiles: Sequence[FabricProfile] = DEFAULT_PROFILES,
    cloth_size_mm: Tuple[float, float] = (Config.CLOTH_WIDTH_MM, Config.CLOTH_HEIGHT_MM),
    **overrides,
) -> List[EpisodeConfig]:
    """Every profile in the flattened and the crumpled configuration."""
    suite = []
    for configuration in CONFIGURATIONS:
        for i, profile in enumerate(profiles):
            cloth_seed = int(np.random.SeedSequence([int(seed), i]).generate_state(1)[0])
            if configuration == 'flattened':
                cloth = make_flattened(*cloth_size_mm, seed=cloth_seed)
            else:
                cloth = make_crumpled(*cloth_size_mm, severity=profile.severity, seed=cloth_seed)
            suite.append(EpisodeConfig(cloth=cloth, configuration=configuration,
                                       render_params=profile.render_params(), label=profile.name,
                                       seed=cloth_seed, **overrides))
    return suite


@dataclass
class BenchmarkTable:
    labels: List[str]
    trials_per_config: int
    successes: Dict[Tuple[str, str], int] = field(default_factory=dict)

    def total(self, configuration: str) -> int:
        return sum(v for (c, _), v in self.successes.items() if c == configuration)

    def rate(self, configuration: str) -> float:
        return self.total(configuration) / (self.trials_per_config * len(self.labels))

    def rows(self) -> List[List[str]]:
        out = []
        for configuration in CONFIGURATIONS:
            row = [configuration]
            for label in self.labels:
                row.append(f"{self.successes.get((configuration, label), 0)}/{self.trials_per_config}")
            row.append(f"{self.total(configuration)}/{self.trials_per_config * len(self.labels)}")
            out.append(row)
        return out


def trial_seed(seed: int, config_index: int, trial: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(config_index), int(trial)]).generate_state(1)[0])


def run_benchmark(
    suite: Sequence[EpisodeConfig],
    trials_per_config: int,
    seed: int,
    classifier: ClassifierModel,
    regressor: RegressorModel,
    gains: ControlGains = ControlGains(),
    workers: int = 1,
) -> BenchmarkTable:
    """Success counts per (configuration, profile label) with per-trial derived seeds."""
    if trials_per_config < 1:
        raise InvalidArgumentError(f"trials_per_config must be >= 1, got {trials_per_config}")
    _check_models(classifier, regressor)
    jobs = [(ci, replace(cfg, seed=trial_seed(seed, ci, k)))
            for ci, cfg in enumerate(suite) for k in range(trials_per_config)]

    def run(job):
        return run_episode(job[1], classifier, regressor, gains).success

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, jobs))
    else:
        outcomes = [run(job) for job in jobs]

    labels: List[str] = []
    for cfg in suite:
        if (cfg.label or cfg.configuration) not in labels:
            labels.append(cfg.label or cfg.configuration)
    table = BenchmarkTable(labels=labels, trials_per_config=trials_per_config)
    for (ci, _), ok in zip(jobs, outcomes):
        key = (suite[ci].configuration, suite[ci].label or suite[ci].configuration)
        table.successes[key] = table.successes.get(key, 0) + int(ok)
    for configuration in CONFIGURATIONS:
        logger.info("Benchmark %s: %d/%d successful", configuration,
                    table.total(configuration), trials_per_config * len(labels))
    return table


def write_benchmark_csv(table: BenchmarkTable, path: str) -> None:
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['configuration'] + table.labels + ['total'])
        writer.writerows(table.rows())
