from __future__ import annotations

"""PID positioning loops and the coupled yaw/abduction edge-alignment law."""

import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from src.errors import InvalidArgumentError
from src.gripper import ActuatorPlant

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


def _check_dt(dt: float) -> None:
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be > 0, got {dt}")


@dataclass
class PidController:
    """
    PID with a first-order filtered derivative.

    Gain Params:
        kp, ki, kd = proportional, integral and derivative gains (all >= 0)
        alpha = derivative filter weight in (0, 1]; 1 disables filtering

    Other Params:
        effort_limit = |output| bound; while exceeded the integral is frozen
                       and the output saturated (None = unbounded)
    """

    kp: float
    ki: float
    kd: float
    alpha: float = 1.0
    effort_limit: Optional[float] = None
    integral_acc: float = field(default=0.0, init=False)
    prev_error: float = field(default=0.0, init=False)
    filtered_derivative: float = field(default=0.0, init=False)
    initialized: bool = field(default=False, init=False)

    def __post_init__(self) -> None:
        if min(self.kp, self.ki, self.kd) < 0:
            raise InvalidArgumentError(f"PID gains must be >= 0, got kp={self.kp} ki={self.ki} kd={self.kd}")
        if not 0 < self.alpha <= 1:
            raise InvalidArgumentError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.effort_limit is not None and self.effort_limit <= 0:
            raise InvalidArgumentError(f"effort_limit must be > 0, got {self.effort_limit}")

    def update(self, error: float, dt: float) -> float:
        _check_dt(dt)
        self.integral_acc += error * dt
        raw = (error - self.prev_error) / dt if self.initialized else 0.0
        self.filtered_derivative = (1.0 - self.alpha) * self.filtered_derivative + self.alpha * raw
        output = self.kp * error + self.kd * self.filtered_derivative + self.ki * self.integral_acc

        if self.effort_limit is not None and abs(output) > self.effort_limit:
            self.integral_acc -= error * dt
            output = self.kp * error + self.kd * self.filtered_derivative + self.ki * self.integral_acc
            output = max(-self.effort_limit, min(self.effort_limit, output))

        self.prev_error = error
        self.initialized = True
        return output

    def reset(self) -> None:
        self.integral_acc = 0.0
        self.prev_error = 0.0
        self.filtered_derivative = 0.0
        self.initialized = False


def pid_update(c: PidController, error: float, dt: float) -> float:
    return c.update(error, dt)


def pid_reset(c: PidController) -> None:
    c.reset()


@dataclass
class AlignmentController:
    """Yaw PD on the lateral offset and abduction PD on the angle error.

    Gains: kpy deg/mm, kdy deg*s/mm, kpt deg/rad, kdt deg*s/rad. The commanded
    yaw (after clipping, converted to rad) is fed forward into the angle term
    through beta.
    """

    kpy: float = Config.ALIGN_KPY
    kdy: float = Config.ALIGN_KDY
    kpt: float = Config.ALIGN_KPT
    kdt: float = Config.ALIGN_KDT
    beta: float = Config.ALIGN_BETA
    yaw_limit_deg: float = Config.YAW_LIMIT_DEG
    ab_limit_deg: float = Config.ABDUCTION_LIMIT_DEG
    prev_ey: float = field(default=0.0, init=False)
    prev_etheta: float = field(default=0.0, init=False)

    def __post_init__(self) -> None:
        if self.yaw_limit_deg <= 0 or self.ab_limit_deg <= 0:
            raise InvalidArgumentError("alignment limits must be > 0")

    def update(self, ey: float, etheta: float, dt: float) -> Tuple[float, float]:
        _check_dt(dt)
        u_yaw = self.kpy * ey + self.kdy * (ey - self.prev_ey) / dt
        u_yaw = float(np.clip(u_yaw, -self.yaw_limit_deg, self.yaw_limit_deg))
        u_ab = (self.kpt * (etheta - self.beta * math.radians(u_yaw))
                + self.kdt * (etheta - self.prev_etheta) / dt)
        u_ab = float(np.clip(u_ab, -self.ab_limit_deg, self.ab_limit_deg))
        self.prev_ey = ey
        self.prev_etheta = etheta
        return u_yaw, u_ab

    def reset(self) -> None:
        self.prev_ey = 0.0
        self.prev_etheta = 0.0


def alignment_update(c: AlignmentController, ey: float, etheta: float, dt: float) -> Tuple[float, float]:
    return c.update(ey, etheta, dt)


@dataclass(frozen=True)
class StepResponse:
    rise_time: float
    overshoot: float
    steady_state_error: float


def servo_substeps(dt: float, servo_dt: float = 1.0 / Config.SERVO_RATE_HZ) -> Tuple[int, float]:
    """Split one control period into equal servo steps no longer than servo_dt.

    Returns (count, step) with count * step == dt.
    """
    _check_dt(dt)
    _check_dt(servo_dt)
    count = max(1, math.ceil(dt / servo_dt - 1e-9))
    return count, dt / count


def step_response_metrics(
    plant: ActuatorPlant,
    controller: PidController,
    setpoint: float,
    duration: float = Config.STEP_DURATION_S,
    dt: float = Config.STEP_DT_S,
    servo_dt: Optional[float] = None,
) -> StepResponse:
    """Closed-loop step from rest.

    The PID output is the plant's position target, so a P-only loop settles
    at kp/(1+kp) of the setpoint and the integral term removes the remaining
    error through a slow mode near ki/(1+kp) per second. The response is
    sampled every dt; with servo_dt set, the loop itself runs at that finer
    step between samples, the way run_episode drives its inner loops.

    rise_time is the 10%-90% time (inf when 90% is never reached), overshoot
    the peak excess as a fraction of the setpoint, steady_state_error the
    final |setpoint - y|.
    """
    _check_dt(dt)
    if setpoint == 0:
        raise InvalidArgumentError("setpoint must be non-zero")
    count, step = servo_substeps(dt, servo_dt) if servo_dt is not None else (1, dt)
    controller.reset()
    steps = int(round(duration / dt))
    y = 0.0
    trace = np.empty(steps)
    for k in range(steps):
        for _ in range(count):
            target = controller.update(setpoint - y, step)
            y = plant.step(y, target, step)
        trace[k] = y

    norm = trace / setpoint
    times = (np.arange(steps) + 1) * dt
    above_10 = np.flatnonzero(norm >= 0.1)
    above_90 = np.flatnonzero(norm >= 0.9)
    if above_10.size and above_90.size:
        rise = float(times[above_90[0]] - times[above_10[0]])
    else:
        rise = math.inf
    overshoot = max(0.0, float(norm.max()) - 1.0) if steps else 0.0
    sse = abs(setpoint - float(trace[-1])) if steps else abs(setpoint)
    logger.debug("step response: rise %.3f s, overshoot %.4f, sse %.6f", rise, overshoot, sse)
    return StepResponse(rise, overshoot, sse)


@dataclass(frozen=True)
class ControlGains:
    """Every gain of the closed sliding loop, defaults from Config.

    The grasp and abduction PIDs command actuator position targets and are
    tuned for the servo rate (Config.SERVO_RATE_HZ). Driven once per 30 Hz
    control tick the grasp loop overshoots and never settles.
    """

    grasp_kp: float = Config.GRASP_KP
    grasp_ki: float = Config.GRASP_KI
    grasp_kd: float = Config.GRASP_KD
    grasp_alpha: float = Config.GRASP_ALPHA
    grasp_effort_limit: float = Config.GRASP_EFFORT_LIMIT_MM
    abduction_kp: float = Config.ABDUCTION_KP
    abduction_ki: float = Config.ABDUCTION_KI
    abduction_kd: float = Config.ABDUCTION_KD
    abduction_alpha: float = Config.ABDUCTION_ALPHA
    kpy: float = Config.ALIGN_KPY
    kdy: float = Config.ALIGN_KDY
    kpt: float = Config.ALIGN_KPT
    kdt: float = Config.ALIGN_KDT
    beta: float = Config.ALIGN_BETA

    def grasp_pid(self) -> PidController:
        return PidController(self.grasp_kp, self.grasp_ki, self.grasp_kd, self.grasp_alpha,
                             effort_limit=self.grasp_effort_limit)

    def abduction_pid(self) -> PidController:
        return PidController(self.abduction_kp, self.abduction_ki, self.abduction_kd, self.abduction_alpha)

    def alignment(self) -> AlignmentController:
        return AlignmentController(self.kpy, self.kdy, self.kpt, self.kdt, self.beta)
