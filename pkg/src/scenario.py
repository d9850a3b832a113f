from __future__ import annotations

"""Versioned scenario files: every knob of a run, with defaults from Config.

Format is INI with one section per concern. Unknown sections or keys are
rejected and the error names them.
"""

import configparser
import logging
import os
import sys
from typing import Literal, Optional, Type

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.errors import ConfigError

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


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)


class ScenarioSection(_Section):
    version: int = Field(Config.SCENARIO_VERSION, description="Scenario file format version")
    seed: int = Field(Config.DEFAULT_SEED, ge=0, description="Master seed for every random stream")
    out_dir: str = Field(Config.DEFAULT_OUT_DIR, description="Directory receiving all outputs")


class ClothSection(_Section):
    width_mm: float = Field(Config.CLOTH_WIDTH_MM, ge=50, le=1000, description="Cloth width")
    height_mm: float = Field(Config.CLOTH_HEIGHT_MM, ge=50, le=1000, description="Cloth height")
    configuration: Literal['flattened', 'crumpled'] = Field('flattened', description="Initial cloth state")
    severity: float = Field(0.3, ge=0, le=1, description="Crumple severity for the crumpled configuration")
    noise_mm: float = Field(Config.CLOTH_NOISE_MM, ge=0, le=1, description="Boundary noise amplitude")


class RenderSection(_Section):
    texture_id: Literal['plain', 'stripes', 'dots', 'weave'] = Field('plain', description="Cloth texture")
    texture_amplitude: float = Field(0.0, ge=0, le=1, description="Texture darkening depth")
    contact_softness_mm: float = Field(Config.CONTACT_SOFTNESS_MM, ge=0.1, le=5.0,
                                       description="Width of the contact-boundary blur")
    noise_sigma: float = Field(0.0, ge=0, le=1, description="Additive Gaussian pixel noise")
    width_px: int = Field(Config.IMAGE_WIDTH_PX, ge=8, description="Tactile image width")
    height_px: int = Field(Config.IMAGE_HEIGHT_PX, ge=8, description="Tactile image height")
    mm_per_px: float = Field(Config.MM_PER_PX, gt=0, description="Pixel pitch")


class ControlSection(_Section):
    grasp_kp: float = Field(Config.GRASP_KP, ge=0, description="Grasp-depth PID proportional gain")
    grasp_ki: float = Field(Config.GRASP_KI, ge=0, description="Grasp-depth PID integral gain")
    grasp_kd: float = Field(Config.GRASP_KD, ge=0, description="Grasp-depth PID derivative gain")
    grasp_alpha: float = Field(Config.GRASP_ALPHA, gt=0, le=1, description="Grasp derivative filter weight")
    grasp_effort_limit: float = Field(Config.GRASP_EFFORT_LIMIT_MM, gt=0, description="Grasp output limit (mm)")
    abduction_kp: float = Field(Config.ABDUCTION_KP, ge=0, description="Abduction PID proportional gain")
    abduction_ki: float = Field(Config.ABDUCTION_KI, ge=0, description="Abduction PID integral gain")
    abduction_kd: float = Field(Config.ABDUCTION_KD, ge=0, description="Abduction PID derivative gain")
    abduction_alpha: float = Field(Config.ABDUCTION_ALPHA, gt=0, le=1, description="Abduction derivative filter weight")
    kpy: float = Field(Config.ALIGN_KPY, description="Yaw gain on lateral offset (deg/mm)")
    kdy: float = Field(Config.ALIGN_KDY, description="Yaw derivative gain (deg*s/mm)")
    kpt: float = Field(Config.ALIGN_KPT, description="Abduction gain on angle error (deg/rad)")
    kdt: float = Field(Config.ALIGN_KDT, description="Abduction derivative gain (deg*s/rad)")
    beta: float = Field(Config.ALIGN_BETA, description="Yaw feed-forward coupling")


class GripperSection(_Section):
    rail_span_mm: float = Field(Config.RAIL_SPAN_MM, gt=0, description="Rail length")
    finger_length_mm: float = Field(Config.FINGER_LENGTH_MM, gt=0, description="Pivot to sensor centre")
    abduction_range_deg: float = Field(30.0, gt=0, le=90, description="Symmetric abduction limit")
    actuator_time_constant_s: float = Field(Config.ACTUATOR_TIME_CONSTANT_S, gt=0, description="Axis lag")
    position_noise_mm: float = Field(Config.POSITION_NOISE_MM, ge=0, description="Encoder noise sigma")
    depth_range_mm: float = Field(Config.DEPTH_RANGE_MM, ge=0, description="Grasp depth travel")
    workspace_resolution_mm: float = Field(Config.WORKSPACE_RESOLUTION_MM, ge=0.5, le=5.0,
                                           description="Workspace raster cell size")


class EpisodeSection(_Section):
    slide_speed_mm_s: float = Field(Config.SLIDE_SPEED_MM_S, gt=0, description="Sliding speed")
    control_rate_hz: float = Field(Config.CONTROL_RATE_HZ, ge=10, le=200, description="Control tick rate")
    max_duration_s: float = Field(Config.MAX_DURATION_S, gt=0, description="Trial timeout")
    correction_rotation_deg: float = Field(Config.CORRECTION_ROTATION_DEG, ge=0, description="Correction yaw step")
    correction_depth_mm: float = Field(Config.CORRECTION_DEPTH_MM, ge=0, description="Correction depth step")
    start_offset_mm: float = Field(Config.START_OFFSET_MM, gt=0, description="Start distance from corner 0")
    carriage_offset_mm: float = Field(Config.CARRIAGE_OFFSET_MM, ge=0, description="Moving carriage position")


class DatasetSection(_Section):
    n_per_class: int = Field(50, ge=1, description="Sequences per contact class")
    n_pose_samples: Optional[int] = Field(None, ge=0, description="Pose samples (empty: n_per_class)")
    workers: int = Field(1, ge=1, description="Generator threads")
    amplitude_max: float = Field(0.3, ge=0, le=1, description="Largest sampled texture amplitude")
    noise_max: float = Field(0.05, ge=0, le=1, description="Largest sampled pixel noise")
    softness_min_mm: float = Field(0.3, ge=0.1, le=5, description="Smallest sampled boundary blur")
    softness_max_mm: float = Field(1.0, ge=0.1, le=5, description="Largest sampled boundary blur")


class TrainingSection(_Section):
    epochs: int = Field(Config.CLASSIFIER_EPOCHS, ge=1, description="Classifier gradient steps")
    learning_rate: float = Field(Config.CLASSIFIER_LEARNING_RATE, gt=0, description="Classifier step size")
    l2: float = Field(Config.CLASSIFIER_L2, ge=0, description="Classifier weight decay")
    augment_copies: int = Field(0, ge=0, description="Augmented copies per classifier sample")
    ridge: float = Field(Config.REGRESSOR_RIDGE, gt=0, description="Regressor ridge penalty")
    lambda1: float = Field(Config.POSE_LAMBDA1, ge=0, description="Position loss weight")
    lambda2: float = Field(Config.POSE_LAMBDA2, ge=0, description="Angle loss weight")
    validation_fraction: float = Field(Config.VALIDATION_FRACTION, ge=0, lt=1, description="Held-out share")


class ModelsSection(_Section):
    classifier: str = Field('models/classifier.model', description="Classifier model file")
    regressor: str = Field('models/regressor.model', description="Regressor model file")


class BenchSection(_Section):
    trials_per_config: int = Field(Config.TRIALS_PER_CONFIG, ge=1, description="Trials per profile")
    workers: int = Field(1, ge=1, description="Parallel episodes")


SECTIONS = {
    'scenario': ScenarioSection,
    'cloth': ClothSection,
    'render': RenderSection,
    'control': ControlSection,
    'gripper': GripperSection,
    'episode': EpisodeSection,
    'dataset': DatasetSection,
    'training': TrainingSection,
    'models': ModelsSection,
    'bench': BenchSection,
}


class ScenarioConfig(_Section):
    """Complete description of a run."""

    scenario: ScenarioSection = ScenarioSection()
    cloth: ClothSection = ClothSection()
    render: RenderSection = RenderSection()
    control: ControlSection = ControlSection()
    gripper: GripperSection = GripperSection()
    episode: EpisodeSection = EpisodeSection()
    dataset: DatasetSection = DatasetSection()
    training: TrainingSection = TrainingSection()
    models: ModelsSection = ModelsSection()
    bench: BenchSection = BenchSection()

    @property
    def seed(self) -> int:
        return self.scenario.seed

    @property
    def out_dir(self) -> str:
        return self.scenario.out_dir


def _format_value(value) -> str:
    if value is None:
        return ''
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def serialize_scenario(cfg: ScenarioConfig) -> str:
    lines = []
    for name in SECTIONS:
        section = getattr(cfg, name)
        lines.append(f"[{name}]")
        for key in type(section).model_fields:
            lines.append(f"{key} = {_format_value(getattr(section, key))}")
        lines.append('')
    return '\n'.join(lines)


def _build_section(name: str, model: Type[_Section], items: dict) -> _Section:
    known = model.model_fields
    for key in items:
        if key not in known:
            raise ConfigError(f"unknown key '{name}.{key}'")
    values = {k: (None if v.strip() == '' else v.strip()) for k, v in items.items()}
    try:
        return model(**values)
    except ValidationError as exc:
        err = exc.errors()[0]
        key = err['loc'][0] if err['loc'] else '?'
        raise ConfigError(f"invalid value for '{name}.{key}': {err['msg']}") from None


def parse_scenario(text: str) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section='__defaults__')
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable scenario file: {exc}") from None
    sections = {}
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError(f"unknown section '[{name}]'")
        sections[name] = _build_section(name, SECTIONS[name], dict(parser.items(name)))
    scenario = sections.get('scenario', ScenarioSection())
    if scenario.version != Config.SCENARIO_VERSION:
        raise ConfigError(f"unsupported 'scenario.version' {scenario.version}, expected {Config.SCENARIO_VERSION}")
    return ScenarioConfig(**sections)


def load_scenario(path: str) -> ScenarioConfig:
    with open(path, 'r', encoding='utf-8') as handle:
        cfg = parse_scenario(handle.read())
    logger.info("Loaded scenario from %s", path)
    return cfg


def save_scenario(cfg: ScenarioConfig, path: str) -> None:
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write(serialize_scenario(cfg))
