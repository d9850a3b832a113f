#!/usr/bin/env python3
"""
Command Line Interface for the cloth-edge sliding simulator.
Generates tactile datasets, trains and evaluates the perception models,
runs sliding episodes and benchmark suites, and analyses the gripper workspace.

Exit codes: 0 success, 2 environment or I/O error, 3 data or configuration error.
"""

import argparse
import csv
import math
import os
import sys
from typing import List, Optional, Sequence, Tuple

import numpy as np

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from src.cloth_world import make_crumpled, make_flattened
from src.control import ControlGains
from src.episode import (
    EpisodeConfig,
    default_suite,
    run_benchmark,
    run_episode,
    write_benchmark_csv,
    write_trajectory_jsonl,
)
from src.errors import (
    ConfigError,
    DatasetWriteError,
    InvalidArgumentError,
    InvalidDatasetError,
    InvalidModelError,
    SlideSimError,
)
from src.gripper import GripperConfig, compute_workspace, write_workspace_csv, write_workspace_pgm
from src.perception import (
    ClassifierHyperparams,
    ClassifierModel,
    RegressorHyperparams,
    RegressorModel,
    classification_report,
    estimate_pose,
    estimate_pose_classical,
    evaluate_pose_estimator,
    load_model,
    save_model,
    train_classifier,
    train_regressor,
    write_classification_report,
)
from src.scenario import ScenarioConfig, load_scenario
from src.tactile_render import ParamsDistribution, RenderParams, generate_dataset, load_dataset

try:
    from config import Config
except ImportError:
    import config as config_mod
    Config = config_mod.Config

EXIT_OK = 0
EXIT_ENVIRONMENT = 2
EXIT_DATA = 3

DATA_ERRORS = (ConfigError, InvalidDatasetError, InvalidModelError, InvalidArgumentError)
ENVIRONMENT_ERRORS = (DatasetWriteError, OSError)


def _safe_print(message: str) -> None:
    """Print text, falling back to ASCII if stdout cannot encode it."""
    enc = getattr(sys.stdout, 'encoding', None) or 'utf-8'
    try:
        _ = message.encode(enc)
        print(message)
    except UnicodeEncodeError:
        ascii_msg = message.replace('°', ' deg').replace('→', '->')
        print(ascii_msg.encode(enc, errors='ignore').decode(enc, errors='ignore'))


def _fmt(value: float) -> str:
    return 'nan' if value is None or math.isnan(value) else f"{value:.4f}"


def _resolve(out_dir: str, path: str) -> str:
    return path if os.path.isabs(path) else os.path.join(out_dir, path)


def _ensure_dir(path: str) -> None:
    if path:
        os.makedirs(path, exist_ok=True)


def _scenario(args) -> ScenarioConfig:
    """Scenario file (or defaults) with --seed and --out applied on top."""
    cfg = load_scenario(args.config) if args.config else ScenarioConfig()
    overrides = {}
    if args.seed is not None:
        overrides['seed'] = args.seed
    if args.out is not None:
        overrides['out_dir'] = args.out
    if overrides:
        cfg = cfg.model_copy(update={'scenario': cfg.scenario.model_copy(update=overrides)})
    return cfg


def _split(items: Sequence, fraction: float, seed: int) -> Tuple[list, list]:
    """Seeded shuffle, then hold out ``fraction`` of the items."""
    order = np.random.default_rng(seed).permutation(len(items))
    n_val = int(round(fraction * len(items)))
    held = set(order[:n_val].tolist())
    train = [items[i] for i in range(len(items)) if i not in held]
    validation = [items[i] for i in range(len(items)) if i in held]
    return train, validation


def _gripper_config(cfg: ScenarioConfig) -> GripperConfig:
    g = cfg.gripper
    return GripperConfig(
        rail_span_mm=g.rail_span_mm,
        finger_length_mm=g.finger_length_mm,
        abduction_range_rad=math.radians(g.abduction_range_deg),
        actuator_time_constant_s=g.actuator_time_constant_s,
        position_noise_mm=g.position_noise_mm,
        depth_range_mm=g.depth_range_mm,
    )


def _render_params(cfg: ScenarioConfig) -> RenderParams:
    r = cfg.render
    return RenderParams(
        texture_id=r.texture_id,
        texture_amplitude=r.texture_amplitude,
        contact_softness_mm=r.contact_softness_mm,
        noise_sigma=r.noise_sigma,
        seed=cfg.seed,
    )


def _episode_overrides(cfg: ScenarioConfig) -> dict:
    e = cfg.episode
    return dict(
        slide_speed_mm_s=e.slide_speed_mm_s,
        control_rate_hz=e.control_rate_hz,
        max_duration_s=e.max_duration_s,
        correction_rotation_deg=e.correction_rotation_deg,
        correction_depth_mm=e.correction_depth_mm,
        start_offset_mm=e.start_offset_mm,
        carriage_offset_mm=e.carriage_offset_mm,
        gripper=_gripper_config(cfg),
    )


def _load_models(cfg: ScenarioConfig, args) -> Tuple[ClassifierModel, RegressorModel]:
    classifier = load_model(args.classifier or _resolve(cfg.out_dir, cfg.models.classifier))
    regressor = load_model(args.regressor or _resolve(cfg.out_dir, cfg.models.regressor))
    if not isinstance(classifier, ClassifierModel):
        raise InvalidModelError("the classifier path does not hold a classifier model")
    if not isinstance(regressor, RegressorModel):
        raise InvalidModelError("the regressor path does not hold a regressor model")
    return classifier, regressor


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def gen_data_command(cfg: ScenarioConfig, args) -> int:
    d, r = cfg.dataset, cfg.render
    out_dir = cfg.out_dir
    if args.n_per_class is not None:
        d = d.model_copy(update={'n_per_class': args.n_per_class})
    distribution = ParamsDistribution(
        amplitude=(0.0, d.amplitude_max),
        noise_sigma=(0.0, d.noise_max),
        softness_mm=(d.softness_min_mm, d.softness_max_mm),
    )
    summary = generate_dataset(
        out_dir, d.n_per_class,
        params_distribution=distribution,
        seed=cfg.seed,
        width_px=r.width_px, height_px=r.height_px, mm_per_px=r.mm_per_px,
        n_pose_samples=d.n_pose_samples,
        workers=d.workers,
    )
    _safe_print(f"sequences={summary.n_sequences} pose_samples={summary.n_pose_samples} "
                f"labels={summary.labels_path}")
    return EXIT_OK


def _write_epoch_metrics(model: ClassifierModel, path: str) -> None:
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['epoch', 'train_loss', 'train_accuracy', 'validation_loss', 'validation_accuracy'])
        for r in model.history:
            writer.writerow([r.epoch, f"{r.train_loss:.6f}", f"{r.train_accuracy:.4f}",
                             _fmt(r.validation_loss), _fmt(r.validation_accuracy)])


def _write_pose_metrics(rows, path: str) -> None:
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['split', 'n', 'X', 'Y', 'Distance', 'Angle'])
        for split, s in rows:
            writer.writerow([split, s.n, _fmt(s.mean_x_mm), _fmt(s.mean_y_mm),
                             _fmt(s.mean_distance_mm), _fmt(s.mean_angle_deg)])


def train_command(cfg: ScenarioConfig, args) -> int:
    t = cfg.training
    dataset_dir = args.dataset or cfg.out_dir
    model_out = args.model_out or _resolve(cfg.out_dir, getattr(cfg.models, args.kind))
    dataset = load_dataset(dataset_dir)
    _ensure_dir(os.path.dirname(model_out))

    if args.kind == 'classifier':
        train, validation = _split(dataset.sequences, t.validation_fraction, cfg.seed)
        hp = ClassifierHyperparams(t.epochs, t.learning_rate, t.l2, t.augment_copies)
        model = train_classifier(train, hp, seed=cfg.seed, validation=validation or None)
        save_model(model, model_out)
        _write_epoch_metrics(model, model_out + '.metrics.csv')
        report = classification_report(model, validation or train)
        write_classification_report(report, model_out + '.report.csv')
        split = 'validation' if validation else 'train'
        _safe_print(f"model={model_out} {split}_accuracy={report.accuracy:.4f}")
        return EXIT_OK

    hp = RegressorHyperparams(ridge=t.ridge, lambda1=t.lambda1, lambda2=t.lambda2)
    train, validation = _split(dataset.poses, t.validation_fraction, cfg.seed)
    if len(train) < Config.REGRESSOR_MIN_SAMPLES:
        train, validation = list(dataset.poses), []
    model = train_regressor(train, hp, seed=cfg.seed)
    save_model(model, model_out)
    estimator = lambda img: estimate_pose(model, img)  # noqa: E731
    rows = [('train', evaluate_pose_estimator('regressor', estimator, train))]
    if validation:
        rows.append(('validation', evaluate_pose_estimator('regressor', estimator, validation)))
    _write_pose_metrics(rows, model_out + '.metrics.csv')
    split, summary = rows[-1]
    _safe_print(f"model={model_out} {split}_distance_mm={_fmt(summary.mean_distance_mm)} "
                f"{split}_angle_deg={_fmt(summary.mean_angle_deg)}")
    return EXIT_OK


def eval_pose_command(cfg: ScenarioConfig, args) -> int:
    model_path = args.model or _resolve(cfg.out_dir, cfg.models.regressor)
    model = load_model(model_path)
    if not isinstance(model, RegressorModel):
        raise InvalidModelError(f"{model_path} is not a regressor model")
    estimators = [('classical', estimate_pose_classical)]
    if args.baseline_model:
        baseline = load_model(args.baseline_model)
        if not isinstance(baseline, RegressorModel):
            raise InvalidModelError(f"{args.baseline_model} is not a regressor model")
        estimators.append(('baseline', lambda img: estimate_pose(baseline, img)))
    estimators.append(('regressor', lambda img: estimate_pose(model, img)))

    samples = load_dataset(args.dataset or cfg.out_dir).poses
    if not samples:
        raise InvalidDatasetError("the dataset holds no pose samples")
    summaries = [evaluate_pose_estimator(name, fn, samples) for name, fn in estimators]

    _ensure_dir(cfg.out_dir)
    path = os.path.join(cfg.out_dir, 'pose_eval.csv')
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['estimator', 'X', 'Y', 'Distance', 'Angle', 'n', 'failures'])
        for s in summaries:
            writer.writerow([s.name, _fmt(s.mean_x_mm), _fmt(s.mean_y_mm), _fmt(s.mean_distance_mm),
                             _fmt(s.mean_angle_deg), s.n, s.failures])
    for s in summaries:
        _safe_print(f"{s.name}: distance_mm={_fmt(s.mean_distance_mm)} angle_deg={_fmt(s.mean_angle_deg)} "
                    f"failures={s.failures}")
    _safe_print(f"report={path}")
    return EXIT_OK


def run_command(cfg: ScenarioConfig, args) -> int:
    classifier, regressor = _load_models(cfg, args)
    c = cfg.cloth
    if c.configuration == 'flattened':
        cloth = make_flattened(c.width_mm, c.height_mm, seed=cfg.seed, noise_mm=c.noise_mm)
    else:
        cloth = make_crumpled(c.width_mm, c.height_mm, severity=c.severity, seed=cfg.seed, noise_mm=c.noise_mm)
    episode = EpisodeConfig(
        cloth=cloth, configuration=c.configuration, render_params=_render_params(cfg),
        seed=cfg.seed, label='run', **_episode_overrides(cfg),
    )
    result = run_episode(episode, classifier, regressor, ControlGains(**cfg.control.model_dump()))
    _ensure_dir(cfg.out_dir)
    path = os.path.join(cfg.out_dir, 'trajectory.jsonl')
    write_trajectory_jsonl(result, path)
    _safe_print(f"success={'true' if result.success else 'false'} corrections={result.corrections} "
                f"duration_s={result.duration_s:.3f} final_phase={result.final_phase.value} trajectory={path}")
    return EXIT_OK


def bench_command(cfg: ScenarioConfig, args) -> int:
    classifier, regressor = _load_models(cfg, args)
    trials = args.trials if args.trials is not None else cfg.bench.trials_per_config
    suite = default_suite(cfg.seed, cloth_size_mm=(cfg.cloth.width_mm, cfg.cloth.height_mm),
                          **_episode_overrides(cfg))
    table = run_benchmark(suite, trials, cfg.seed, classifier, regressor,
                          ControlGains(**cfg.control.model_dump()), workers=cfg.bench.workers)
    _ensure_dir(cfg.out_dir)
    path = os.path.join(cfg.out_dir, 'benchmark.csv')
    write_benchmark_csv(table, path)
    for row in table.rows():
        _safe_print(' '.join(row))
    _safe_print(f"table={path}")
    return EXIT_OK


def workspace_command(cfg: ScenarioConfig, args) -> int:
    gripper = _gripper_config(cfg)
    resolution = args.resolution if args.resolution is not None else cfg.gripper.workspace_resolution_mm
    full = compute_workspace(gripper, resolution)
    baseline = compute_workspace(gripper, resolution, abduction_range_rad=0.0)
    _ensure_dir(cfg.out_dir)
    write_workspace_pgm(full, os.path.join(cfg.out_dir, 'workspace_full.pgm'))
    write_workspace_pgm(baseline, os.path.join(cfg.out_dir, 'workspace_no_abduction.pgm'))
    path = os.path.join(cfg.out_dir, 'workspace.csv')
    write_workspace_csv([('full', full.area_mm2), ('no_abduction', baseline.area_mm2)], path)
    # the zero-abduction set is a segment, so the ratio compares rasterised footprints
    cell = resolution ** 2
    ratio = (full.occupancy.sum() * cell) / max(baseline.occupancy.sum() * cell, cell)
    _safe_print(f"full_area_mm2={full.area_mm2:.1f} no_abduction_area_mm2={baseline.area_mm2:.1f} "
                f"area_ratio={ratio:.3f} summary={path}")
    return EXIT_OK


COMMANDS = {
    'gen-data': gen_data_command,
    'train': train_command,
    'eval-pose': eval_pose_command,
    'run': run_command,
    'bench': bench_command,
    'workspace': workspace_command,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Cloth-edge sliding simulator CLI",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python cli.py gen-data --out runs/data --seed 7
  python cli.py train --kind classifier --dataset runs/data --model-out runs/models/classifier.model
  python cli.py run --config scenario.ini
  python cli.py workspace --resolution 2
        """
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, help='Master seed (overrides the scenario file)')
    common.add_argument('--out', help='Output directory (overrides the scenario file)')
    common.add_argument('--config', help='Scenario file')

    sub = parser.add_subparsers(dest='command')
    gen = sub.add_parser('gen-data', parents=[common], help='Generate a labelled tactile dataset')
    gen.add_argument('--n-per-class', type=int, help='Sequences per contact class')

    train = sub.add_parser('train', parents=[common], help='Train the classifier or the pose regressor')
    train.add_argument('--kind', choices=['classifier', 'regressor'], required=True)
    train.add_argument('--dataset', help='Dataset directory (default: --out)')
    train.add_argument('--model-out', help='Model file to write')

    ev = sub.add_parser('eval-pose', parents=[common], help='Compare pose estimators on a dataset')
    ev.add_argument('--model', help='Regressor model file')
    ev.add_argument('--dataset', help='Dataset directory (default: --out)')
    ev.add_argument('--baseline-model', help='Second regressor reported as the baseline row')

    for name, text in (('run', 'Run one sliding episode'), ('bench', 'Run the benchmark suite')):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument('--classifier', help='Classifier model file')
        p.add_argument('--regressor', help='Regressor model file')
        if name == 'bench':
            p.add_argument('--trials', type=int, help='Trials per configuration')

    ws = sub.add_parser('workspace', parents=[common], help='Compare workspaces with and without abduction')
    ws.add_argument('--resolution', type=float, help='Raster cell size (mm)')
    return parser


def parse_args(argv=None):
    return build_parser().parse_args(argv)


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI function. Accepts argv for in-process invocation in tests."""
    args = parse_args(argv)
    if not args.command:
        build_parser().print_help()
        return EXIT_OK
    try:
        cfg = _scenario(args)
        return COMMANDS[args.command](cfg, args)
    except DATA_ERRORS as e:
        _safe_print(f"Error: {e}")
        return EXIT_DATA
    except ENVIRONMENT_ERRORS as e:
        _safe_print(f"Error: {e}")
        return EXIT_ENVIRONMENT
    except SlideSimError as e:
        _safe_print(f"Error: {e}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
