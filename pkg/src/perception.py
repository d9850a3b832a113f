from __future__ import annotations

"""Contact classification and edge-pose estimation on tactile frames.

Three estimators share this module:

* a multinomial logistic-regression contact classifier over hand-crafted
  per-frame features of a five-frame sequence,
* a ridge regressor mapping one frame to an edge pose, with the line angle
  encoded as (sin 2theta, cos 2theta),
* a classical threshold-and-line-fit baseline, plus an exhaustive
  template-matching oracle used to cross-check the other two.

Per-frame classifier features, in order:
  0 coverage fraction of the smoothed contact mask
  1 contact centroid x / half image width
  2 contact centroid y / half image height
  3-5 central second moments xx, yy, xy, normalised by the half extents
  6 fraction of rows containing a mask transition
  7 fraction of columns containing a mask transition
  8 corner-wedge score: lambda_min / (lambda_min + lambda_max) of the
    boundary-pixel covariance
A sequence vector is the five frame vectors followed by the four
frame-to-frame deltas (81 values).
"""

import csv
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from src.common import CLASS_ORDER, ContactClass, EdgePose, fit_line_tls, wrap_line_angle
from src.errors import (
    InvalidArgumentError,
    InvalidDatasetError,
    InvalidModelError,
    NoEdgeDetectedError,
)
from src.metrics import PoseLossWeights
from src.tactile_render import (
    LabeledPose,
    LabeledSequence,
    TactileImage,
    TactileSequence,
    blur_weight,
)

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

CLASSIFIER_FEATURE_SPEC = 'contact-moments-v1'
REGRESSOR_FEATURE_SPEC = 'gradient-energy-v1'
FRAME_FEATURES = 9
MASK_THRESHOLD = 0.5 * (Config.CONTACT_INTENSITY + Config.BACKGROUND_INTENSITY)
MODEL_VERSION = 'v1'

__all__ = [
    'TactileSequence', 'ClassifierHyperparams', 'ClassifierModel', 'RegressorHyperparams',
    'RegressorModel', 'ClassificationReport', 'PoseErrorSummary', 'frame_features',
    'sequence_features', 'extract_features', 'train_classifier', 'classify',
    'classify_features', 'classification_report', 'write_classification_report',
    'augment_sequence', 'estimate_pose_classical', 'regressor_features', 'train_regressor',
    'regressor_loss_and_grad', 'estimate_pose', 'brute_force_pose_oracle',
    'evaluate_pose_estimator', 'save_model', 'load_model',
]


# ---------------------------------------------------------------------------
# Classifier features
# ---------------------------------------------------------------------------

def _contact_mask(img: TactileImage) -> np.ndarray:
    sigma_px = Config.FEATURE_SMOOTHING_MM / img.mm_per_px
    smooth = ndimage.gaussian_filter(img.pixels, sigma=sigma_px, mode='nearest')
    return smooth > MASK_THRESHOLD


def frame_features(img: TactileImage) -> np.ndarray:
    mask = _contact_mask(img)
    X, Y = img.grid()
    half_w = img.width_px * img.mm_per_px / 2.0
    half_h = img.height_px * img.mm_per_px / 2.0
    feats = np.zeros(FRAME_FEATURES)
    coverage = float(mask.mean())
    feats[0] = coverage
    if coverage > 0:
        xs, ys = X[mask], Y[mask]
        cx, cy = xs.mean(), ys.mean()
        feats[1] = cx / half_w
        feats[2] = cy / half_h
        feats[3] = np.mean((xs - cx) ** 2) / half_w ** 2
        feats[4] = np.mean((ys - cy) ** 2) / half_h ** 2
        feats[5] = np.mean((xs - cx) * (ys - cy)) / (half_w * half_h)
    feats[6] = float(np.mean(np.any(mask[:, 1:] != mask[:, :-1], axis=1)))
    feats[7] = float(np.mean(np.any(mask[1:, :] != mask[:-1, :], axis=0)))
    boundary = mask & ~ndimage.binary_erosion(mask, border_value=1)
    if boundary.sum() >= 3:
        pts = np.column_stack([X[boundary], Y[boundary]])
        eig = np.linalg.eigvalsh(np.cov(pts.T, bias=True))
        total = eig.sum()
        feats[8] = float(eig[0] / total) if total > 0 else 0.0
    return feats


def sequence_features(per_frame: Sequence[np.ndarray]) -> np.ndarray:
    frames = np.asarray(per_frame, dtype=float)
    if frames.shape != (Config.SEQUENCE_LENGTH, FRAME_FEATURES):
        raise InvalidArgumentError(f"expected {Config.SEQUENCE_LENGTH} frame feature vectors")
    return np.concatenate([frames.ravel(), np.diff(frames, axis=0).ravel()])


def extract_features(seq: TactileSequence) -> np.ndarray:
    return sequence_features([frame_features(f) for f in seq.frames])


def augment_sequence(
    seq: TactileSequence,
    rng: np.random.Generator,
    max_shift_px: float = 2.0,
    max_rotation_rad: float = math.radians(15.0),
) -> TactileSequence:
    """Apply one random in-plane rotation and shift to every frame of a sequence."""
    angle = math.degrees(float(rng.uniform(-max_rotation_rad, max_rotation_rad)))
    shift = rng.uniform(-max_shift_px, max_shift_px, size=2)
    frames = []
    for frame in seq.frames:
        moved = ndimage.rotate(frame.pixels, angle, reshape=False, order=1, mode='nearest')
        moved = ndimage.shift(moved, shift, order=1, mode='nearest')
        frames.append(TactileImage(np.clip(moved, 0.0, 1.0), frame.mm_per_px))
    return TactileSequence(tuple(frames))


# ---------------------------------------------------------------------------
# Classifier
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassifierHyperparams:
    epochs: int = Config.CLASSIFIER_EPOCHS
    learning_rate: float = Config.CLASSIFIER_LEARNING_RATE
    l2: float = Config.CLASSIFIER_L2
    augment_copies: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.learning_rate <= 0 or self.l2 < 0 or self.augment_copies < 0:
            raise InvalidArgumentError(f"invalid classifier hyperparameters: {self}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    validation_loss: float = float('nan')
    validation_accuracy: float = float('nan')


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    mean: np.ndarray
    projection: np.ndarray
    weights: np.ndarray
    bias: np.ndarray
    feature_spec: str = CLASSIFIER_FEATURE_SPEC
    classes: Tuple[ContactClass, ...] = CLASS_ORDER
    training_accuracy: float = float('nan')
    history: Tuple[EpochRecord, ...] = field(default=(), repr=False)

    @property
    def loss_history(self) -> Tuple[float, ...]:
        return tuple(r.train_loss for r in self.history)

    def scores(self, features: np.ndarray) -> np.ndarray:
        z = (np.atleast_2d(features) - self.mean) @ self.projection
        return _softmax(z @ self.weights + self.bias)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _whitening(features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mean = features.mean(axis=0)
    centered = features - mean
    cov = centered.T @ centered / features.shape[0]
    eig, vecs = np.linalg.eigh(cov)
    keep = eig > max(eig.max(), 1e-12) * 1e-6
    if not np.any(keep):
        return mean, np.zeros((features.shape[1], 1))
    return mean, vecs[:, keep] / np.sqrt(eig[keep])


def _as_sequence_pairs(dataset) -> List[Tuple[TactileSequence, ContactClass]]:
    pairs = []
    for item in dataset:
        if isinstance(item, LabeledSequence):
            pairs.append((item.sequence, item.cls))
        else:
            seq, cls = item[0], item[1]
            pairs.append((seq, cls if isinstance(cls, ContactClass) else ContactClass.parse(cls)))
    return pairs


def train_classifier(
    dataset: Iterable,
    hyperparams: ClassifierHyperparams = ClassifierHyperparams(),
    seed: int = 0,
    validation: Optional[Iterable] = None,
) -> ClassifierModel:
    """Full-batch gradient descent on the softmax cross-entropy of whitened features.

    Per-epoch loss and accuracy are recorded, on ``validation`` too when given.
    """
    pairs = _as_sequence_pairs(dataset)
    counts = {cls: 0 for cls in CLASS_ORDER}
    for _, cls in pairs:
        counts[cls] += 1
    empty = [cls.value for cls, n in counts.items() if n == 0]
    if empty:
        raise InvalidDatasetError(f"no training samples for class(es): {', '.join(empty)}")

    rng = np.random.default_rng(seed)
    rows, labels = [], []
    for seq, cls in pairs:
        rows.append(extract_features(seq))
        labels.append(cls.index)
        for _ in range(hyperparams.augment_copies):
            rows.append(extract_features(augment_sequence(seq, rng)))
            labels.append(cls.index)
    features = np.asarray(rows)
    y = np.asarray(labels)
    onehot = np.eye(len(CLASS_ORDER))[y]

    mean, projection = _whitening(features)
    z = (features - mean) @ projection
    n, k = z.shape
    # whitened inputs bound the softmax curvature by (1 + max|z|^2 / n); keep the step below 1/L
    lipschitz = 0.5 * (1.0 + np.linalg.norm(z, ord=2) ** 2 / n) + hyperparams.l2
    step = min(hyperparams.learning_rate, 1.0 / lipschitz)

    val_z = val_y = None
    if validation is not None:
        val_pairs = _as_sequence_pairs(validation)
        if val_pairs:
            val_z = (np.asarray([extract_features(s) for s, _ in val_pairs]) - mean) @ projection
            val_y = np.asarray([c.index for _, c in val_pairs])

    def evaluate(inputs, targets):
        probs = _softmax(inputs @ weights + bias)
        loss = -np.mean(np.log(probs[np.arange(len(targets)), targets] + 1e-300))
        return float(loss), float(np.mean(np.argmax(probs, axis=1) == targets)), probs

    weights = np.zeros((k, len(CLASS_ORDER)))
    bias = np.zeros(len(CLASS_ORDER))
    history = []
    for epoch in range(hyperparams.epochs):
        loss, accuracy, probs = evaluate(z, y)
        loss += 0.5 * hyperparams.l2 * float(np.sum(weights ** 2))
        record = EpochRecord(epoch, loss, accuracy)
        if val_z is not None:
            val_loss, val_acc, _ = evaluate(val_z, val_y)
            record = EpochRecord(epoch, loss, accuracy, val_loss, val_acc)
        history.append(record)
        residual = probs - onehot
        weights -= step * (z.T @ residual / n + hyperparams.l2 * weights)
        bias -= step * residual.mean(axis=0)
        if epoch % 100 == 0:
            logger.debug("classifier epoch %d loss %.6f", epoch, loss)

    _, accuracy, _ = evaluate(z, y)
    logger.info("Trained classifier on %d samples (%d features): training accuracy %.4f",
                n, features.shape[1], accuracy)
    return ClassifierModel(
        mean=mean, projection=projection, weights=weights, bias=bias,
        training_accuracy=accuracy, history=tuple(history),
    )


def classify_features(model: ClassifierModel, features: np.ndarray) -> Tuple[ContactClass, np.ndarray]:
    scores = model.scores(features)[0]
    return model.classes[int(np.argmax(scores))], scores


def classify(model: ClassifierModel, seq: TactileSequence) -> Tuple[ContactClass, np.ndarray]:
    """Most likely contact class and the score vector; ties go to the earlier class."""
    return classify_features(model, extract_features(seq))


@dataclass(frozen=True, eq=False)
class ClassificationReport:
    confusion: np.ndarray
    classes: Tuple[ContactClass, ...] = CLASS_ORDER

    @property
    def support(self) -> np.ndarray:
        return self.confusion.sum(axis=1)

    @property
    def accuracy(self) -> float:
        total = self.confusion.sum()
        return float(np.trace(self.confusion) / total) if total else 0.0

    @property
    def precision(self) -> np.ndarray:
        predicted = self.confusion.sum(axis=0)
        return np.divide(np.diag(self.confusion), predicted,
                         out=np.zeros(len(self.classes)), where=predicted > 0)

    @property
    def recall(self) -> np.ndarray:
        support = self.support
        return np.divide(np.diag(self.confusion), support,
                         out=np.zeros(len(self.classes)), where=support > 0)


def classification_report(model: ClassifierModel, samples: Iterable) -> ClassificationReport:
    confusion = np.zeros((len(CLASS_ORDER), len(CLASS_ORDER)), dtype=int)
    for seq, cls in _as_sequence_pairs(samples):
        predicted, _ = classify(model, seq)
        confusion[cls.index, predicted.index] += 1
    return ClassificationReport(confusion)


def write_classification_report(report: ClassificationReport, path: str) -> None:
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['class', 'precision', 'recall', 'support'] + [f"pred_{c.value}" for c in report.classes])
        for i, cls in enumerate(report.classes):
            writer.writerow([cls.value, f"{report.precision[i]:.4f}", f"{report.recall[i]:.4f}",
                             int(report.support[i])] + [int(v) for v in report.confusion[i]])
        writer.writerow(['accuracy', f"{report.accuracy:.4f}", '', int(report.support.sum())])


# ---------------------------------------------------------------------------
# Classical baseline
# ---------------------------------------------------------------------------

def _two_mode_threshold(pixels: np.ndarray, bins: int = 64) -> float:
    hist, edges = np.histogram(pixels, bins=bins, range=(0.0, 1.0))
    centers = 0.5 * (edges[:-1] + edges[1:])
    first = int(np.argmax(hist))
    second = int(np.argmax(hist * (np.arange(bins) - first) ** 2))
    return 0.5 * (centers[first] + centers[second])


def estimate_pose_classical(img: TactileImage) -> EdgePose:
    """Histogram threshold on the raw pixels, transition band, total-least-squares line."""
    mask = img.pixels > _two_mode_threshold(img.pixels)
    coverage = float(mask.mean())
    if not 0.05 < coverage < 0.95:
        raise NoEdgeDetectedError(f"contact coverage {coverage:.3f} outside (0.05, 0.95)")
    X, Y = img.grid()
    horiz = mask[:, 1:] != mask[:, :-1]
    vert = mask[1:, :] != mask[:-1, :]
    band = np.concatenate([
        np.column_stack([(0.5 * (X[:, 1:] + X[:, :-1]))[horiz], Y[:, 1:][horiz]]),
        np.column_stack([X[1:, :][vert], (0.5 * (Y[1:, :] + Y[:-1, :]))[vert]]),
    ])
    if band.shape[0] < 2:
        raise NoEdgeDetectedError("no transition band found")
    centroid, theta, _ = fit_line_tls(band)
    return EdgePose(float(centroid[0]), float(centroid[1]), theta).canonical()


# ---------------------------------------------------------------------------
# Regressor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegressorHyperparams:
    ridge: float = Config.REGRESSOR_RIDGE
    lambda1: float = Config.POSE_LAMBDA1
    lambda2: float = Config.POSE_LAMBDA2
    grid_rows: int = 6
    grid_cols: int = 8
    orientation_bins: int = 8

    def __post_init__(self) -> None:
        PoseLossWeights(self.lambda1, self.lambda2)
        if self.ridge <= 0 or self.grid_rows < 1 or self.grid_cols < 1 or self.orientation_bins < 1:
            raise InvalidArgumentError(f"invalid regressor hyperparameters: {self}")

    @property
    def output_weights(self) -> np.ndarray:
        return np.array([self.lambda1, self.lambda1, self.lambda2, self.lambda2])


@lru_cache(maxsize=16)
def _block_average(n: int, blocks: int) -> np.ndarray:
    matrix = np.zeros((blocks, n))
    for b, idx in enumerate(np.array_split(np.arange(n), blocks)):
        if idx.size:
            matrix[b, idx] = 1.0 / idx.size
    matrix.setflags(write=False)
    return matrix


def regressor_features(img: TactileImage, hp: RegressorHyperparams = RegressorHyperparams()) -> np.ndarray:
    """Fixed nonlinear map of a frame: [1, block energy, orientation histogram,
    structure-tensor (s2, c2), energy centroid (cx, cy), centroid x tensor products]."""
    if img.height_px < hp.grid_rows or img.width_px < hp.grid_cols:
        raise InvalidArgumentError("image smaller than the regressor block grid")
    smooth = ndimage.gaussian_filter(img.pixels, sigma=Config.GRADIENT_SMOOTHING_MM / img.mm_per_px, mode='nearest')
    gx = ndimage.sobel(smooth, axis=1, mode='nearest')
    gy = -ndimage.sobel(smooth, axis=0, mode='nearest')
    energy = gx ** 2 + gy ** 2
    total = float(energy.sum())
    if total <= 1e-18:
        energy = np.full_like(energy, 1.0)
        total = float(energy.size)
    weights = energy / total

    magnitude = np.sqrt(energy)
    blocks = _block_average(img.height_px, hp.grid_rows) @ magnitude @ _block_average(img.width_px, hp.grid_cols).T
    blocks = blocks / (blocks.sum() + 1e-18)

    double_angle = np.mod(2.0 * np.arctan2(gy, gx), 2 * math.pi)
    hist, _ = np.histogram(double_angle, bins=hp.orientation_bins, range=(0.0, 2 * math.pi), weights=weights)

    jxx, jyy, jxy = float(np.sum(weights * gx ** 2)), float(np.sum(weights * gy ** 2)), float(np.sum(weights * gx * gy))
    trace = jxx + jyy
    s2, c2 = (2 * jxy / trace, (jxx - jyy) / trace) if trace > 0 else (0.0, 0.0)
    X, Y = img.grid()
    cx, cy = float(np.sum(weights * X)), float(np.sum(weights * Y))
    return np.concatenate([
        [1.0], blocks.ravel(), hist, [s2, c2, cx, cy, cx * s2, cx * c2, cy * s2, cy * c2],
    ])


@dataclass(frozen=True, eq=False)
class RegressorModel:
    """Linear map over standardized regressor features to (x, y, sin 2theta, cos 2theta)."""

    mean: np.ndarray
    scale: np.ndarray
    weights: np.ndarray
    height_px: int
    width_px: int
    mm_per_px: float
    hyperparams: RegressorHyperparams = RegressorHyperparams()
    feature_spec: str = REGRESSOR_FEATURE_SPEC

    def standardize(self, features: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(features) - self.mean) / self.scale


def pose_targets(poses: Sequence[EdgePose]) -> np.ndarray:
    rows = []
    for pose in poses:
        c = pose.canonical()
        rows.append([c.x, c.y, math.sin(2 * c.theta), math.cos(2 * c.theta)])
    return np.asarray(rows, dtype=float)


def regressor_loss_and_grad(
    weights: np.ndarray,
    features: np.ndarray,
    targets: np.ndarray,
    hp: RegressorHyperparams = RegressorHyperparams(),
) -> Tuple[float, np.ndarray]:
    """Weighted squared-error pose loss and its gradient.

    ``features`` are standardized with a leading constant column that is not
    regularised; ``weights`` has shape (n_features, 4).
    """
    n = features.shape[0]
    out_w = hp.output_weights
    residual = features @ weights - targets
    loss = float(np.sum(out_w * np.mean(residual ** 2, axis=0)) / 2.0)
    penal = weights.copy()
    penal[0, :] = 0.0
    loss += hp.ridge * float(np.sum(penal ** 2))
    grad = features.T @ residual * out_w / n + 2.0 * hp.ridge * penal
    return loss, grad


def _as_pose_pairs(dataset) -> List[Tuple[TactileImage, EdgePose]]:
    pairs = []
    for item in dataset:
        if isinstance(item, LabeledPose):
            pairs.append((item.image, item.pose))
        else:
            pairs.append((item[0], item[1]))
    return pairs


def train_regressor(
    dataset: Iterable,
    hyperparams: RegressorHyperparams = RegressorHyperparams(),
    seed: int = 0,
) -> RegressorModel:
    """Closed-form minimiser of regressor_loss_and_grad."""
    pairs = _as_pose_pairs(dataset)
    if len(pairs) < Config.REGRESSOR_MIN_SAMPLES:
        raise InvalidDatasetError(
            f"regressor needs at least {Config.REGRESSOR_MIN_SAMPLES} samples, got {len(pairs)}"
        )
    first = pairs[0][0]
    if any(img.shape != first.shape for img, _ in pairs):
        raise InvalidDatasetError("all pose images must share dimensions")
    raw = np.asarray([regressor_features(img, hyperparams) for img, _ in pairs])
    targets = pose_targets([pose for _, pose in pairs])

    mean = raw.mean(axis=0)
    scale = raw.std(axis=0)
    mean[0], scale[0] = 0.0, 1.0
    scale[scale < 1e-12] = 1.0
    features = (raw - mean) / scale
    n, k = features.shape

    gram = features.T @ features / n
    penalty = 2.0 * hyperparams.ridge * np.diag(np.r_[0.0, np.ones(k - 1)])
    weights = np.zeros((k, targets.shape[1]))
    for j, w in enumerate(hyperparams.output_weights):
        if w <= 0:
            continue
        weights[:, j] = np.linalg.solve(w * gram + penalty, w * features.T @ targets[:, j] / n)
    loss, _ = regressor_loss_and_grad(weights, features, targets, hyperparams)
    logger.info("Trained pose regressor on %d samples (seed %d): training loss %.6f", n, seed, loss)
    return RegressorModel(
        mean=mean, scale=scale, weights=weights,
        height_px=first.height_px, width_px=first.width_px, mm_per_px=first.mm_per_px,
        hyperparams=hyperparams,
    )


def estimate_pose(model: RegressorModel, img: TactileImage) -> EdgePose:
    if img.shape != (model.height_px, model.width_px):
        raise InvalidArgumentError(
            f"image is {img.width_px}x{img.height_px} px, model expects {model.width_px}x{model.height_px}"
        )
    out = (model.standardize(regressor_features(img, model.hyperparams)) @ model.weights)[0]
    theta = wrap_line_angle(0.5 * math.atan2(out[2], out[3]))
    return EdgePose(float(out[0]), float(out[1]), theta).canonical()


# ---------------------------------------------------------------------------
# Oracle and evaluation
# ---------------------------------------------------------------------------

def brute_force_pose_oracle(
    img: TactileImage,
    grid_resolution: Tuple[float, float] = (0.25, 0.05),
    softness_mm: float = Config.CONTACT_SOFTNESS_MM,
) -> EdgePose:
    """Exhaustive normalised-cross-correlation match against noiseless edge renders.

    Candidates are canonical lines (angle, signed offset) on a grid containing
    zero; either cloth side matches through |NCC|.
    """
    if img.height_px > 64 or img.width_px > 64:
        raise InvalidArgumentError("the exhaustive oracle is limited to images of at most 64x64 px")
    step_mm, step_rad = grid_resolution
    if step_mm <= 0 or step_rad <= 0:
        raise InvalidArgumentError(f"grid resolution must be positive, got {grid_resolution}")
    X, Y = img.grid()
    target = img.pixels - img.pixels.mean()
    target_norm = np.linalg.norm(target)
    reach = 0.5 * math.hypot(img.width_px, img.height_px) * img.mm_per_px
    offsets = step_mm * np.arange(-math.floor(reach / step_mm), math.floor(reach / step_mm) + 1)
    k_hi = math.floor((math.pi / 2) / step_rad + 1e-9)
    k_lo = -math.ceil((math.pi / 2) / step_rad - 1e-9) + 1
    thetas = step_rad * np.arange(k_lo, k_hi + 1)

    best, best_score = EdgePose(0.0, 0.0, 0.0), -1.0
    if target_norm <= 1e-12:
        return best
    for theta in thetas:
        base = -X * math.sin(theta) + Y * math.cos(theta)
        for d in offsets:
            template = blur_weight(base - d, softness_mm)
            template = template - template.mean()
            norm = np.linalg.norm(template)
            if norm <= 1e-12:
                continue
            score = abs(float(np.sum(template * target))) / (norm * target_norm)
            if score > best_score + 1e-12:
                best_score = score
                best = EdgePose(-d * math.sin(theta) + 0.0, d * math.cos(theta) + 0.0, float(theta))
    return best


@dataclass(frozen=True)
class PoseErrorSummary:
    name: str
    n: int
    mean_distance_mm: float
    mean_angle_deg: float
    failures: int = 0
    mean_x_mm: float = float('nan')
    mean_y_mm: float = float('nan')


def evaluate_pose_estimator(
    name: str,
    estimator: Callable[[TactileImage], EdgePose],
    samples: Iterable,
) -> PoseErrorSummary:
    """Mean canonical distance and line-angle error; estimator failures are counted, not scored."""
    distances, angles, dx, dy, failures = [], [], [], [], 0
    for img, truth in _as_pose_pairs(samples):
        try:
            pred = estimator(img)
        except NoEdgeDetectedError:
            failures += 1
            continue
        distances.append(pred.distance_to(truth))
        dx.append(abs(pred.x - truth.x))
        dy.append(abs(pred.y - truth.y))
        angles.append(math.degrees(pred.angle_error(truth)))
    if not distances:
        return PoseErrorSummary(name, 0, float('nan'), float('nan'), failures)
    return PoseErrorSummary(name, len(distances), float(np.mean(distances)), float(np.mean(angles)), failures,
                            float(np.mean(dx)), float(np.mean(dy)))


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------

def _fmt_values(values: np.ndarray) -> str:
    return ' '.join(f"{float(v):.17g}" for v in np.ravel(values))


def save_model(model: Union[ClassifierModel, RegressorModel], path: str) -> None:
    if isinstance(model, ClassifierModel):
        lines = [
            f"MODEL classifier {MODEL_VERSION}",
            f"feature_spec {model.feature_spec}",
            f"classes {' '.join(c.value for c in model.classes)}",
            f"n_features {model.mean.size}",
            f"n_components {model.projection.shape[1]}",
            f"training_accuracy {model.training_accuracy:.17g}",
            f"mean {_fmt_values(model.mean)}",
            f"projection {_fmt_values(model.projection)}",
            f"weights {_fmt_values(model.weights)}",
            f"bias {_fmt_values(model.bias)}",
        ]
    elif isinstance(model, RegressorModel):
        hp = model.hyperparams
        lines = [
            f"MODEL regressor {MODEL_VERSION}",
            f"feature_spec {model.feature_spec}",
            f"height_px {model.height_px}",
            f"width_px {model.width_px}",
            f"mm_per_px {model.mm_per_px:.17g}",
            f"ridge {hp.ridge:.17g}",
            f"lambda1 {hp.lambda1:.17g}",
            f"lambda2 {hp.lambda2:.17g}",
            f"grid_rows {hp.grid_rows}",
            f"grid_cols {hp.grid_cols}",
            f"orientation_bins {hp.orientation_bins}",
            f"n_features {model.mean.size}",
            f"mean {_fmt_values(model.mean)}",
            f"scale {_fmt_values(model.scale)}",
            f"weights {_fmt_values(model.weights)}",
        ]
    else:
        raise InvalidArgumentError(f"cannot save object of type {type(model).__name__}")
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write('\n'.join(lines) + '\n')
    logger.info("Saved %s to %s", lines[0], path)


def _read_fields(path: str) -> Tuple[str, Dict[str, List[str]]]:
    with open(path, 'r', encoding='utf-8') as handle:
        lines = [ln.split() for ln in handle.read().splitlines() if ln.strip()]
    if not lines or len(lines[0]) != 3 or lines[0][0] != 'MODEL':
        raise InvalidModelError(f"{path}: missing 'MODEL <kind> {MODEL_VERSION}' header")
    if lines[0][2] != MODEL_VERSION:
        raise InvalidModelError(f"{path}: unsupported model version '{lines[0][2]}'")
    return lines[0][1], {ln[0]: ln[1:] for ln in lines[1:]}


def load_model(path: str) -> Union[ClassifierModel, RegressorModel]:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"model file '{path}' not found")
    kind, fields_ = _read_fields(path)

    def get(key: str) -> List[str]:
        if key not in fields_:
            raise InvalidModelError(f"{path}: missing key '{key}'")
        return fields_[key]

    def floats(key: str) -> np.ndarray:
        try:
            return np.asarray([float(v) for v in get(key)])
        except ValueError:
            raise InvalidModelError(f"{path}: non-numeric value under '{key}'") from None

    def scalar(key: str, cast=float):
        try:
            return cast(get(key)[0])
        except (ValueError, IndexError):
            raise InvalidModelError(f"{path}: bad value for '{key}'") from None

    try:
        if kind == 'classifier':
            if get('feature_spec') != [CLASSIFIER_FEATURE_SPEC]:
                raise InvalidModelError(f"{path}: unknown feature_spec {get('feature_spec')}")
            classes = tuple(ContactClass(v) for v in get('classes'))
            n_features, n_comp = scalar('n_features', int), scalar('n_components', int)
            return ClassifierModel(
                mean=floats('mean').reshape(n_features),
                projection=floats('projection').reshape(n_features, n_comp),
                weights=floats('weights').reshape(n_comp, len(classes)),
                bias=floats('bias').reshape(len(classes)),
                classes=classes,
                training_accuracy=scalar('training_accuracy'),
            )
        if kind == 'regressor':
            if get('feature_spec') != [REGRESSOR_FEATURE_SPEC]:
                raise InvalidModelError(f"{path}: unknown feature_spec {get('feature_spec')}")
            hp = RegressorHyperparams(
                ridge=scalar('ridge'), lambda1=scalar('lambda1'), lambda2=scalar('lambda2'),
                grid_rows=scalar('grid_rows', int), grid_cols=scalar('grid_cols', int),
                orientation_bins=scalar('orientation_bins', int),
            )
            n_features = scalar('n_features', int)
            return RegressorModel(
                mean=floats('mean').reshape(n_features),
                scale=floats('scale').reshape(n_features),
                weights=floats('weights').reshape(n_features, 4),
                height_px=scalar('height_px', int),
                width_px=scalar('width_px', int),
                mm_per_px=scalar('mm_per_px'),
                hyperparams=hp,
            )
    except ValueError as exc:
        if isinstance(exc, InvalidModelError):
            raise
        raise InvalidModelError(f"{path}: {exc}") from None
    raise InvalidModelError(f"{path}: unknown model kind '{kind}'")
