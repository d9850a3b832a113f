from __future__ import annotations

"""Image fidelity and pose error measures used for evaluation and training."""

import logging
import math
import os
import sys
from dataclasses import dataclass
from typing import Dict, Optional, Union

import numpy as np
from scipy.ndimage import uniform_filter

from src.common import EdgePose
from src.errors import InvalidArgumentError
from src.tactile_render import TactileImage

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

ImageLike = Union[TactileImage, np.ndarray]


@dataclass(frozen=True)
class SsimParams:
    """SSIM stabilizers; window_px=None selects the global form."""

    c1: float = Config.SSIM_C1
    c2: float = Config.SSIM_C2
    window_px: Optional[int] = None

    def __post_init__(self) -> None:
        if not (self.c1 > 0 and self.c2 > 0):
            raise InvalidArgumentError(f"SSIM stabilizers must be positive, got c1={self.c1}, c2={self.c2}")
        if self.window_px is not None and int(self.window_px) < 1:
            raise InvalidArgumentError(f"SSIM window must be >= 1 px, got {self.window_px}")

    @classmethod
    def sliding(cls, size_px: int = Config.SSIM_WINDOW_PX) -> 'SsimParams':
        return cls(window_px=int(size_px))


@dataclass(frozen=True)
class PoseLossWeights:
    lambda1: float = Config.POSE_LAMBDA1
    lambda2: float = Config.POSE_LAMBDA2

    def __post_init__(self) -> None:
        if self.lambda1 < 0 or self.lambda2 < 0 or self.lambda1 + self.lambda2 <= 0:
            raise InvalidArgumentError(
                f"pose loss weights must be >= 0 with a positive sum, got {self.lambda1}, {self.lambda2}"
            )


@dataclass(frozen=True)
class ImageLossWeight:
    alpha: float = Config.IMAGE_LOSS_ALPHA

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgumentError(f"alpha must be in [0, 1], got {self.alpha}")


def _pair(a: ImageLike, b: ImageLike):
    pa = a.pixels if isinstance(a, TactileImage) else np.asarray(a, dtype=float)
    pb = b.pixels if isinstance(b, TactileImage) else np.asarray(b, dtype=float)
    if pa.shape != pb.shape:
        raise InvalidArgumentError(f"image dimensions differ: {pa.shape} vs {pb.shape}")
    return pa, pb


def mse(a: ImageLike, b: ImageLike) -> float:
    pa, pb = _pair(a, b)
    return float(np.mean((pa - pb) ** 2))


def _ssim_map(mu_a, mu_b, var_a, var_b, cov, p: SsimParams):
    num = (2 * mu_a * mu_b + p.c1) * (2 * cov + p.c2)
    den = (mu_a ** 2 + mu_b ** 2 + p.c1) * (var_a + var_b + p.c2)
    return num / den


def ssim(a: ImageLike, b: ImageLike, p: SsimParams = SsimParams()) -> float:
    """Structural similarity with biased (1/N) variances.

    The sliding form averages over every fully contained window, stride 1.
    """
    pa, pb = _pair(a, b)
    if p.window_px is None:
        mu_a, mu_b = pa.mean(), pb.mean()
        var_a = np.mean((pa - mu_a) ** 2)
        var_b = np.mean((pb - mu_b) ** 2)
        cov = np.mean((pa - mu_a) * (pb - mu_b))
        return float(_ssim_map(mu_a, mu_b, var_a, var_b, cov, p))

    size = int(p.window_px)
    if size > min(pa.shape):
        raise InvalidArgumentError(f"SSIM window {size} exceeds image size {pa.shape}")
    lo = size // 2
    hi_r = pa.shape[0] - (size - 1 - lo)
    hi_c = pa.shape[1] - (size - 1 - lo)
    inner = (slice(lo, hi_r), slice(lo, hi_c))

    def local_mean(x):
        return uniform_filter(x, size=size, mode='constant')[inner]

    mu_a, mu_b = local_mean(pa), local_mean(pb)
    var_a = np.maximum(local_mean(pa * pa) - mu_a ** 2, 0.0)
    var_b = np.maximum(local_mean(pb * pb) - mu_b ** 2, 0.0)
    cov = local_mean(pa * pb) - mu_a * mu_b
    return float(np.mean(_ssim_map(mu_a, mu_b, var_a, var_b, cov, p)))


def image_loss(
    a: ImageLike,
    b: ImageLike,
    alpha: ImageLossWeight = ImageLossWeight(),
    p: SsimParams = SsimParams(),
) -> float:
    """Mixed loss in its literal form, alpha*mse + (1-alpha)*(1 - (1 - ssim)).

    Minimising this rewards dissimilar structure; trainers use image_loss_conventional.
    """
    ssim_loss = 1.0 - ssim(a, b, p)
    return alpha.alpha * mse(a, b) + (1.0 - alpha.alpha) * (1.0 - ssim_loss)


def image_loss_conventional(
    a: ImageLike,
    b: ImageLike,
    alpha: ImageLossWeight = ImageLossWeight(),
    p: SsimParams = SsimParams(),
) -> float:
    return alpha.alpha * mse(a, b) + (1.0 - alpha.alpha) * (1.0 - ssim(a, b, p))


def angular_loss(theta_pred: float, theta_true: float) -> float:
    return 1.0 - math.cos(theta_pred - theta_true)


def pose_loss(pred: EdgePose, true: EdgePose, w: PoseLossWeights = PoseLossWeights()) -> float:
    position = 0.5 * ((pred.x - true.x) ** 2 + (pred.y - true.y) ** 2)
    return w.lambda1 * position + w.lambda2 * angular_loss(pred.theta, true.theta)


def fidelity_report(
    reference: ImageLike,
    rendered: ImageLike,
    alpha: ImageLossWeight = ImageLossWeight(),
    p: SsimParams = SsimParams(),
) -> Dict[str, float]:
    """All image measures of a rendered frame against a reference."""
    report = {
        'mse': mse(reference, rendered),
        'ssim': ssim(reference, rendered, p),
    }
    report['image_loss'] = alpha.alpha * report['mse'] + (1.0 - alpha.alpha) * report['ssim']
    report['image_loss_conventional'] = (
        alpha.alpha * report['mse'] + (1.0 - alpha.alpha) * (1.0 - report['ssim'])
    )
    return report
