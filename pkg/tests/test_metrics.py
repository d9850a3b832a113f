"""
Unit tests for the image and pose metrics
"""

import math
import os
import sys
import unittest

import numpy as np
import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.common import EdgePose
from src.errors import InvalidArgumentError
from src.metrics import (
    ImageLossWeight,
    PoseLossWeights,
    SsimParams,
    angular_loss,
    fidelity_report,
    image_loss,
    image_loss_conventional,
    mse,
    pose_loss,
    ssim,
)
from src.tactile_render import TactileImage


def checkerboard(n=4):
    return (np.indices((n, n)).sum(axis=0) % 2).astype(float)


@pytest.mark.unit
class TestMse(unittest.TestCase):

    def test_identity(self):
        x = np.random.default_rng(0).random((8, 8))
        self.assertEqual(mse(x, x), 0.0)

    def test_constant_difference(self):
        a = TactileImage(np.full((5, 7), 0.1), 0.1)
        b = TactileImage(np.full((5, 7), 0.7), 0.1)
        self.assertAlmostEqual(mse(a, b), 0.36, places=12)

    def test_matches_pixel_loop(self):
        rng = np.random.default_rng(42)
        a, b = rng.random((8, 8)), rng.random((8, 8))
        total = 0.0
        for i in range(8):
            for j in range(8):
                total += (a[i, j] - b[i, j]) ** 2
        self.assertAlmostEqual(mse(a, b), total / 64, delta=1e-12)

    def test_symmetric(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            a = TactileImage(rng.uniform(0.0, 1.0, (12, 16)), 0.3)
            b = TactileImage(rng.uniform(0.0, 1.0, (12, 16)), 0.3)
            self.assertEqual(mse(a, b), mse(b, a))

    def test_dimension_mismatch(self):
        with self.assertRaises(InvalidArgumentError):
            mse(np.zeros((4, 4)), np.zeros((4, 5)))


@pytest.mark.unit
class TestSsim(unittest.TestCase):

    def test_identity(self):
        x = np.random.default_rng(1).random((16, 16))
        self.assertAlmostEqual(ssim(x, x), 1.0, delta=1e-9)
        self.assertAlmostEqual(ssim(x, x, SsimParams.sliding(7)), 1.0, delta=1e-9)

    def test_constant_images(self):
        a = np.full((6, 6), 0.5)
        self.assertAlmostEqual(ssim(a, a.copy()), 1.0, delta=1e-12)

    def test_checkerboard_against_inverse(self):
        a = checkerboard()
        b = 1.0 - a
        p = SsimParams(c1=1e-4, c2=1e-4)
        mu, var, cov = 0.5, 0.25, -0.25
        expected = ((2 * mu * mu + p.c1) * (2 * cov + p.c2)) / ((2 * mu ** 2 + p.c1) * (2 * var + p.c2))
        self.assertAlmostEqual(ssim(a, b, p), expected, delta=1e-12)
        self.assertLess(ssim(a, b, p), -0.99)

    def test_sliding_window_matches_loop(self):
        rng = np.random.default_rng(3)
        a, b = rng.random((10, 9)), rng.random((10, 9))
        p = SsimParams.sliding(3)
        values = []
        for i in range(8):
            for j in range(7):
                values.append(ssim(a[i:i + 3, j:j + 3], b[i:i + 3, j:j + 3], SsimParams()))
        self.assertAlmostEqual(ssim(a, b, p), float(np.mean(values)), delta=1e-9)

    def test_window_larger_than_image(self):
        with self.assertRaises(InvalidArgumentError):
            ssim(np.zeros((4, 4)), np.zeros((4, 4)), SsimParams.sliding(5))

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(7)
        for window in (None, 5):
            params = SsimParams(window_px=window)
            for _ in range(10):
                a = TactileImage(rng.uniform(0.0, 1.0, (12, 16)), 0.3)
                b = TactileImage(np.clip(a.pixels + rng.normal(0.0, 0.2, (12, 16)), 0.0, 1.0), 0.3)
                self.assertAlmostEqual(ssim(a, b, params), ssim(b, a, params), delta=1e-12)
                self.assertLessEqual(ssim(a, b, params), 1.0 + 1e-12)

    def test_stabilizers_must_be_positive(self):
        with self.assertRaises(InvalidArgumentError):
            SsimParams(c1=0.0)


@pytest.mark.unit
class TestImageLoss(unittest.TestCase):

    def test_alpha_one_is_mse(self):
        rng = np.random.default_rng(5)
        a, b = rng.random((6, 6)), rng.random((6, 6))
        self.assertEqual(image_loss(a, b, ImageLossWeight(1.0)), mse(a, b))

    def test_alpha_zero_identical(self):
        x = np.random.default_rng(6).random((6, 6))
        self.assertAlmostEqual(image_loss(x, x, ImageLossWeight(0.0)), 1.0, delta=1e-9)
        self.assertAlmostEqual(image_loss_conventional(x, x, ImageLossWeight(0.0)), 0.0, delta=1e-9)

    def test_half_alpha_on_checkerboards(self):
        a = checkerboard()
        b = 1.0 - a
        p = SsimParams(c1=1e-4, c2=1e-4)
        expected = 0.5 * 1.0 + 0.5 * ssim(a, b, p)
        self.assertAlmostEqual(image_loss(a, b, ImageLossWeight(0.5), p), expected, delta=1e-12)

    def test_fidelity_report_keys(self):
        a = np.full((8, 8), 0.1)
        b = np.full((8, 8), 0.7)
        report = fidelity_report(a, b)
        self.assertEqual(set(report), {'mse', 'ssim', 'image_loss', 'image_loss_conventional'})
        self.assertAlmostEqual(report['mse'], 0.36)

    def test_alpha_range(self):
        with self.assertRaises(InvalidArgumentError):
            ImageLossWeight(1.5)


@pytest.mark.unit
class TestPoseLosses(unittest.TestCase):

    def test_angular_values(self):
        self.assertEqual(angular_loss(0.4, 0.4), 0.0)
        self.assertAlmostEqual(angular_loss(math.pi, 0.0), 2.0, places=12)
        self.assertAlmostEqual(angular_loss(math.pi / 3, 0.0), 0.5, places=12)

    def test_angular_loss_bounds(self):
        for theta in np.linspace(-6.0, 6.0, 31):
            value = angular_loss(theta, 0.3)
            self.assertGreaterEqual(value, 0.0)
            self.assertLessEqual(value, 2.0)

    def test_angular_loss_is_two_pi_periodic(self):
        rng = np.random.default_rng(9)
        for _ in range(1000):
            a, b = rng.uniform(-math.pi, math.pi, 2)
            k = int(rng.integers(-3, 4))
            self.assertAlmostEqual(angular_loss(a + 2 * math.pi * k, b), angular_loss(a, b), delta=1e-9)
            self.assertAlmostEqual(angular_loss(a, b + 2 * math.pi * k), angular_loss(a, b), delta=1e-9)

    def test_angular_loss_minimum_at_truth(self):
        grid = np.arange(-math.pi, math.pi, 1e-3)
        for truth in (-2.0, 0.0, 0.37, 3.0):
            losses = np.array([angular_loss(t, truth) for t in grid])
            self.assertGreaterEqual(losses.min(), 0.0)
            self.assertLessEqual(abs(grid[int(np.argmin(losses))] - truth), 1e-3)

    def test_pose_loss_identity(self):
        pose = EdgePose(1.0, 2.0, 0.3)
        self.assertEqual(pose_loss(pose, pose), 0.0)

    def test_position_only(self):
        loss = pose_loss(EdgePose(3.0, 4.0, 1.0), EdgePose(0.0, 0.0, 0.0), PoseLossWeights(1.0, 0.0))
        self.assertAlmostEqual(loss, 12.5)

    def test_angle_only(self):
        loss = pose_loss(EdgePose(3.0, 4.0, 1.0), EdgePose(0.0, 0.0, 0.2), PoseLossWeights(0.0, 1.0))
        self.assertAlmostEqual(loss, angular_loss(1.0, 0.2))

    def test_weights_validated(self):
        with self.assertRaises(InvalidArgumentError):
            PoseLossWeights(0.0, 0.0)


if __name__ == '__main__':
    unittest.main()
