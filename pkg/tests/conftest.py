"""
Pytest configuration for the sliding simulator test suite.

Models are trained once per session on a synthetic dataset at a reduced
tactile resolution so that episode and CLI tests stay fast. The dataset is
large enough for the closed loop to slide a flattened cloth without any
correction.
"""
import os
import sys

import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.perception import ClassifierHyperparams, train_classifier, train_regressor
from src.tactile_render import synthesize_dataset

SMALL_WIDTH_PX = 64
SMALL_HEIGHT_PX = 48
SMALL_MM_PER_PX = 0.3
TRAIN_PER_CLASS = 250
TRAIN_POSE_SAMPLES = 1000


@pytest.fixture(scope='session')
def small_size():
    return SMALL_WIDTH_PX, SMALL_HEIGHT_PX, SMALL_MM_PER_PX


@pytest.fixture(scope='session')
def small_dataset(small_size):
    return synthesize_dataset(
        n_per_class=TRAIN_PER_CLASS, seed=11,
        width_px=small_size[0], height_px=small_size[1], mm_per_px=small_size[2],
        n_pose_samples=TRAIN_POSE_SAMPLES,
    )


@pytest.fixture(scope='session')
def classifier(small_dataset):
    return train_classifier(small_dataset.sequences, ClassifierHyperparams(), seed=3)


@pytest.fixture(scope='session')
def regressor(small_dataset):
    return train_regressor(small_dataset.poses, seed=3)
