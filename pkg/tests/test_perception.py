"""
Tests for contact classification and edge-pose estimation
"""

import math
import os
import sys
import tempfile

import numpy as np
import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.common import CLASS_ORDER, ContactClass, EdgePose
from src.errors import InvalidArgumentError, InvalidDatasetError, InvalidModelError, NoEdgeDetectedError
from src.perception import (
    ClassifierHyperparams,
    RegressorHyperparams,
    augment_sequence,
    brute_force_pose_oracle,
    classification_report,
    classify,
    estimate_pose,
    estimate_pose_classical,
    evaluate_pose_estimator,
    extract_features,
    frame_features,
    load_model,
    pose_targets,
    regressor_features,
    regressor_loss_and_grad,
    save_model,
    train_classifier,
    train_regressor,
    write_classification_report,
)
from src.tactile_render import (
    EdgeAnnotation,
    LabeledPose,
    ParamsDistribution,
    PoseRanges,
    RenderParams,
    TactileImage,
    render_class_sample,
    render_edge,
    synthesize_dataset,
)

W, H, MM = 64, 48, 0.3


def edge_image(pose, params=RenderParams()):
    return render_edge(EdgeAnnotation(pose.canonical()), params, W, H, MM)


@pytest.mark.unit
class TestFeatures:

    def test_background_frame_has_no_coverage(self):
        feats = frame_features(TactileImage(np.full((H, W), 0.1), MM))
        assert feats[0] == 0.0
        assert np.all(feats[1:6] == 0.0)

    def test_full_contact_frame(self):
        feats = frame_features(TactileImage(np.full((H, W), 0.7), MM))
        assert feats[0] == pytest.approx(1.0)

    def test_half_plane_centroid_toward_cloth(self):
        feats = frame_features(edge_image(EdgePose(0.0, 0.0, 0.0)))
        assert feats[0] == pytest.approx(0.5, abs=0.03)
        assert feats[2] > 0.3
        assert abs(feats[1]) < 0.05

    def test_sequence_vector_length(self):
        seq, _ = render_class_sample(ContactClass.EDGE, RenderParams(), 1, W, H, MM)
        assert extract_features(seq).shape == (81,)

    def test_augmentation_keeps_shape(self):
        seq, _ = render_class_sample(ContactClass.CORNER, RenderParams(), 2, W, H, MM)
        moved = augment_sequence(seq, np.random.default_rng(0))
        assert len(moved.frames) == 5
        assert moved.last.shape == seq.last.shape
        assert not np.array_equal(moved.last.pixels, seq.last.pixels)


@pytest.mark.unit
class TestClassifier:

    def test_separable_toy_set(self):
        samples = [render_class_sample(cls, RenderParams(), 7, W, H, MM) for cls in CLASS_ORDER]
        model = train_classifier(samples, seed=0)
        assert model.training_accuracy == 1.0

    def test_missing_class_rejected(self):
        samples = [render_class_sample(ContactClass.EDGE, RenderParams(), s, W, H, MM) for s in range(3)]
        with pytest.raises(InvalidDatasetError):
            train_classifier(samples)

    def test_loss_never_increases(self, classifier):
        losses = np.asarray(classifier.loss_history)
        assert losses.size == ClassifierHyperparams().epochs
        assert np.all(np.diff(losses) <= 1e-12)
        assert losses[-1] < losses[0]

    def test_trained_model_accuracy(self, classifier):
        assert classifier.training_accuracy >= 0.9
        held_out = synthesize_dataset(10, seed=99, width_px=W, height_px=H, mm_per_px=MM, n_pose_samples=0)
        report = classification_report(classifier, held_out.sequences)
        assert report.support.sum() == 40
        assert report.accuracy >= 0.85

    def test_blank_and_full_inputs(self, classifier):
        seq, _ = render_class_sample(ContactClass.GRASP_FAILURE, RenderParams(), 5, W, H, MM)
        assert classify(classifier, seq)[0] == ContactClass.GRASP_FAILURE
        seq, _ = render_class_sample(ContactClass.IN_FABRIC, RenderParams(), 5, W, H, MM)
        assert classify(classifier, seq)[0] == ContactClass.IN_FABRIC

    def test_scores_are_probabilities(self, classifier):
        seq, _ = render_class_sample(ContactClass.EDGE, RenderParams(noise_sigma=0.05), 8, W, H, MM)
        _, scores = classify(classifier, seq)
        assert scores.shape == (4,)
        assert scores.sum() == pytest.approx(1.0)
        assert np.all(scores >= 0.0)

    def test_validation_history(self, small_dataset):
        train = small_dataset.sequences[::2]
        validation = small_dataset.sequences[1::2]
        model = train_classifier(train, ClassifierHyperparams(epochs=20), seed=1, validation=validation)
        assert len(model.history) == 20
        assert all(0.0 <= r.validation_accuracy <= 1.0 for r in model.history)
        assert [r.epoch for r in model.history] == list(range(20))

    def test_report_file(self, classifier, small_dataset):
        report = classification_report(classifier, small_dataset.sequences[:20])
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'report.csv')
            write_classification_report(report, path)
            with open(path, encoding='utf-8') as handle:
                lines = handle.read().splitlines()
        assert lines[0].startswith('class,precision,recall,support')
        assert len(lines) == 1 + len(CLASS_ORDER) + 1


@pytest.mark.unit
class TestClassicalEstimator:

    def test_centred_edge(self):
        pose = estimate_pose_classical(edge_image(EdgePose(0.0, 0.0, 0.0)))
        assert pose.distance_to(EdgePose(0.0, 0.0, 0.0)) < 0.5
        assert math.degrees(pose.angle_error(EdgePose(0.0, 0.0, 0.0))) < 1.0

    def test_offset_tilted_edge(self):
        truth = EdgePose(2.0, -1.5, 0.3)
        pose = estimate_pose_classical(edge_image(truth))
        assert pose.distance_to(truth) < 0.5
        assert math.degrees(pose.angle_error(truth)) < 2.0

    def test_result_is_canonical(self):
        pose = estimate_pose_classical(edge_image(EdgePose(1.0, 1.0, -0.7)))
        canon = pose.canonical()
        assert pose.as_tuple() == pytest.approx(canon.as_tuple())

    def test_blank_frame_has_no_edge(self):
        with pytest.raises(NoEdgeDetectedError):
            estimate_pose_classical(TactileImage(np.full((H, W), 0.1), MM))


@pytest.mark.unit
class TestRegressor:

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        features = np.column_stack([np.ones(12), rng.normal(size=(12, 4))])
        targets = rng.normal(size=(12, 4))
        weights = rng.normal(size=(5, 4))
        hp = RegressorHyperparams(ridge=0.1, lambda1=1.0, lambda2=0.5)
        _, grad = regressor_loss_and_grad(weights, features, targets, hp)
        eps = 1e-6
        for i, j in [(0, 0), (2, 1), (4, 3), (3, 2)]:
            bumped = weights.copy()
            bumped[i, j] += eps
            up, _ = regressor_loss_and_grad(bumped, features, targets, hp)
            bumped[i, j] -= 2 * eps
            down, _ = regressor_loss_and_grad(bumped, features, targets, hp)
            assert grad[i, j] == pytest.approx((up - down) / (2 * eps), rel=1e-5, abs=1e-8)

    def test_double_angle_targets_are_periodic(self):
        a, b = pose_targets([EdgePose(0.0, 0.0, math.pi / 2), EdgePose(0.0, 0.0, -math.pi / 2 + 1e-12)])
        np.testing.assert_allclose(a[2:], b[2:], atol=1e-9)

    def test_feature_vector_shape(self):
        feats = regressor_features(edge_image(EdgePose(0.0, 0.0, 0.0)))
        assert feats.shape == (1 + 48 + 8 + 8,)
        assert feats[0] == 1.0

    def test_repeated_sample_fits_exactly(self):
        truth = EdgePose(0.5, -1.0, 0.4).canonical()
        img = edge_image(truth)
        model = train_regressor([LabeledPose(img, truth)] * 50)
        pose = estimate_pose(model, img)
        assert pose.distance_to(truth) < 1e-6
        assert pose.angle_error(truth) < 1e-6

    def test_too_few_samples(self):
        img = edge_image(EdgePose(0.0, 0.0, 0.0))
        with pytest.raises(InvalidDatasetError):
            train_regressor([(img, EdgePose(0.0, 0.0, 0.0))] * 10)

    def test_held_out_accuracy(self, regressor):
        held_out = synthesize_dataset(1, seed=123, width_px=W, height_px=H, mm_per_px=MM, n_pose_samples=100)
        summary = evaluate_pose_estimator('regressor', lambda img: estimate_pose(regressor, img), held_out.poses)
        assert summary.n == 100
        assert summary.mean_distance_mm < 1.0
        assert summary.mean_angle_deg < 6.0
        assert summary.mean_x_mm <= summary.mean_distance_mm + 1e-12

    def test_centred_edge(self, regressor):
        pose = estimate_pose(regressor, edge_image(EdgePose(0.0, 0.0, 0.0)))
        assert pose.distance_to(EdgePose(0.0, 0.0, 0.0)) < 0.5
        assert math.degrees(pose.angle_error(EdgePose(0.0, 0.0, 0.0))) < 2.0

    def test_size_mismatch(self, regressor):
        img = render_edge(EdgeAnnotation(EdgePose(0.0, 0.0, 0.0)), RenderParams(), 32, 24, MM)
        with pytest.raises(InvalidArgumentError):
            estimate_pose(regressor, img)


@pytest.mark.unit
class TestOracle:

    def test_centred_edge_exactly_on_grid(self):
        pose = brute_force_pose_oracle(edge_image(EdgePose(0.0, 0.0, 0.0)))
        assert pose.as_tuple() == pytest.approx((0.0, 0.0, 0.0), abs=1e-9)

    def test_within_one_cell(self):
        truth = EdgePose(1.0, 0.5, 0.2)
        pose = brute_force_pose_oracle(edge_image(truth))
        assert pose.distance_to(truth) <= 0.3
        assert pose.angle_error(truth) <= 0.05 + 1e-9

    def test_agrees_with_classical(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            truth = EdgePose(float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2)), float(rng.uniform(-1.5, 1.5)))
            img = edge_image(truth)
            a, b = brute_force_pose_oracle(img), estimate_pose_classical(img)
            assert a.distance_to(b) < 0.5
            assert math.degrees(a.angle_error(b)) < 3.0

    def test_large_images_refused(self):
        img = TactileImage(np.full((100, 100), 0.1), MM)
        with pytest.raises(InvalidArgumentError):
            brute_force_pose_oracle(img)


@pytest.mark.unit
class TestModelFiles:

    def test_classifier_round_trip(self, classifier):
        seq, _ = render_class_sample(ContactClass.CORNER, RenderParams(), 3, W, H, MM)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'c.model')
            save_model(classifier, path)
            loaded = load_model(path)
        np.testing.assert_array_equal(classify(loaded, seq)[1], classify(classifier, seq)[1])

    def test_regressor_round_trip(self, regressor):
        img = edge_image(EdgePose(1.0, 1.0, 0.5))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'r.model')
            save_model(regressor, path)
            loaded = load_model(path)
        assert estimate_pose(loaded, img).as_tuple() == estimate_pose(regressor, img).as_tuple()

    def test_missing_file(self):
        with pytest.raises(FileNotFoundError):
            load_model('/nonexistent/model.file')

    def test_garbage_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'bad.model')
            with open(path, 'w', encoding='utf-8') as handle:
                handle.write("hello world\n")
            with pytest.raises(InvalidModelError):
                load_model(path)


def pose_set(n, params_for, seed):
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        truth = PoseRanges().sample(rng).canonical()
        samples.append(LabeledPose(edge_image(truth, params_for(i)), truth))
    return samples


@pytest.mark.slow
class TestAcceptance:
    """Held-out quality of the session models"""

    def test_balanced_held_out_classification(self, classifier):
        held_out = synthesize_dataset(
            500, params_distribution=ParamsDistribution(noise_sigma=(0.05, 0.05)), seed=2024,
            width_px=W, height_px=H, mm_per_px=MM, n_pose_samples=0,
        )
        report = classification_report(classifier, held_out.sequences)
        assert report.support.tolist() == [500] * 4
        assert report.accuracy >= 0.96
        assert np.all(report.precision >= 0.90)

    def test_regressor_on_thousand_held_out_images(self, regressor):
        held_out = synthesize_dataset(1, seed=124, width_px=W, height_px=H, mm_per_px=MM, n_pose_samples=1000)
        summary = evaluate_pose_estimator('regressor', lambda img: estimate_pose(regressor, img), held_out.poses)
        assert summary.n == 1000
        assert summary.mean_distance_mm < 1.0
        assert summary.mean_angle_deg < 6.0

    def test_classical_loses_on_textured_noisy_images(self, regressor):
        samples = pose_set(
            200, lambda i: RenderParams(texture_id='weave', texture_amplitude=0.3, noise_sigma=0.1, seed=i), seed=31,
        )
        learned = evaluate_pose_estimator('regressor', lambda img: estimate_pose(regressor, img), samples)
        classical = evaluate_pose_estimator('classical', estimate_pose_classical, samples)
        assert classical.n > 0
        assert classical.mean_distance_mm > learned.mean_distance_mm
        assert classical.mean_angle_deg > learned.mean_angle_deg

    def test_less_training_data_is_no_better(self, small_dataset, regressor):
        reduced = train_regressor(small_dataset.poses[:100], seed=3)
        held_out = synthesize_dataset(1, seed=125, width_px=W, height_px=H, mm_per_px=MM, n_pose_samples=300)
        full = evaluate_pose_estimator('full', lambda img: estimate_pose(regressor, img), held_out.poses)
        small = evaluate_pose_estimator('reduced', lambda img: estimate_pose(reduced, img), held_out.poses)
        assert small.mean_distance_mm >= full.mean_distance_mm
        assert small.mean_angle_deg >= full.mean_angle_deg

    def test_regressor_agrees_with_oracle_on_clean_images(self, regressor):
        samples = pose_set(50, lambda i: RenderParams(), seed=32)
        distances, angles = [], []
        for sample in samples:
            a, b = brute_force_pose_oracle(sample.image), estimate_pose(regressor, sample.image)
            distances.append(a.distance_to(b))
            angles.append(math.degrees(a.angle_error(b)))
        assert np.mean(distances) < 1.0
        assert np.mean(angles) < 5.0


@pytest.mark.unit
class TestEstimatorConsistency:

    def test_classical_follows_horizontal_shift_of_vertical_edge(self):
        base = estimate_pose_classical(edge_image(EdgePose(-1.5, 0.0, math.pi / 2)))
        for px in (1, 3, 7):
            dx = px * MM
            moved = estimate_pose_classical(edge_image(EdgePose(-1.5 + dx, 0.0, math.pi / 2)))
            assert moved.x - base.x == pytest.approx(dx, abs=1e-6)
            assert moved.angle_error(base) < 1e-9

    def test_classical_follows_horizontal_shift_of_tilted_edge(self):
        theta = 0.3
        base = estimate_pose_classical(edge_image(EdgePose(-0.9, 0.0, theta)))
        moved = estimate_pose_classical(edge_image(EdgePose(-0.9 + 4 * MM, 0.0, theta)))
        expected = -math.sin(theta) * 4 * MM
        assert moved.offset() - base.offset() == pytest.approx(expected, abs=MM / 2)
        assert math.degrees(moved.angle_error(base)) < 0.5

    def test_small_translation_keeps_the_class(self, classifier):
        rng = np.random.default_rng(8)
        for cls in CLASS_ORDER:
            for seed in (1, 2, 3):
                seq, _ = render_class_sample(cls, RenderParams(), seed, W, H, MM)
                shifted = augment_sequence(seq, rng, max_shift_px=2.0, max_rotation_rad=0.0)
                assert classify(classifier, shifted)[0] == classify(classifier, seq)[0]

    def test_noiseless_edge_labels_refit_by_line_fit(self):
        dataset = synthesize_dataset(
            10, params_distribution=ParamsDistribution(noise_sigma=(0.0, 0.0)), seed=41,
            width_px=W, height_px=H, mm_per_px=MM, n_pose_samples=0,
        )
        edges = [s for s in dataset.sequences if s.cls == ContactClass.EDGE]
        assert len(edges) == 10
        for sample in edges:
            fitted = estimate_pose_classical(sample.sequence.frames[-1])
            assert fitted.distance_to(sample.pose) < 1.0
            assert math.degrees(fitted.angle_error(sample.pose)) < 3.0

    def test_texture_seed_never_moves_the_label(self, classifier):
        for cls in CLASS_ORDER:
            predicted = set()
            for texture_seed in range(4):
                params = RenderParams(texture_id='stripes', texture_amplitude=0.2, seed=texture_seed)
                seq, label = render_class_sample(cls, params, 21, W, H, MM)
                assert label == cls
                predicted.add(classify(classifier, seq)[0])
            assert len(predicted) == 1

    def test_texture_seed_never_moves_the_edge(self):
        fits = []
        for texture_seed in range(4):
            params = RenderParams(texture_id='stripes', texture_amplitude=0.2, seed=texture_seed)
            seq, _ = render_class_sample(ContactClass.EDGE, params, 21, W, H, MM)
            fits.append(estimate_pose_classical(seq.frames[-1]))
        for fit in fits[1:]:
            assert fit.distance_to(fits[0]) < 0.3
            assert math.degrees(fit.angle_error(fits[0])) < 1.0
