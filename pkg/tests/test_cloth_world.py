"""
Unit tests for the cloth world: outline generators, contact queries and
the text serialization of outlines.
"""

import math
import os
import sys
import tempfile
import unittest

import numpy as np
import pytest
from shapely.geometry import Polygon

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.cloth_world import (
    ClothEdge,
    LEFT_OF_EDGE,
    load_cloth,
    make_crumpled,
    make_flattened,
    point_along_boundary,
    query_contact,
    save_cloth,
)
from src.common import ContactClass, SensorFootprint
from src.errors import InvalidArgumentError


@pytest.mark.unit
class TestMakeFlattened(unittest.TestCase):
    """Rectangular outlines with seeded boundary noise"""

    def test_bounding_box_matches_size_within_noise(self):
        cloth = make_flattened(300, 300, seed=0)
        minx, miny, maxx, maxy = cloth.polygon.bounds
        self.assertAlmostEqual(maxx - minx, 300.0, delta=1.0)
        self.assertAlmostEqual(maxy - miny, 300.0, delta=1.0)
        self.assertTrue(cloth.is_simple())

    def test_same_seed_is_deterministic(self):
        a = make_flattened(300, 300, seed=0)
        b = make_flattened(300, 300, seed=0)
        np.testing.assert_array_equal(a.boundary, b.boundary)
        self.assertEqual(a.corner_indices, b.corner_indices)

    def test_different_seeds_change_noise_not_corners(self):
        a = make_flattened(300, 300, seed=1)
        b = make_flattened(300, 300, seed=2)
        self.assertFalse(np.array_equal(a.boundary, b.boundary))
        self.assertEqual(len(a.corner_indices), 4)
        self.assertEqual(len(b.corner_indices), 4)

    def test_corners_sit_on_the_rectangle(self):
        cloth = make_flattened(200, 100, seed=5)
        expected = np.array([[-100, -50], [100, -50], [100, 50], [-100, 50]])
        np.testing.assert_allclose(cloth.corners, expected, atol=1e-9)

    def test_counter_clockwise_orientation(self):
        cloth = make_flattened(300, 300, seed=3)
        self.assertTrue(cloth.polygon.exterior.is_ccw)

    def test_invalid_dimensions_rejected(self):
        with self.assertRaises(InvalidArgumentError):
            make_flattened(10, 300, seed=0)
        with self.assertRaises(InvalidArgumentError):
            make_flattened(300, 300, seed=-1)


@pytest.mark.unit
class TestMakeCrumpled(unittest.TestCase):
    """Perturbed outlines stay simple and keep four corners"""

    def test_zero_severity_is_flattened(self):
        flat = make_flattened(300, 300, seed=4)
        crumpled = make_crumpled(300, 300, severity=0.0, seed=4)
        np.testing.assert_array_equal(flat.boundary, crumpled.boundary)

    def test_half_severity_departs_from_rectangle(self):
        cloth = make_crumpled(300, 300, severity=0.5, seed=7)
        self.assertTrue(cloth.is_simple())
        rectangle = Polygon([(-150, -150), (150, -150), (150, 150), (-150, 150)])
        self.assertGreater(cloth.polygon.hausdorff_distance(rectangle), 5.0)

    def test_full_severity_keeps_structure(self):
        cloth = make_crumpled(300, 300, severity=1.0, seed=7)
        self.assertTrue(cloth.is_simple())
        self.assertEqual(len(cloth.corner_indices), 4)
        self.assertLessEqual(cloth.max_segment_mm(), 5.0 + 1e-9)

    def test_severity_out_of_range(self):
        with self.assertRaises(InvalidArgumentError):
            make_crumpled(300, 300, severity=1.5, seed=0)


@pytest.mark.unit
class TestQueryContact(unittest.TestCase):
    """Ground-truth labels for footprint placements"""

    def setUp(self):
        self.cloth = make_flattened(300, 300, seed=0, noise_mm=0.0)

    def test_outside_is_grasp_failure(self):
        result = query_contact(self.cloth, SensorFootprint(center=(500.0, 500.0), heading=0.0))
        self.assertEqual(result.true_class, ContactClass.GRASP_FAILURE)
        self.assertIsNone(result.true_edge_pose)
        self.assertEqual(result.coverage_fraction, 0.0)

    def test_interior_is_in_fabric(self):
        result = query_contact(self.cloth, SensorFootprint(center=(0.0, 0.0), heading=0.0))
        self.assertEqual(result.true_class, ContactClass.IN_FABRIC)
        self.assertEqual(result.coverage_fraction, 1.0)

    def test_straddling_side_midpoint_is_edge(self):
        result = query_contact(self.cloth, SensorFootprint(center=(0.0, -150.0), heading=0.0))
        self.assertEqual(result.true_class, ContactClass.EDGE)
        pose = result.true_edge_pose
        self.assertAlmostEqual(pose.x, 0.0, delta=1e-6)
        self.assertAlmostEqual(pose.y, 0.0, delta=1e-6)
        self.assertAlmostEqual(pose.theta, 0.0, delta=1e-6)
        self.assertAlmostEqual(result.coverage_fraction, 0.5, delta=1e-6)
        self.assertEqual(result.cloth_side, LEFT_OF_EDGE)

    def test_corner_in_footprint(self):
        result = query_contact(self.cloth, SensorFootprint(center=(-150.0, -150.0), heading=0.0))
        self.assertEqual(result.true_class, ContactClass.CORNER)
        self.assertAlmostEqual(result.coverage_fraction, 0.25, delta=1e-6)

    def test_rotated_footprint_reports_relative_angle(self):
        result = query_contact(self.cloth, SensorFootprint(center=(0.0, -150.0), heading=0.2))
        self.assertEqual(result.true_class, ContactClass.EDGE)
        self.assertAlmostEqual(result.true_edge_pose.theta, -0.2, delta=1e-6)

    def test_coverage_strictly_inside_unit_interval_for_edges(self):
        for dy in np.linspace(-7.0, 7.0, 8):
            result = query_contact(self.cloth, SensorFootprint(center=(10.0, -150.0 + dy), heading=0.0))
            self.assertEqual(result.true_class, ContactClass.EDGE)
            self.assertGreater(result.coverage_fraction, 0.0)
            self.assertLess(result.coverage_fraction, 1.0)

    def test_common_rigid_motion_leaves_labels_unchanged(self):
        cloth = make_flattened(300, 300, seed=3)
        angle, shift = 0.7, np.array([25.0, -60.0])
        turn = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
        moved_cloth = ClothEdge(cloth.boundary @ turn.T + shift, cloth.corner_indices)
        placements = [((0.0, -150.0), 0.1), ((0.0, 0.0), 0.0), ((-147.0, -148.0), 0.4),
                      ((400.0, 0.0), 0.0), ((40.0, 149.0), -0.3)]
        seen = set()
        for center, heading in placements:
            before = query_contact(cloth, SensorFootprint(center=center, heading=heading))
            c = turn @ np.asarray(center) + shift
            after = query_contact(moved_cloth, SensorFootprint(center=(float(c[0]), float(c[1])),
                                                               heading=heading + angle))
            seen.add(before.true_class)
            self.assertEqual(after.true_class, before.true_class)
            self.assertAlmostEqual(after.coverage_fraction, before.coverage_fraction, delta=1e-9)
            self.assertEqual(after.cloth_side, before.cloth_side)
            if before.true_edge_pose is None:
                self.assertIsNone(after.true_edge_pose)
            else:
                self.assertLess(after.true_edge_pose.distance_to(before.true_edge_pose), 1e-6)
                self.assertLess(after.true_edge_pose.angle_error(before.true_edge_pose), 1e-6)
        self.assertEqual(seen, set(ContactClass))


@pytest.mark.unit
class TestBoundaryWalk(unittest.TestCase):
    """Arc-length walks from structural corners"""

    def test_walk_along_bottom_side(self):
        cloth = make_flattened(300, 300, seed=0, noise_mm=0.0)
        point, heading = point_along_boundary(cloth, 0, 30.0)
        np.testing.assert_allclose(point, [-120.0, -150.0], atol=1e-9)
        self.assertAlmostEqual(heading, 0.0, places=9)

    def test_walk_from_second_corner_turns_left(self):
        cloth = make_flattened(300, 300, seed=0, noise_mm=0.0)
        _, heading = point_along_boundary(cloth, 1, 50.0)
        self.assertAlmostEqual(heading, math.pi / 2, places=9)


@pytest.mark.unit
class TestClothText(unittest.TestCase):
    """Outline files"""

    def test_save_and_load(self):
        cloth = make_crumpled(300, 200, severity=0.4, seed=9)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'cloth.txt')
            save_cloth(cloth, path)
            loaded = load_cloth(path)
        np.testing.assert_array_equal(loaded.boundary, cloth.boundary)
        self.assertEqual(loaded.corner_indices, cloth.corner_indices)

    def test_bad_header_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'cloth.txt')
            with open(path, 'w', encoding='utf-8') as handle:
                handle.write("POLY 3\n0 0\n1 0\n0 1\n")
            with self.assertRaises(InvalidArgumentError):
                load_cloth(path)

    def test_translated_keeps_corners(self):
        cloth = make_flattened(100, 100, seed=1)
        moved = cloth.translated(10.0, -5.0)
        np.testing.assert_allclose(moved.corners, cloth.corners + [10.0, -5.0])
        self.assertIsInstance(moved, ClothEdge)


if __name__ == '__main__':
    unittest.main()
