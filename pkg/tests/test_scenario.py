"""
Unit tests for scenario files
"""

import os
import sys
import tempfile
import unittest

import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from config import Config
from src.errors import ConfigError
from src.scenario import (
    ScenarioConfig,
    load_scenario,
    parse_scenario,
    save_scenario,
    serialize_scenario,
)


@pytest.mark.unit
class TestScenarioFiles(unittest.TestCase):
    """Parsing, validation and round trips"""

    def test_empty_file_gives_defaults(self):
        cfg = parse_scenario('')
        self.assertEqual(cfg, ScenarioConfig())
        self.assertEqual(cfg.seed, Config.DEFAULT_SEED)
        self.assertEqual(cfg.control.kpt, Config.ALIGN_KPT)

    def test_partial_sections_override_defaults(self):
        cfg = parse_scenario("[cloth]\nconfiguration = crumpled\nseverity = 0.6\n\n[episode]\nslide_speed_mm_s = 30\n")
        self.assertEqual(cfg.cloth.configuration, 'crumpled')
        self.assertEqual(cfg.cloth.severity, 0.6)
        self.assertEqual(cfg.episode.slide_speed_mm_s, 30.0)
        self.assertEqual(cfg.cloth.width_mm, Config.CLOTH_WIDTH_MM)

    def test_round_trip(self):
        cfg = parse_scenario("[scenario]\nseed = 17\nout_dir = results\n\n[training]\nl2 = 0.00123\n\n"
                             "[dataset]\nn_pose_samples = 400\n")
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'scenario.ini')
            save_scenario(cfg, path)
            loaded = load_scenario(path)
        self.assertEqual(loaded, cfg)
        self.assertEqual(loaded.out_dir, 'results')
        self.assertEqual(serialize_scenario(loaded), serialize_scenario(cfg))

    def test_defaults_round_trip_keeps_empty_optional(self):
        cfg = parse_scenario(serialize_scenario(ScenarioConfig()))
        self.assertIsNone(cfg.dataset.n_pose_samples)

    def test_misspelled_key_is_named(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_scenario("[episode]\nslide_sped_mm_s = 20\n")
        self.assertIn('episode.slide_sped_mm_s', str(ctx.exception))

    def test_unknown_section_is_named(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_scenario("[camera]\nfps = 30\n")
        self.assertIn('camera', str(ctx.exception))

    def test_out_of_range_value(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_scenario("[episode]\ncontrol_rate_hz = 500\n")
        self.assertIn('episode.control_rate_hz', str(ctx.exception))

    def test_unparseable_value(self):
        with self.assertRaises(ConfigError):
            parse_scenario("[cloth]\nwidth_mm = wide\n")

    def test_literal_choices(self):
        with self.assertRaises(ConfigError):
            parse_scenario("[render]\ntexture_id = tartan\n")

    def test_version_mismatch(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_scenario(f"[scenario]\nversion = {Config.SCENARIO_VERSION + 1}\n")
        self.assertIn('scenario.version', str(ctx.exception))

    def test_malformed_file(self):
        with self.assertRaises(ConfigError):
            parse_scenario("seed = 3\n")

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            load_scenario('/nonexistent/scenario.ini')


if __name__ == '__main__':
    unittest.main()
