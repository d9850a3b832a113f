"""
Unit tests for the CLI module
"""

import unittest
import tempfile
import os
import sys
import io
import math
from unittest.mock import Mock, patch

import pytest

# Add project root to path for imports
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

import cli
from src.errors import ConfigError, DatasetWriteError, InvalidDatasetError, InvalidModelError
from src.scenario import ScenarioConfig


@pytest.mark.cli
class TestCLI(unittest.TestCase):
    """Test suite for the CLI plumbing"""

    def run_main(self, argv):
        captured_output = io.StringIO()
        with patch('sys.stdout', captured_output):
            code = cli.main(argv)
        return code, captured_output.getvalue()

    def test_argument_parser_setup(self):
        """Every subcommand accepts the common flags"""
        for command in ('gen-data', 'eval-pose', 'run', 'bench', 'workspace'):
            args = cli.parse_args([command, '--seed', '4', '--out', 'runs', '--config', 'scenario.ini'])
            self.assertEqual(args.command, command)
            self.assertEqual(args.seed, 4)
            self.assertEqual(args.out, 'runs')
            self.assertEqual(args.config, 'scenario.ini')

        args = cli.parse_args(['train', '--kind', 'regressor', '--model-out', 'r.model'])
        self.assertEqual(args.kind, 'regressor')
        self.assertEqual(args.model_out, 'r.model')
        self.assertIsNone(args.seed)

        args = cli.parse_args(['bench', '--trials', '2'])
        self.assertEqual(args.trials, 2)

    def test_train_requires_kind(self):
        with patch('sys.stderr', io.StringIO()):
            with self.assertRaises(SystemExit):
                cli.parse_args(['train'])

    def test_main_no_command_shows_help(self):
        """Help is printed and the exit code is success"""
        code, output = self.run_main([])
        self.assertEqual(code, cli.EXIT_OK)
        self.assertIn("usage:", output)
        self.assertIn("Cloth-edge sliding simulator CLI", output)

    def test_data_errors_exit_three(self):
        for exc in (ConfigError("bad key"), InvalidDatasetError("empty"), InvalidModelError("nan")):
            failing = Mock(side_effect=exc)
            with patch.dict(cli.COMMANDS, {'workspace': failing}):
                code, output = self.run_main(['workspace'])
            self.assertEqual(code, cli.EXIT_DATA)
            self.assertIn("Error:", output)

    def test_environment_errors_exit_two(self):
        for exc in (DatasetWriteError("read-only"), FileNotFoundError("missing.model")):
            failing = Mock(side_effect=exc)
            with patch.dict(cli.COMMANDS, {'run': failing}):
                code, _ = self.run_main(['run'])
            self.assertEqual(code, cli.EXIT_ENVIRONMENT)

    def test_scenario_overrides(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'scenario.ini')
            with open(path, 'w', encoding='utf-8') as handle:
                handle.write("[scenario]\nseed = 3\nout_dir = from_file\n\n[episode]\nslide_speed_mm_s = 20\n")
            cfg = cli._scenario(cli.parse_args(['run', '--config', path]))
            self.assertEqual((cfg.seed, cfg.out_dir), (3, 'from_file'))
            cfg = cli._scenario(cli.parse_args(['run', '--config', path, '--seed', '9', '--out', 'elsewhere']))
            self.assertEqual((cfg.seed, cfg.out_dir), (9, 'elsewhere'))
            self.assertEqual(cfg.episode.slide_speed_mm_s, 20.0)

    def test_split_is_seeded_and_complete(self):
        items = list(range(50))
        train, validation = cli._split(items, 0.2, seed=1)
        self.assertEqual(len(validation), 10)
        self.assertEqual(sorted(train + validation), items)
        self.assertEqual(cli._split(items, 0.2, seed=1), (train, validation))
        self.assertEqual(cli._split(items, 0.0, seed=1), (items, []))

    def test_resolve(self):
        self.assertEqual(cli._resolve('out', 'models/c.model'), os.path.join('out', 'models/c.model'))
        absolute = os.path.abspath('x.model')
        self.assertEqual(cli._resolve('out', absolute), absolute)

    def test_gripper_config_from_scenario(self):
        gripper = cli._gripper_config(ScenarioConfig())
        self.assertAlmostEqual(gripper.abduction_range_rad, math.radians(30.0))
        self.assertEqual(gripper.rail_span_mm, 160.0)

    def test_format(self):
        self.assertEqual(cli._fmt(float('nan')), 'nan')
        self.assertEqual(cli._fmt(0.12345), '0.1235')


if __name__ == '__main__':
    unittest.main()
