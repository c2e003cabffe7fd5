import json
import logging
import os
import tempfile
import unittest
from io import StringIO
from pathlib import Path

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, tag


class StudyCommandTest(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)

    def call(self, *args):
        stdout = StringIO()
        call_command(*args, "--out", self.directory.name, "--workers", "1", stdout=stdout)
        return stdout.getvalue()

    def test_point(self):
        output = self.call("point", "--theta-deg", "60", "--h", "0.8", "--sizes", "3", "--starts", "4")

        self.assertIn("Wrote 2 file(s)", output)
        self.assertIn("L=3", output)
        self.assertIn("phase=1A", output)
        self.assertIn("degenerate=False", output)

    def test_point_is_cached(self):
        args = ("point", "--gamma", "0.5", "--h", "1.2", "--sizes", "2", "--starts", "2")
        self.call(*args)

        self.assertIn("Up to date", self.call(*args))
        self.assertIn("Wrote", self.call(*args, "--force"))

    def test_usage_errors(self):
        for args in [
            ("point", "--theta-deg", "120", "--h", "0.5", "--sizes", "4"),
            ("point", "--theta-deg", "30", "--sizes", "4"),
            ("sweep", "--theta-deg", "30", "--gamma", "0.5", "--sizes", "4"),
            ("sweep", "--theta-deg", "30", "--sizes", "20"),
            ("fit", "missing.json"),
        ]:
            with self.subTest(args=args):
                with self.assertRaises(CommandError) as caught:
                    self.call(*args)

                self.assertEqual(caught.exception.returncode, 2)

    def test_sweep_writes_series_files(self):
        output = self.call(
            "sweep",
            "--theta-deg", "45",
            "--sizes", "2,3",
            "--h-range", "0.9", "1.1", "0.1",
            "--starts", "2",
            "--format", "csv",
        )
        run_directory = next(Path(self.directory.name).glob("sweep-*"))

        self.assertIn("sweep_theta45_L2", output)
        self.assertEqual(
            sorted(path.name for path in run_directory.glob("sweep_*.csv")),
            ["sweep_theta45_L2.csv", "sweep_theta45_L3.csv"],
        )
        self.assertEqual(
            sorted(path.name for path in run_directory.glob("derivative_*.csv")),
            ["derivative_sweep_theta45_L2.csv", "derivative_sweep_theta45_L3.csv"],
        )

    def test_config_file(self):
        config = Path(self.directory.name) / "config.json"
        config.write_text(
            json.dumps(
                {
                    "mode": "point",
                    "chain": {"theta_degrees": [30], "h": 0.2, "sizes": [3]},
                    "optimizer": {"starts": 2},
                }
            ),
            encoding="utf-8",
        )

        self.assertIn("phase=1B", self.call("point", "--config", str(config)))
        with self.assertRaises(CommandError) as caught:
            self.call("sweep", "--config", str(config))
        self.assertEqual(caught.exception.returncode, 2)

    def test_rerun_from_echoed_config(self):
        self.call("point", "--theta-deg", "45", "--h", "0.6", "--sizes", "3", "--starts", "3")
        run_directory = next(Path(self.directory.name).glob("point-*"))
        first = json.loads((run_directory / "envelope.json").read_text(encoding="utf-8"))
        echo = Path(self.directory.name) / "echo.json"
        echo.write_text(json.dumps(first["config"]), encoding="utf-8")

        self.assertIn("Wrote", self.call("point", "--config", str(echo), "--force"))
        second = json.loads((run_directory / "envelope.json").read_text(encoding="utf-8"))
        self.assertEqual(second["config"], first["config"])
        self.assertEqual(second["payload"], first["payload"])


class LoggingSettingsTest(SimpleTestCase):
    @unittest.skipIf("GQD_LOG_LEVEL" in os.environ, "log level set from the environment")
    def test_test_runs_only_report_warnings(self):
        self.assertTrue(settings.TESTING)
        self.assertEqual(settings.LOGGING["loggers"]["gqd"]["level"], "WARNING")
        self.assertFalse(logging.getLogger("gqd.runner").isEnabledFor(logging.INFO))


@tag("slow")
class ScalingPipelineTest(SimpleTestCase):
    def test_sweep_then_fit(self):
        with tempfile.TemporaryDirectory() as directory:
            options = ("--out", directory, "--workers", "4", "--starts", "4")
            call_command(
                "sweep",
                "--theta-deg", "60",
                "--sizes", "3-8",
                "--h-range", "0.6", "1.4", "0.02",
                "--format", "json",
                *options,
                stdout=StringIO(),
            )
            inputs = sorted(str(path) for path in Path(directory).glob("sweep-*/sweep_*.json"))
            call_command("fit", *inputs, *options, stdout=StringIO())
            fit_file = next(Path(directory).glob("fit-*/fit.json"))
            fit = json.loads(fit_file.read_text(encoding="utf-8"))

        self.assertEqual(len(inputs), 6)
        self.assertTrue(fit["converged"])
        self.assertLess(fit["amplitude"], 0.0)
        self.assertGreater(fit["decay_length"], 0.0)
        self.assertAlmostEqual(fit["asymptote"], 1.02, delta=0.12)
