import json
import math
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from gqd.exceptions import DomainError
from gqd.export import json_text, series_to_dict
from gqd.gqd_engine import OptimizerConfig
from gqd.runner import (
    SCAN_COLUMNS,
    ResultEnvelope,
    RunConfig,
    run,
    run_fit,
    run_point,
    run_scan,
    run_sweep,
)
from gqd.spin_model import ChainParams
from gqd.sweep_analysis import SweepPoint, SweepSeries, field_grid

FAST = OptimizerConfig(starts=4, seed=0)


def critical_field(size, amplitude=-1.033, decay=2.5666, asymptote=0.955):
    return amplitude * math.exp(-size / decay) + asymptote


def write_parabola_series(directory, size, anisotropy=0.7071067811865476, theta=45.0):
    """Sweep file whose pair sum peaks at ``critical_field(size)``."""
    grid = field_grid(0.0, 1.5, 0.01)
    h_c = critical_field(size)
    points = tuple(
        SweepPoint(
            h=h,
            total_gqd=0.5,
            nn_pair_sum=0.3 - (h - h_c) ** 2,
            residual=0.2 + (h - h_c) ** 2,
            ground_energy=-float(size),
            fidelity_to_prev=1.0,
            degenerate=False,
        )
        for h in grid
    )
    series = SweepSeries(ChainParams(size, anisotropy, grid[0]), grid, points, theta)
    path = Path(directory) / f"sweep_L{size}.json"
    path.write_text(json_text(series_to_dict(series)), encoding="utf-8")
    return str(path)


class RunConfigTest(SimpleTestCase):
    def test_dict_round_trip(self):
        config = RunConfig(
            mode="sweep",
            sizes=(3, 4),
            theta_degrees=(30.0, 60.0),
            h_range=(0.0, 1.0, 0.1),
            optimizer=OptimizerConfig(starts=6, seed=3),
            wrap_pair=True,
            sudden_change={"fidelity_threshold": 0.95},
        )

        self.assertEqual(RunConfig.from_dict(json.loads(json.dumps(config.to_dict()))), config)

    def test_hash_ignores_output_location(self):
        config = RunConfig(mode="point", sizes=(4,), theta_degrees=(30.0,), h=0.5)
        moved = RunConfig(
            mode="point", sizes=(4,), theta_degrees=(30.0,), h=0.5, output_dir="elsewhere"
        )
        reseeded = RunConfig(
            mode="point",
            sizes=(4,),
            theta_degrees=(30.0,),
            h=0.5,
            optimizer=OptimizerConfig(seed=1),
        )

        self.assertEqual(config.content_hash(), moved.content_hash())
        self.assertNotEqual(config.content_hash(), reseeded.content_hash())
        self.assertEqual(config.run_directory().name, f"point-{config.content_hash()[:12]}")

    def test_invalid_configs(self):
        with self.assertRaises(DomainError):
            RunConfig(mode="plot")
        with self.assertRaises(DomainError):
            RunConfig(mode="point", formats=("xml",))
        with self.assertRaises(DomainError):
            RunConfig(mode="sweep", sudden_change={"slope": 1.0})
        with self.assertRaises(DomainError):
            RunConfig(mode="sweep", sizes=(3,)).chains()


class RunPointTest(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)

    def point_config(self, theta, h, size=4, **kwargs):
        return RunConfig(
            mode="point",
            sizes=(size,),
            theta_degrees=(theta,),
            h=h,
            optimizer=FAST,
            output_dir=self.directory.name,
            **kwargs,
        )

    def test_degenerate_on_factorizing_circle(self):
        envelope = run_point(self.point_config(75.0, math.cos(math.radians(75))))
        payload = envelope.payload

        self.assertTrue(payload["degenerate"])
        self.assertEqual(payload["phase"], "factorized")
        self.assertLess(payload["gap"], 1e-8)
        self.assertGreaterEqual(payload["total_gqd"], 0.0)

    def test_polarized_chain_is_nearly_classical(self):
        envelope = run_point(self.point_config(90.0, 1000.0, size=3))

        self.assertLess(envelope.payload["total_gqd"], 1e-4)
        self.assertFalse(envelope.payload["degenerate"])
        self.assertEqual(envelope.payload["phase"], "2")

    def test_files_and_envelope(self):
        config = self.point_config(60.0, 0.5)
        envelope = run_point(config)
        directory = Path(envelope.directory)

        self.assertEqual(directory, config.run_directory())
        self.assertEqual(sorted(envelope.files), ["point.csv", "point.json"])
        stored = json.loads((directory / "envelope.json").read_text(encoding="utf-8"))
        self.assertEqual(stored["schema_version"], 1)
        self.assertEqual(stored["seed"], 0)
        self.assertEqual(stored["config"], config.to_dict())
        self.assertEqual(
            json.loads((directory / "point.json").read_text(encoding="utf-8")), envelope.payload
        )
        self.assertEqual(len(envelope.payload["pairs"]), 3)

    def test_results_are_cached(self):
        config = self.point_config(60.0, 0.5, formats=("json",))
        first = run_point(config)
        second = run_point(config)
        forced = run_point(config, force=True)

        self.assertFalse(first.cached)
        self.assertTrue(second.cached)
        self.assertEqual(second.payload, first.payload)
        self.assertFalse(forced.cached)
        self.assertEqual(forced.payload, first.payload)

    def test_unwritable_output_directory(self):
        blocker = Path(self.directory.name) / "blocker"
        blocker.write_text("not a directory", encoding="utf-8")
        config = RunConfig(
            mode="point",
            sizes=(3,),
            theta_degrees=(60.0,),
            h=0.5,
            optimizer=FAST,
            output_dir=str(blocker),
        )

        with self.assertRaises(OSError):
            run_point(config)

    def test_wrong_mode(self):
        with self.assertRaises(DomainError):
            run_point(RunConfig(mode="sweep", sizes=(3,), theta_degrees=(60.0,)))


class RunSweepTest(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)

    def test_sweep_files(self):
        config = RunConfig(
            mode="sweep",
            sizes=(3,),
            theta_degrees=(60.0,),
            h_range=(0.3, 0.6, 0.1),
            optimizer=OptimizerConfig(starts=2),
            output_dir=self.directory.name,
        )
        envelope = run_sweep(config)
        directory = Path(envelope.directory)

        self.assertEqual(
            sorted(envelope.files),
            ["derivative_sweep_theta60_L3.csv", "sweep_theta60_L3.csv", "sweep_theta60_L3.json"],
        )
        lines = (directory / "sweep_theta60_L3.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(
            lines[0], "h,total_gqd,nn_pair_sum,residual,ground_energy,fidelity_to_prev,degenerate"
        )
        self.assertEqual(len(lines), 5)
        self.assertTrue(lines[1].startswith("0.3,"))
        self.assertTrue(lines[1].endswith(",1,false"))
        document = envelope.payload["series"][0]
        self.assertEqual(document["name"], "sweep_theta60_L3")
        self.assertEqual(document["grid"], [0.3, 0.4, 0.5, 0.6])
        self.assertIn("second_order_point", document["summary"])
        self.assertIn("derivative_peak", document["summary"])
        derivative = (directory / "derivative_sweep_theta60_L3.csv").read_text(encoding="utf-8")
        self.assertEqual(
            derivative.splitlines()[0], "h,d_total_gqd,d_nn_pair_sum,d_residual"
        )
        self.assertEqual(len(derivative.splitlines()), 5)

    def test_gamma_labels(self):
        config = RunConfig(
            mode="sweep",
            sizes=(2, 3),
            gamma=0.5,
            h_range=(0.0, 0.2, 0.1),
            optimizer=OptimizerConfig(starts=2),
            output_dir=self.directory.name,
            formats=("csv",),
        )

        self.assertEqual(
            sorted(run(config).files),
            [
                "derivative_sweep_gamma0.5_L2.csv",
                "derivative_sweep_gamma0.5_L3.csv",
                "sweep_gamma0.5_L2.csv",
                "sweep_gamma0.5_L3.csv",
            ],
        )


class RunScanTest(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)

    def test_scan_table(self):
        config = RunConfig(
            mode="scan",
            sizes=(3, 4),
            theta_degrees=(60.0,),
            h_range=(0.0, 0.6, 0.1),
            optimizer=OptimizerConfig(starts=2),
            output_dir=self.directory.name,
        )
        envelope = run_scan(config)
        rows = envelope.payload["rows"]

        self.assertEqual(sorted(envelope.files), ["scan.csv", "scan.json"])
        self.assertEqual([row["L"] for row in rows], [3, 4])
        for row in rows:
            self.assertEqual(set(row), set(SCAN_COLUMNS))
            self.assertAlmostEqual(row["h_factorizing"], 0.5)
            self.assertGreaterEqual(row["h_second_order"], 0.0)
            self.assertLessEqual(row["h_second_order"], 0.6)
        lines = (Path(envelope.directory) / "scan.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(lines[0], ",".join(SCAN_COLUMNS))
        self.assertTrue(lines[0].endswith(",h_factorizing,h_derivative_peak"))
        self.assertEqual(len(lines), 3)


class RunFitTest(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)

    def fit_config(self, inputs):
        return RunConfig(mode="fit", inputs=tuple(inputs), output_dir=self.directory.name)

    def test_recovers_extrapolated_critical_point(self):
        inputs = [write_parabola_series(self.directory.name, size) for size in range(3, 9)]
        envelope = run_fit(self.fit_config(inputs))
        payload = envelope.payload

        self.assertAlmostEqual(payload["asymptote"], 0.955, delta=1e-6)
        self.assertAlmostEqual(payload["decay_length"], 2.5666, delta=1e-5)
        self.assertEqual(payload["extrapolated_critical_point"], payload["asymptote"])
        self.assertEqual(payload["theta_degrees"], 45.0)
        self.assertEqual([size for size, _ in payload["points_used"]], list(range(3, 9)))
        self.assertEqual(sorted(envelope.files), ["critical_points.csv", "fit.json"])
        table = (Path(envelope.directory) / "critical_points.csv").read_text(encoding="utf-8")
        self.assertEqual(table.splitlines()[0], "L,h_c")

    def test_mixed_anisotropies(self):
        inputs = [write_parabola_series(self.directory.name, size) for size in range(3, 6)]
        other = Path(self.directory.name) / "other"
        other.mkdir()
        inputs.append(write_parabola_series(other, 6, anisotropy=0.5, theta=30.0))

        with self.assertRaises(DomainError):
            run_fit(self.fit_config(inputs))

    def test_too_few_series(self):
        inputs = [write_parabola_series(self.directory.name, size) for size in range(3, 6)]

        with self.assertRaises(DomainError):
            run_fit(self.fit_config(inputs))

    def test_rejects_other_schema_versions(self):
        inputs = [write_parabola_series(self.directory.name, size) for size in range(3, 7)]
        document = json.loads(Path(inputs[0]).read_text(encoding="utf-8"))
        document["schema_version"] = 2
        Path(inputs[0]).write_text(json.dumps(document), encoding="utf-8")

        with self.assertRaises(DomainError):
            run_fit(self.fit_config(inputs))


class ResultEnvelopeTest(SimpleTestCase):
    def test_dict_round_trip(self):
        envelope = ResultEnvelope(
            config={"mode": "point"},
            tool_version="1.0.0",
            seed=4,
            wall_time=0.25,
            payload={"total_gqd": 0.5},
            files=["point.json"],
        )
        restored = ResultEnvelope.from_dict(envelope.to_dict(), directory="run", cached=True)

        self.assertEqual(restored.payload, envelope.payload)
        self.assertEqual(restored.seed, 4)
        self.assertTrue(restored.cached)
        self.assertEqual(restored.directory, "run")
