"""Orchestration of study runs: work scheduling, caching and result files."""
import hashlib
import json
import logging
import tempfile
import time
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

from gqd import __version__
from gqd.exceptions import DomainError
from gqd.export import (
    SCHEMA_VERSION,
    SWEEP_COLUMNS,
    csv_text,
    derivative_csv,
    fit_to_dict,
    format_label,
    json_text,
    load_series,
    series_to_dict,
    significant,
    sweep_csv,
    write_atomic,
)
from gqd.gqd_engine import OptimizerConfig
from gqd.quantum_core import DEGENERACY_TOLERANCE
from gqd.spin_model import (
    ChainParams,
    anisotropy_from_theta,
    classify_phase,
    factorizing_field,
)
from gqd.sweep_analysis import (
    assemble_series,
    derivative_peaks,
    evaluate_point,
    extrapolate_critical_point,
    field_grid,
    first_order_boundary,
    fit_exponential_scaling,
    parallel_map,
    second_order_point,
)

logger = logging.getLogger(__name__)

MODES = ("point", "sweep", "scan", "fit")
FORMATS = ("csv", "json")
SUDDEN_CHANGE_KEYS = ("jump_factor", "absolute_floor", "fidelity_threshold")


@dataclass(frozen=True)
class RunConfig:
    mode: str
    sizes: tuple = ()
    theta_degrees: tuple = ()
    gamma: float = None
    coupling: float = 1.0
    h: float = None
    h_range: tuple = None
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    output_dir: str = "results"
    formats: tuple = FORMATS
    wrap_pair: bool = False
    inputs: tuple = ()
    degeneracy_tolerance: float = DEGENERACY_TOLERANCE
    sudden_change: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}, got {self.mode!r}")
        unknown = set(self.formats) - set(FORMATS)
        if unknown:
            raise DomainError(f"unknown output formats {sorted(unknown)}")
        unknown = set(self.sudden_change) - set(SUDDEN_CHANGE_KEYS)
        if unknown:
            raise DomainError(f"unknown sudden-change thresholds {sorted(unknown)}")
        if not self.degeneracy_tolerance > 0:
            raise DomainError(
                f"degeneracy_tolerance must be positive, got {self.degeneracy_tolerance}"
            )

    def chains(self):
        """(theta in degrees or None, gamma) pairs selected by the config."""
        if self.theta_degrees:
            return [(theta, anisotropy_from_theta(theta)) for theta in self.theta_degrees]
        if self.gamma is None:
            raise DomainError("either theta_degrees or gamma is required")
        return [(None, self.gamma)]

    def grid(self):
        if self.h_range is None:
            raise DomainError(f"mode {self.mode!r} needs an h range")
        return field_grid(*self.h_range)

    def to_dict(self):
        return {
            "mode": self.mode,
            "chain": {
                "theta_degrees": list(self.theta_degrees),
                "gamma": self.gamma,
                "coupling": self.coupling,
                "h": self.h,
                "h_range": list(self.h_range) if self.h_range is not None else None,
                "sizes": list(self.sizes),
            },
            "optimizer": self.optimizer.as_dict(),
            "output": {"dir": str(self.output_dir), "formats": list(self.formats)},
            "wrap_pair": self.wrap_pair,
            "inputs": [str(path) for path in self.inputs],
            "analysis": {
                "degeneracy_tolerance": self.degeneracy_tolerance,
                "sudden_change": dict(sorted(self.sudden_change.items())),
            },
        }

    @classmethod
    def from_dict(cls, data):
        chain = data.get("chain", {})
        output = data.get("output", {})
        h_range = chain.get("h_range")
        analysis = data.get("analysis", {})
        return cls(
            mode=data["mode"],
            sizes=tuple(int(size) for size in chain.get("sizes", ())),
            theta_degrees=tuple(float(theta) for theta in chain.get("theta_degrees", ())),
            gamma=chain.get("gamma"),
            coupling=float(chain.get("coupling", 1.0)),
            h=chain.get("h"),
            h_range=tuple(float(value) for value in h_range) if h_range is not None else None,
            optimizer=OptimizerConfig(**data.get("optimizer", {})),
            output_dir=output.get("dir", "results"),
            formats=tuple(output.get("formats", FORMATS)),
            wrap_pair=bool(data.get("wrap_pair", False)),
            inputs=tuple(data.get("inputs", ())),
            degeneracy_tolerance=float(
                analysis.get("degeneracy_tolerance", DEGENERACY_TOLERANCE)
            ),
            sudden_change=dict(analysis.get("sudden_change", {})),
        )

    def content_hash(self):
        """Digest of everything that determines the payload."""
        echo = self.to_dict()
        echo.pop("output")
        echo["formats"] = sorted(self.formats)
        echo["version"] = __version__
        echo["input_digests"] = [
            hashlib.sha256(Path(path).read_bytes()).hexdigest() for path in self.inputs
        ]
        canonical = json.dumps(echo, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def run_directory(self):
        return Path(self.output_dir) / f"{self.mode}-{self.content_hash()[:12]}"


@dataclass
class ResultEnvelope:
    config: dict
    tool_version: str
    seed: int
    wall_time: float
    payload: dict
    files: list = field(default_factory=list)
    directory: str = ""
    cached: bool = False
    schema_version: int = SCHEMA_VERSION

    def to_dict(self):
        return {
            "schema_version": self.schema_version,
            "tool_version": self.tool_version,
            "seed": self.seed,
            "wall_time": self.wall_time,
            "config": self.config,
            "files": self.files,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, data, directory="", cached=False):
        return cls(
            config=data["config"],
            tool_version=data["tool_version"],
            seed=data["seed"],
            wall_time=data["wall_time"],
            payload=data["payload"],
            files=data.get("files", []),
            directory=directory,
            cached=cached,
            schema_version=data.get("schema_version", SCHEMA_VERSION),
        )


def prepare_run_directory(config):
    """Create the run directory and prove it is writable before any physics runs."""
    directory = config.run_directory()
    directory.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryFile(dir=directory):
        pass
    return directory


def _execute(config, force, compute):
    directory = prepare_run_directory(config)
    envelope_path = directory / "envelope.json"
    if envelope_path.exists() and not force:
        logger.info("results for this configuration exist in %s; skipping", directory)
        data = json.loads(envelope_path.read_text(encoding="utf-8"))
        return ResultEnvelope.from_dict(data, directory=str(directory), cached=True)

    started = time.perf_counter()
    payload, files = compute(directory)
    envelope = ResultEnvelope(
        config=config.to_dict(),
        tool_version=__version__,
        seed=config.optimizer.seed,
        wall_time=round(time.perf_counter() - started, 3),
        payload=payload,
        files=[path.name for path in files],
        directory=str(directory),
    )
    write_atomic(envelope_path, json_text(envelope.to_dict()))
    return envelope


def _chain_label(theta, gamma):
    if theta is not None:
        return f"theta{format_label(theta)}"
    return f"gamma{format_label(gamma)}"


def _evaluate_sweeps(config, workers):
    """All (gamma, L, h) work items on one pool, regrouped into series."""
    grid = config.grid()
    groups = []
    for theta, gamma in config.chains():
        for size in config.sizes:
            groups.append((theta, ChainParams(size, gamma, grid[0], config.coupling)))

    items = [params.with_field(h) for _, params in groups for h in grid]
    logger.info(
        "scheduling %d work items (%d series x %d fields) on %d worker(s)",
        len(items),
        len(groups),
        len(grid),
        workers,
    )
    evaluations = parallel_map(
        partial(
            evaluate_point,
            opt=config.optimizer,
            wrap_pair=config.wrap_pair,
            degeneracy_tolerance=config.degeneracy_tolerance,
        ),
        items,
        workers,
    )
    series = []
    for index, (theta, params) in enumerate(groups):
        chunk = evaluations[index * len(grid) : (index + 1) * len(grid)]
        series.append((theta, assemble_series(params, grid, chunk, theta)))
    return series


def _series_summary(series, sudden_change):
    summary = {"first_order_boundary": None, "second_order_point": None, "derivative_peak": None}
    if len(series.grid) >= 4:
        boundary = first_order_boundary(series, **sudden_change)
        summary["first_order_boundary"] = significant(boundary)
    if len(series.grid) >= 3:
        maximum = second_order_point(series)
        summary["second_order_point"] = {
            "h_max": significant(maximum.h_max),
            "value": significant(maximum.value),
            "at_boundary": maximum.at_boundary,
        }
        peaks = derivative_peaks(series, "nn_pair_sum")
        summary["derivative_peak"] = significant(peaks[-1]) if peaks else None
    return summary


def run_point(config, force=False):
    if config.mode != "point":
        raise DomainError(f"run_point needs mode 'point', got {config.mode!r}")
    chains = config.chains()
    if len(chains) != 1 or len(config.sizes) != 1 or config.h is None:
        raise DomainError("point mode needs one size, one anisotropy and a scalar h")
    (theta, gamma), size = chains[0], config.sizes[0]
    params = ChainParams(size, gamma, float(config.h), config.coupling)

    def compute(directory):
        evaluation = evaluate_point(
            params, config.optimizer, config.wrap_pair, config.degeneracy_tolerance
        )
        ground, triple = evaluation.ground, evaluation.triple
        payload = {
            "schema_version": SCHEMA_VERSION,
            "num_sites": size,
            "anisotropy": significant(gamma),
            "theta_degrees": theta,
            "coupling": significant(config.coupling),
            "h": significant(params.field),
            "phase": classify_phase(gamma, params.field),
            "ground_energy": significant(ground.energy),
            "gap": significant(ground.gap_to_next),
            "levels": [significant(level) for level in ground.levels],
            "degenerate": ground.degenerate,
            "total_gqd": significant(triple.total_gqd),
            "nn_pair_sum": significant(triple.nn_pair_sum),
            "residual": significant(triple.residual),
            "monogamy_violated": triple.monogamy_violated,
            "pairs": [[i, j, significant(value)] for i, j, value in triple.pair_values],
        }
        files = []
        if "json" in config.formats:
            files.append(write_atomic(directory / "point.json", json_text(payload)))
        if "csv" in config.formats:
            row = [
                params.field,
                triple.total_gqd,
                triple.nn_pair_sum,
                triple.residual,
                ground.energy,
                1.0,
                ground.degenerate,
            ]
            files.append(write_atomic(directory / "point.csv", csv_text(SWEEP_COLUMNS, [row])))
        return payload, files

    return _execute(config, force, compute)


def run_sweep(config, workers=1, force=False):
    if config.mode != "sweep":
        raise DomainError(f"run_sweep needs mode 'sweep', got {config.mode!r}")
    if not config.sizes:
        raise DomainError("at least one size is required")

    def compute(directory):
        payload = {"schema_version": SCHEMA_VERSION, "series": []}
        files = []
        for theta, series in _evaluate_sweeps(config, workers):
            stem = f"sweep_{_chain_label(theta, series.params.anisotropy)}_L{series.params.num_sites}"
            document = series_to_dict(series)
            if "csv" in config.formats:
                files.append(write_atomic(directory / f"{stem}.csv", sweep_csv(series)))
                if len(series.grid) >= 3:
                    files.append(
                        write_atomic(directory / f"derivative_{stem}.csv", derivative_csv(series))
                    )
            if "json" in config.formats:
                files.append(write_atomic(directory / f"{stem}.json", json_text(document)))
            document["name"] = stem
            document["summary"] = _series_summary(series, config.sudden_change)
            payload["series"].append(document)
        return payload, files

    return _execute(config, force, compute)


SCAN_COLUMNS = (
    "theta_deg",
    "gamma",
    "L",
    "h_first_order",
    "h_second_order",
    "second_order_at_boundary",
    "h_factorizing",
    "h_derivative_peak",
)


def run_scan(config, workers=1, force=False):
    """Phase-diagram estimates for every (theta or gamma, L) of the config."""
    if config.mode != "scan":
        raise DomainError(f"run_scan needs mode 'scan', got {config.mode!r}")
    if not config.sizes:
        raise DomainError("at least one size is required")

    def compute(directory):
        rows = []
        for theta, series in _evaluate_sweeps(config, workers):
            summary = _series_summary(series, config.sudden_change)
            maximum = summary["second_order_point"] or {}
            gamma = series.params.anisotropy
            rows.append(
                {
                    "theta_deg": theta,
                    "gamma": significant(gamma),
                    "L": series.params.num_sites,
                    "h_first_order": summary["first_order_boundary"],
                    "h_second_order": maximum.get("h_max"),
                    "second_order_at_boundary": maximum.get("at_boundary"),
                    "h_factorizing": significant(factorizing_field(gamma)),
                    "h_derivative_peak": summary["derivative_peak"],
                }
            )
        payload = {"schema_version": SCHEMA_VERSION, "rows": rows}
        files = []
        if "csv" in config.formats:
            table = [[row[column] for column in SCAN_COLUMNS] for row in rows]
            files.append(write_atomic(directory / "scan.csv", csv_text(SCAN_COLUMNS, table)))
        if "json" in config.formats:
            files.append(write_atomic(directory / "scan.json", json_text(payload)))
        return payload, files

    return _execute(config, force, compute)


def critical_points(series_list):
    """(L, h_c) from the refined pair-sum maximum of each series."""
    anisotropies = {round(series.params.anisotropy, 9) for series in series_list}
    couplings = {round(series.params.coupling, 9) for series in series_list}
    if len(anisotropies) > 1 or len(couplings) > 1:
        raise DomainError(
            f"input series mix anisotropies {sorted(anisotropies)} or couplings {sorted(couplings)}"
        )
    sizes = [series.params.num_sites for series in series_list]
    if len(set(sizes)) != len(sizes):
        raise DomainError(f"input series repeat sizes: {sorted(sizes)}")
    if len(series_list) < 4:
        raise DomainError(f"a scaling fit needs at least four series, got {len(series_list)}")

    points = []
    for series in sorted(series_list, key=lambda item: item.params.num_sites):
        maximum = second_order_point(series)
        if maximum.at_boundary:
            logger.warning(
                "pair-sum maximum of L=%d lies on the grid boundary at h=%g",
                series.params.num_sites,
                maximum.h_max,
            )
        points.append((series.params.num_sites, maximum.h_max))
    return points


def run_fit(config, force=False):
    if config.mode != "fit":
        raise DomainError(f"run_fit needs mode 'fit', got {config.mode!r}")
    if len(config.inputs) < 4:
        raise DomainError(f"a scaling fit needs at least four series, got {len(config.inputs)}")
    series_list = [load_series(path) for path in config.inputs]
    points = critical_points(series_list)

    def compute(directory):
        fit = fit_exponential_scaling(points)
        anisotropy = series_list[0].params.anisotropy
        thetas = {series.theta_degrees for series in series_list}
        payload = fit_to_dict(fit)
        payload["anisotropy"] = significant(anisotropy)
        payload["theta_degrees"] = thetas.pop() if len(thetas) == 1 else None
        payload["extrapolated_critical_point"] = significant(extrapolate_critical_point(fit))
        files = []
        if "json" in config.formats:
            files.append(write_atomic(directory / "fit.json", json_text(payload)))
        if "csv" in config.formats:
            files.append(
                write_atomic(
                    directory / "critical_points.csv", csv_text(("L", "h_c"), fit.points_used)
                )
            )
        return payload, files

    return _execute(config, force, compute)


def run(config, workers=1, force=False):
    if config.mode == "point":
        return run_point(config, force)
    if config.mode == "sweep":
        return run_sweep(config, workers, force)
    if config.mode == "scan":
        return run_scan(config, workers, force)
    return run_fit(config, force)

