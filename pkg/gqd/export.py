"""CSV and JSON renderings of study results, written atomically."""
import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path

from django.core.serializers.json import DjangoJSONEncoder

from gqd.exceptions import DomainError
from gqd.spin_model import ChainParams
from gqd.sweep_analysis import SweepPoint, SweepSeries, numerical_derivative

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SIGNIFICANT_DIGITS = 12

SWEEP_COLUMNS = (
    "h",
    "total_gqd",
    "nn_pair_sum",
    "residual",
    "ground_energy",
    "fidelity_to_prev",
    "degenerate",
)


def format_number(value):
    return f"{value:.{SIGNIFICANT_DIGITS}g}"


def significant(value):
    """Float rounded to the digits written to disk."""
    if value is None:
        return None
    return float(format_number(value))


def format_cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_number(value)
    if value is None:
        return ""
    return str(value)


def format_label(value):
    """Compact number for file names: 60.0 -> '60', 22.5 -> '22.5'."""
    return f"{value:g}"


def csv_text(header, rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(value) for value in row])
    return buffer.getvalue()


def json_text(data):
    return json.dumps(data, indent=2, cls=DjangoJSONEncoder) + "\n"


def write_atomic(path, text):
    """Write UTF-8 text through a temporary sibling file and a rename."""
    path = Path(path)
    handle = tempfile.NamedTemporaryFile(
        "w",
        encoding="utf-8",
        newline="",
        dir=path.parent,
        prefix=f".{path.name}.",
        delete=False,
    )
    try:
        with handle:
            handle.write(text)
        os.replace(handle.name, path)
    except BaseException:
        Path(handle.name).unlink(missing_ok=True)
        raise
    logger.debug("wrote %s", path)
    return path


def sweep_rows(series):
    return [[getattr(point, column) for column in SWEEP_COLUMNS] for point in series.points]


def sweep_csv(series):
    return csv_text(SWEEP_COLUMNS, sweep_rows(series))


DERIVATIVE_COLUMNS = ("h", "d_total_gqd", "d_nn_pair_sum", "d_residual")


def derivative_csv(series):
    """dD/dh of the three correlation curves on the sweep grid."""
    slopes = [
        numerical_derivative(series, quantity)[:, 1]
        for quantity in ("total_gqd", "nn_pair_sum", "residual")
    ]
    rows = [[h, *(float(slope[index]) for slope in slopes)] for index, h in enumerate(series.grid)]
    return csv_text(DERIVATIVE_COLUMNS, rows)


def point_to_dict(point):
    return {
        "h": significant(point.h),
        "total_gqd": significant(point.total_gqd),
        "nn_pair_sum": significant(point.nn_pair_sum),
        "residual": significant(point.residual),
        "ground_energy": significant(point.ground_energy),
        "fidelity_to_prev": significant(point.fidelity_to_prev),
        "degenerate": point.degenerate,
        "gap": significant(point.gap),
        "phase": point.phase,
    }


def series_to_dict(series):
    params = series.params
    return {
        "schema_version": SCHEMA_VERSION,
        "num_sites": params.num_sites,
        "anisotropy": significant(params.anisotropy),
        "coupling": significant(params.coupling),
        "theta_degrees": series.theta_degrees,
        "grid": [significant(h) for h in series.grid],
        "points": [point_to_dict(point) for point in series.points],
    }


def series_from_dict(data):
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DomainError(f"unsupported sweep schema_version {version!r}")
    try:
        grid = tuple(float(h) for h in data["grid"])
        params = ChainParams(
            num_sites=int(data["num_sites"]),
            anisotropy=float(data["anisotropy"]),
            field=grid[0],
            coupling=float(data.get("coupling", 1.0)),
        )
        points = tuple(
            SweepPoint(
                h=float(point["h"]),
                total_gqd=float(point["total_gqd"]),
                nn_pair_sum=float(point["nn_pair_sum"]),
                residual=float(point["residual"]),
                ground_energy=float(point["ground_energy"]),
                fidelity_to_prev=float(point["fidelity_to_prev"]),
                degenerate=bool(point["degenerate"]),
                gap=float(point.get("gap", 0.0)),
                phase=point.get("phase", ""),
            )
            for point in data["points"]
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise DomainError(f"malformed sweep document: {exc!r}") from exc
    return SweepSeries(params, grid, points, data.get("theta_degrees"))


def load_series(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path} is not a JSON sweep file: {exc}") from exc
    return series_from_dict(data)


def fit_to_dict(fit):
    return {
        "schema_version": SCHEMA_VERSION,
        "model": "h_c(L) = a * exp(-L / b) + c",
        "amplitude": significant(fit.amplitude),
        "decay_length": significant(fit.decay_length),
        "asymptote": significant(fit.asymptote),
        "rms_residual": significant(fit.rms_residual),
        "converged": fit.converged,
        "points_used": [[size, significant(value)] for size, value in fit.points_used],
    }
