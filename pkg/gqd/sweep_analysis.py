"""Field sweeps of the discord correlations and the analysis of their curves."""
import logging
import math
import multiprocessing
from dataclasses import dataclass
from functools import partial

import numpy as np
import scipy.optimize
import scipy.signal

from gqd.exceptions import DomainError, FitError, GQDError, SweepError
from gqd.gqd_engine import OptimizerConfig, correlation_triple
from gqd.quantum_core import DEGENERACY_TOLERANCE, ground_state, state_fidelity
from gqd.spin_model import build_xy_hamiltonian, classify_phase

logger = logging.getLogger(__name__)

QUANTITIES = (
    "total_gqd",
    "nn_pair_sum",
    "residual",
    "ground_energy",
    "fidelity_to_prev",
)

JUMP_FACTOR = 5.0
ABSOLUTE_FLOOR = 1e-3
FIDELITY_THRESHOLD = 0.99

FIT_MAX_ITERATIONS = 200
FIT_GRADIENT_TOLERANCE = 1e-12
FIT_INITIAL_DECAY = 2.0
FIT_CONDITION_LIMIT = 1e14


@dataclass(frozen=True)
class SweepPoint:
    h: float
    total_gqd: float
    nn_pair_sum: float
    residual: float
    ground_energy: float
    fidelity_to_prev: float
    degenerate: bool
    gap: float = 0.0
    phase: str = ""


@dataclass(frozen=True, eq=False)
class PointEvaluation:
    h: float
    ground: object
    triple: object


@dataclass(frozen=True)
class SweepSeries:
    """One curve family sample: fixed chain, varying field.

    ``params.field`` is the first grid value; the field of point ``k`` is
    ``grid[k]``.
    """

    params: object
    grid: tuple
    points: tuple
    theta_degrees: float = None

    def __post_init__(self):
        check_grid(self.grid)
        if len(self.points) != len(self.grid):
            raise DomainError(
                f"{len(self.points)} points for a grid of {len(self.grid)} fields"
            )

    def quantity(self, name):
        if name not in QUANTITIES:
            raise DomainError(f"unknown quantity {name!r}; expected one of {QUANTITIES}")
        return np.array([getattr(point, name) for point in self.points], dtype=float)

    @property
    def grid_array(self):
        return np.asarray(self.grid, dtype=float)


@dataclass(frozen=True)
class SuddenChange:
    h_left: float
    h_right: float
    jump: float
    fidelity_drop: float

    @property
    def midpoint(self):
        return 0.5 * (self.h_left + self.h_right)


@dataclass(frozen=True)
class MaximumEstimate:
    h_max: float
    value: float
    at_boundary: bool


@dataclass(frozen=True)
class ScalingFit:
    amplitude: float
    decay_length: float
    asymptote: float
    rms_residual: float
    points_used: tuple
    converged: bool = True

    def predict(self, size):
        return self.amplitude * math.exp(-size / self.decay_length) + self.asymptote


def check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("field grid must be a non-empty sequence")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("field grid must be strictly increasing")
    return grid


def field_grid(h_min, h_max, step):
    """Uniform grid from h_min to h_max inclusive, rounded to 12 decimals."""
    if not step > 0:
        raise DomainError(f"grid step must be positive, got {step}")
    if h_max < h_min:
        raise DomainError(f"h_max {h_max} is below h_min {h_min}")
    count = int(math.floor((h_max - h_min) / step + 1e-9)) + 1
    return tuple(float(h) for h in np.round(h_min + step * np.arange(count), 12))


def evaluate_point(params, opt=None, wrap_pair=False, degeneracy_tolerance=DEGENERACY_TOLERANCE):
    """Ground state and correlation triple at one field value."""
    try:
        ground = ground_state(build_xy_hamiltonian(params), degeneracy_tolerance)
        triple = correlation_triple(ground.state, opt, wrap_pair)
    except GQDError as exc:
        raise SweepError(params.field, str(exc)) from exc
    logger.debug(
        "L=%d gamma=%.6g h=%.6g: total %.6g, pair sum %.6g",
        params.num_sites,
        params.anisotropy,
        params.field,
        triple.total_gqd,
        triple.nn_pair_sum,
    )
    return PointEvaluation(params.field, ground, triple)


def parallel_map(function, items, workers=1):
    """Ordered map over a bounded process pool; ``workers <= 1`` runs inline."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [function(item) for item in items]
    with multiprocessing.Pool(min(workers, len(items))) as pool:
        return pool.map(function, items, chunksize=1)


def assemble_series(params, grid, evaluations, theta_degrees=None):
    """Attach adjacent-point fidelities in one sequential pass."""
    points = []
    previous = None
    for h, evaluation in zip(grid, evaluations):
        ground, triple = evaluation.ground, evaluation.triple
        if previous is None:
            fidelity = 1.0
        else:
            fidelity = state_fidelity(previous.state, ground.state)
        points.append(
            SweepPoint(
                h=float(h),
                total_gqd=triple.total_gqd,
                nn_pair_sum=triple.nn_pair_sum,
                residual=triple.residual,
                ground_energy=ground.energy,
                fidelity_to_prev=fidelity,
                degenerate=ground.degenerate,
                gap=ground.gap_to_next,
                phase=classify_phase(params.anisotropy, float(h)),
            )
        )
        previous = ground
    return SweepSeries(
        params=params.with_field(grid[0]),
        grid=tuple(float(h) for h in grid),
        points=tuple(points),
        theta_degrees=theta_degrees,
    )


def sweep_field(params, grid, opt=None, wrap_pair=False, workers=1, theta_degrees=None):
    """Evaluate the correlation triple along a field grid.

    Grid points are independent and may run on ``workers`` processes; the
    result does not depend on the worker count.
    """
    grid = tuple(float(h) for h in check_grid(grid))
    opt = opt or OptimizerConfig()
    logger.info(
        "sweeping L=%d gamma=%.6g over %d fields on %d worker(s)",
        params.num_sites,
        params.anisotropy,
        len(grid),
        workers,
    )
    evaluations = parallel_map(
        partial(evaluate_point, opt=opt, wrap_pair=wrap_pair),
        [params.with_field(h) for h in grid],
        workers,
    )
    return assemble_series(params, grid, evaluations, theta_degrees)


def numerical_derivative(series, quantity):
    """Central differences inside the grid, one-sided at both ends."""
    if len(series.grid) < 3:
        raise DomainError("a derivative needs at least three grid points")
    grid = series.grid_array
    slope = np.gradient(series.quantity(quantity), grid, edge_order=1)
    return np.column_stack([grid, slope])


def derivative_peaks(series, quantity="nn_pair_sum", prominence=None):
    """Fields where |dD/dh| peaks, ascending; the last one is the rightmost."""
    derivative = numerical_derivative(series, quantity)
    magnitude = np.abs(derivative[:, 1])
    if prominence is None:
        prominence = max(JUMP_FACTOR * float(np.median(magnitude)), ABSOLUTE_FLOOR)
    peaks, _ = scipy.signal.find_peaks(magnitude, prominence=prominence)
    return [float(derivative[index, 0]) for index in peaks]


def detect_sudden_changes(
    series,
    quantity="total_gqd",
    jump_factor=JUMP_FACTOR,
    absolute_floor=ABSOLUTE_FLOOR,
    fidelity_threshold=FIDELITY_THRESHOLD,
):
    """Adjacent grid pairs where the quantity jumps and the ground state changes.

    A pair is flagged when its jump exceeds both ``jump_factor`` times the
    median adjacent jump and ``absolute_floor``, and the ground-state
    fidelity between the two points is below ``fidelity_threshold``.
    """
    if len(series.grid) < 4:
        raise DomainError("sudden-change detection needs at least four grid points")
    values = series.quantity(quantity)
    deltas = np.diff(values)
    magnitude = np.abs(deltas)
    if not np.any(magnitude > 0):
        return []
    threshold = max(jump_factor * float(np.median(magnitude)), absolute_floor)

    changes = []
    for index, delta in enumerate(deltas):
        fidelity = series.points[index + 1].fidelity_to_prev
        if magnitude[index] > threshold and fidelity < fidelity_threshold:
            changes.append(
                SuddenChange(
                    h_left=series.grid[index],
                    h_right=series.grid[index + 1],
                    jump=float(delta),
                    fidelity_drop=1.0 - fidelity,
                )
            )
    return changes


def first_order_boundary(series, quantity="total_gqd", **thresholds):
    """Midpoint of the rightmost sudden change, or None without one."""
    changes = detect_sudden_changes(series, quantity, **thresholds)
    if not changes:
        return None
    return changes[-1].midpoint


def find_maximum(series, quantity):
    """Grid maximum refined by the parabola through it and its neighbours."""
    if len(series.grid) < 3:
        raise DomainError("locating a maximum needs at least three grid points")
    grid = series.grid_array
    values = series.quantity(quantity)
    index = int(np.argmax(values))
    if index == 0 or index == len(grid) - 1:
        return MaximumEstimate(float(grid[index]), float(values[index]), True)

    h0, h1, h2 = grid[index - 1 : index + 2]
    y0, y1, y2 = values[index - 1 : index + 2]
    numerator = (h1 - h0) ** 2 * (y1 - y2) - (h1 - h2) ** 2 * (y1 - y0)
    denominator = (h1 - h0) * (y1 - y2) - (h1 - h2) * (y1 - y0)
    if denominator == 0:
        return MaximumEstimate(float(h1), float(y1), False)
    h_max = min(max(h1 - 0.5 * numerator / denominator, h0), h2)
    value = (
        y0 * (h_max - h1) * (h_max - h2) / ((h0 - h1) * (h0 - h2))
        + y1 * (h_max - h0) * (h_max - h2) / ((h1 - h0) * (h1 - h2))
        + y2 * (h_max - h0) * (h_max - h1) / ((h2 - h0) * (h2 - h1))
    )
    return MaximumEstimate(float(h_max), float(value), False)


def second_order_point(series):
    """Critical-field estimate: the refined maximum of the pair sum."""
    return find_maximum(series, "nn_pair_sum")


def fit_exponential_scaling(points):
    """Least-squares fit of h_c(L) = a exp(-L / b) + c.

    Levenberg-Marquardt (damped Gauss-Newton) over (a, log b, c), which
    keeps b positive. Starts from c = h_c at the largest L, a = first
    residual, b = 2.
    """
    points = sorted((int(size), float(value)) for size, value in points)
    sizes = np.array([size for size, _ in points], dtype=float)
    values = np.array([value for _, value in points])
    if len(points) < 4:
        raise DomainError(f"a scaling fit needs at least four points, got {len(points)}")
    if len(set(sizes)) != len(sizes):
        raise DomainError("scaling-fit points must have distinct sizes")

    def residuals(parameters):
        amplitude, log_decay, asymptote = parameters
        return amplitude * np.exp(-sizes / math.exp(log_decay)) + asymptote - values

    def jacobian(parameters):
        amplitude, log_decay, _ = parameters
        decay = math.exp(log_decay)
        envelope = np.exp(-sizes / decay)
        return np.column_stack(
            [envelope, amplitude * envelope * sizes / decay, np.ones_like(sizes)]
        )

    asymptote = values[-1]
    start = np.array([values[0] - asymptote, math.log(FIT_INITIAL_DECAY), asymptote])
    result = scipy.optimize.least_squares(
        residuals,
        start,
        jac=jacobian,
        method="lm",
        xtol=1e-15,
        ftol=1e-15,
        gtol=FIT_GRADIENT_TOLERANCE,
        max_nfev=FIT_MAX_ITERATIONS,
    )
    condition = float(np.linalg.cond(result.jac)) if np.all(np.isfinite(result.jac)) else math.inf
    if result.status < 0 or not np.all(np.isfinite(result.x)) or not np.all(
        np.isfinite(result.fun)
    ):
        raise FitError(f"exponential scaling fit failed: {result.message}", condition)
    if condition > FIT_CONDITION_LIMIT and np.max(np.abs(result.fun)) > 1e-12:
        raise FitError("normal equations of the scaling fit are singular", condition)

    amplitude, log_decay, asymptote = (float(value) for value in result.x)
    rms = float(np.sqrt(np.mean(result.fun**2)))
    logger.debug(
        "scaling fit a=%.9g b=%.9g c=%.9g rms=%.3g after %d evaluations",
        amplitude,
        math.exp(log_decay),
        asymptote,
        rms,
        result.nfev,
    )
    return ScalingFit(
        amplitude=amplitude,
        decay_length=math.exp(log_decay),
        asymptote=asymptote,
        rms_residual=rms,
        points_used=tuple(points),
        converged=result.status > 0,
    )


def extrapolate_critical_point(fit):
    return fit.asymptote
