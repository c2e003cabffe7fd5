"""Global quantum discord through local-rotation parametrized measurements.

A product measurement is described by one rotation per qubit,

    R_j(theta, phi) = cos(theta) I + i sin(theta) cos(phi) Y + i sin(theta) sin(phi) X,

whose columns are the measured basis of qubit j. The discord is the
minimum over all 2L angles of

    H(p) - sum_j H(p_j) + sum_j S(rho_j) - S(rho),

where p is the outcome distribution of the rotated product measurement
and p_j its single-qubit marginals.
"""
import logging
import math
from dataclasses import asdict, dataclass
from functools import reduce

import numpy as np
import scipy.optimize

from gqd.exceptions import DomainError, NumericError
from gqd.quantum_core import (
    DensityMatrix,
    StateVector,
    multipartite_mutual_information,
    partial_trace,
    reduced_density_matrix,
    shannon_entropy,
    von_neumann_entropy,
)
from gqd.spin_model import IDENTITY, PAULI

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi
NEGATIVE_TOLERANCE = 1e-9
SIMPLEX_STEP = 0.25
STRUCTURED_STARTS = 8

_Z = (0.0, 0.0)
_X = (math.pi / 4, math.pi)
_Y = (math.pi / 4, math.pi / 2)
_XZ = (math.pi / 8, math.pi)


@dataclass(frozen=True)
class OptimizerConfig:
    starts: int = 24
    seed: int = 0
    max_evals: int = 5000
    simplex_tolerance: float = 1e-9

    def __post_init__(self):
        if self.starts < 1:
            raise DomainError(f"starts must be at least 1, got {self.starts}")
        if self.max_evals < 1:
            raise DomainError(f"max_evals must be at least 1, got {self.max_evals}")
        if not self.simplex_tolerance > 0:
            raise DomainError(
                f"simplex_tolerance must be positive, got {self.simplex_tolerance}"
            )

    def as_dict(self):
        return asdict(self)


def _canonical_pair(theta, phi):
    theta = float(theta) % TWO_PI
    phi = float(phi)
    if theta > math.pi:
        # R(theta, phi) == R(2 pi - theta, phi + pi)
        theta = TWO_PI - theta
        phi += math.pi
    phi %= TWO_PI
    if phi >= TWO_PI:
        phi = 0.0
    return theta, phi


@dataclass(frozen=True)
class MeasurementBasis:
    angles: tuple

    @property
    def num_qubits(self):
        return len(self.angles)

    @classmethod
    def from_vector(cls, vector):
        vector = np.asarray(vector, dtype=float)
        return cls(tuple((float(t), float(p)) for t, p in vector.reshape(-1, 2)))

    @classmethod
    def computational(cls, num_qubits):
        return cls((_Z,) * num_qubits)

    @classmethod
    def uniform(cls, num_qubits, theta, phi):
        return cls(((float(theta), float(phi)),) * num_qubits)

    def as_vector(self):
        return np.array(self.angles, dtype=float).ravel()

    def canonical(self):
        """Same measurement with theta in [0, pi] and phi in [0, 2 pi)."""
        return MeasurementBasis(tuple(_canonical_pair(t, p) for t, p in self.angles))

    def rotations(self):
        return [rotation_for_qubit(theta, phi) for theta, phi in self.angles]


@dataclass(frozen=True)
class GQDResult:
    value: float
    optimal_basis: MeasurementBasis
    starts_used: int
    best_objective_history: tuple
    converged: bool


@dataclass(frozen=True)
class CorrelationTriple:
    total_gqd: float
    nn_pair_sum: float
    residual: float
    pair_values: tuple = ()

    @property
    def monogamy_violated(self):
        return self.residual < -NEGATIVE_TOLERANCE


def rotation_for_qubit(theta, phi):
    return (
        math.cos(theta) * IDENTITY
        + 1j * math.sin(theta) * math.cos(phi) * PAULI["y"]
        + 1j * math.sin(theta) * math.sin(phi) * PAULI["x"]
    )


def rotation_operator(basis):
    return reduce(np.kron, basis.rotations())


def _apply_local(tensor, matrices, first_axis=0):
    for offset, matrix in enumerate(matrices):
        axis = first_axis + offset
        tensor = np.moveaxis(np.tensordot(matrix, tensor, axes=([1], [axis])), 0, axis)
    return tensor


def _check_arity(num_qubits, basis):
    if basis.num_qubits != num_qubits:
        raise DomainError(
            f"basis has {basis.num_qubits} angle pairs for a {num_qubits}-qubit state"
        )


def _rotated_density(rho, rotations):
    """R^dagger rho R, applied qubit by qubit."""
    num_qubits = rho.num_qubits
    tensor = rho.entries.reshape([2] * (2 * num_qubits))
    tensor = _apply_local(tensor, [u.conj().T for u in rotations])
    tensor = _apply_local(tensor, [u.T for u in rotations], first_axis=num_qubits)
    return tensor.reshape(2**num_qubits, 2**num_qubits)


def dephase(rho, basis):
    """Apply the measurement channel sum_k P_k rho P_k of a product basis."""
    _check_arity(rho.num_qubits, basis)
    rotation = rotation_operator(basis)
    populations = np.real(np.diag(_rotated_density(rho, basis.rotations())))
    entries = (rotation * populations) @ rotation.conj().T
    return DensityMatrix(rho.num_qubits, (entries + entries.conj().T) / 2)


class DiscordObjective:
    """The bracketed measurement-dependent quantity plus its constant offset.

    Pure states (``StateVector``) are rotated directly, which costs
    O(L 2^L) per evaluation; density matrices go through R^dagger rho R.
    """

    def __init__(self, state):
        self.state = state
        self.num_qubits = state.num_qubits
        self.pure = isinstance(state, StateVector)
        if self.pure:
            local = [reduced_density_matrix(state, [q]) for q in range(self.num_qubits)]
            self.offset = sum(von_neumann_entropy(rho) for rho in local)
        else:
            local = [partial_trace(state, [q]) for q in range(self.num_qubits)]
            self.offset = sum(von_neumann_entropy(rho) for rho in local) - (
                von_neumann_entropy(state)
            )

    def populations(self, rotations):
        if self.pure:
            tensor = self.state.amplitudes.reshape([2] * self.num_qubits)
            rotated = _apply_local(tensor, [u.conj().T for u in rotations])
            return np.abs(rotated.ravel()) ** 2
        return np.real(np.diag(_rotated_density(self.state, rotations)))

    def evaluate(self, basis):
        _check_arity(self.num_qubits, basis)
        populations = self.populations(basis.rotations())
        table = populations.reshape([2] * self.num_qubits)
        marginals = np.array(
            [np.moveaxis(table, q, 0).reshape(2, -1).sum(axis=1) for q in range(self.num_qubits)]
        )
        return float(
            shannon_entropy(populations) - shannon_entropy(marginals).sum() + self.offset
        )

    def __call__(self, vector):
        return self.evaluate(MeasurementBasis.from_vector(vector))


def gqd_objective(state, basis):
    """Discord objective for one measurement basis, in bits."""
    return DiscordObjective(state).evaluate(basis)


def mutual_information_drop(state, basis):
    """I(rho) - I(Phi(rho)), evaluated literally through the measurement channel."""
    rho = state.projector() if isinstance(state, StateVector) else state
    _check_arity(rho.num_qubits, basis)
    return multipartite_mutual_information(rho) - multipartite_mutual_information(
        dephase(rho, basis)
    )


def _alternating(first, second, num_qubits):
    return tuple(first if q % 2 == 0 else second for q in range(num_qubits))


def structured_starts(num_qubits):
    patterns = [
        (_Z,) * num_qubits,
        (_X,) * num_qubits,
        (_Y,) * num_qubits,
        _alternating(_Z, _X, num_qubits),
        _alternating(_X, _Z, num_qubits),
        _alternating(_Z, _Y, num_qubits),
        _alternating(_X, _Y, num_qubits),
        (_XZ,) * num_qubits,
    ]
    return [MeasurementBasis(pattern).as_vector() for pattern in patterns]


def start_vector(num_qubits, index, seed):
    """Initial angles of start ``index``; random starts depend only on (seed, index)."""
    if index < STRUCTURED_STARTS:
        return structured_starts(num_qubits)[index]
    rng = np.random.default_rng([seed, index])
    thetas = rng.uniform(0.0, math.pi, num_qubits)
    phis = rng.uniform(0.0, TWO_PI, num_qubits)
    return np.column_stack([thetas, phis]).ravel()


def _initial_simplex(start):
    return np.vstack([start, start + SIMPLEX_STEP * np.eye(start.size)])


def global_gqd(state, opt=None):
    """Minimize the discord objective by multistart Nelder-Mead search."""
    opt = opt or OptimizerConfig()
    objective = DiscordObjective(state)
    best = None
    history = []
    for index in range(opt.starts):
        start = start_vector(objective.num_qubits, index, opt.seed)
        result = scipy.optimize.minimize(
            objective,
            start,
            method="Nelder-Mead",
            options={
                "xatol": opt.simplex_tolerance,
                "fatol": opt.simplex_tolerance,
                "maxfev": opt.max_evals,
                "initial_simplex": _initial_simplex(start),
            },
        )
        logger.debug(
            "start %d: objective %.12g after %d evaluations (%s)",
            index,
            result.fun,
            result.nfev,
            "converged" if result.success else result.message,
        )
        if best is None or result.fun < best.fun:
            best = result
        history.append(float(best.fun))

    basis = MeasurementBasis.from_vector(best.x).canonical()
    value = objective.evaluate(basis)
    if value < -NEGATIVE_TOLERANCE:
        raise NumericError(f"discord objective reached {value!r}, below zero")
    return GQDResult(
        value=max(value, 0.0),
        optimal_basis=basis,
        starts_used=opt.starts,
        best_objective_history=tuple(history),
        converged=bool(best.success),
    )


def _check_pair(num_qubits, i, j):
    if i == j:
        raise DomainError(f"pair must name two different qubits, got ({i}, {j})")
    for qubit in (i, j):
        if not 0 <= qubit < num_qubits:
            raise DomainError(f"qubit {qubit} out of range for {num_qubits} qubits")


def pairwise_gqd(state, i, j, opt=None):
    """Discord of the two-qubit reduced state of qubits i and j."""
    _check_pair(state.num_qubits, i, j)
    pair_state = reduced_density_matrix(state, sorted((i, j)))
    return global_gqd(pair_state, opt).value


def nearest_neighbour_pairs(num_qubits, wrap_pair=False):
    pairs = [(q, q + 1) for q in range(num_qubits - 1)]
    if wrap_pair and num_qubits > 2:
        pairs.append((num_qubits - 1, 0))
    return pairs


def correlation_triple(state, opt=None, wrap_pair=False):
    """Total discord, the nearest-neighbour pair sum and their difference.

    The pair sum runs over the open chain (0, 1), ..., (L-2, L-1);
    ``wrap_pair`` adds (L-1, 0).
    """
    num_qubits = state.num_qubits
    if num_qubits < 2:
        raise DomainError(f"need at least two qubits, got {num_qubits}")
    total = global_gqd(state, opt).value
    pair_values = []
    for i, j in nearest_neighbour_pairs(num_qubits, wrap_pair):
        if num_qubits == 2:
            # the pair is the whole system
            value = total
        else:
            value = pairwise_gqd(state, i, j, opt)
        pair_values.append((i, j, value))
    pair_sum = sum(value for _, _, value in pair_values)
    return CorrelationTriple(
        total_gqd=total,
        nn_pair_sum=pair_sum,
        residual=total - pair_sum,
        pair_values=tuple(pair_values),
    )
