"""XY chain Hamiltonian on a ring of qubits.

Basis convention used everywhere in the package: computational basis
index ``k`` has qubit 0 as its most significant bit, and
``sigma_z |0> = +|0>``.
"""
import logging
import math
from dataclasses import dataclass, replace
from functools import reduce

import numpy as np

from gqd.exceptions import DomainError

logger = logging.getLogger(__name__)

MAX_SITES = 12
MIN_SITES = 2

IDENTITY = np.eye(2, dtype=complex)
PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class ChainParams:
    num_sites: int
    anisotropy: float
    field: float
    coupling: float = 1.0

    def __post_init__(self):
        if not MIN_SITES <= self.num_sites <= MAX_SITES:
            raise DomainError(
                f"num_sites must be within [{MIN_SITES}, {MAX_SITES}], got {self.num_sites}"
            )
        if not 0.0 <= self.anisotropy <= 1.0:
            raise DomainError(f"anisotropy must be within [0, 1], got {self.anisotropy}")
        if not self.field >= 0.0:
            raise DomainError(f"field must be non-negative, got {self.field}")
        if not math.isfinite(self.coupling):
            raise DomainError(f"coupling must be finite, got {self.coupling}")

    def with_field(self, field):
        return replace(self, field=float(field))

    @property
    def dimension(self):
        return 2**self.num_sites


def anisotropy_from_theta(theta_degrees):
    if not 0.0 <= theta_degrees <= 90.0:
        raise DomainError(f"theta must be within [0, 90] degrees, got {theta_degrees}")
    return min(math.sin(math.radians(theta_degrees)), 1.0)


def chain_from_theta(num_sites, theta_degrees, field, coupling=1.0):
    """Chain with anisotropy ``sin(theta)``, the parametrization of the field sweeps."""
    return ChainParams(num_sites, anisotropy_from_theta(theta_degrees), float(field), coupling)


def factorizing_field(anisotropy):
    """Field on the separability circle h^2 + gamma^2 = 1."""
    if not 0.0 <= anisotropy <= 1.0:
        raise DomainError(f"anisotropy must be within [0, 1], got {anisotropy}")
    return math.sqrt(1.0 - anisotropy**2)


def classify_phase(anisotropy, field, tolerance=1e-9):
    """Label of the ground-state phase at (gamma, h).

    ``"1B"`` inside the circle h^2 + gamma^2 = 1, ``"factorized"`` on it,
    ``"1A"`` between the circle and h = 1, ``"critical"`` on h = 1 and
    ``"2"`` above it.
    """
    if abs(field - 1.0) <= tolerance:
        return "critical"
    if field > 1.0:
        return "2"
    radius = field**2 + anisotropy**2 - 1.0
    if abs(radius) <= tolerance:
        return "factorized"
    return "1A" if radius > 0 else "1B"


def pauli_site_operator(num_sites, site, axis):
    if not 0 <= site < num_sites:
        raise DomainError(f"site {site} out of range for {num_sites} sites")
    try:
        pauli = PAULI[axis]
    except KeyError:
        raise DomainError(f"axis must be one of x, y, z, got {axis!r}") from None
    factors = [pauli if index == site else IDENTITY for index in range(num_sites)]
    return reduce(np.kron, factors)


def parity_operator(num_sites):
    if num_sites < 1:
        raise DomainError(f"num_sites must be positive, got {num_sites}")
    diagonal = reduce(np.kron, [np.array([1.0, -1.0])] * num_sites)
    return np.diag(diagonal).astype(complex)


def _site_bits(num_sites):
    indices = np.arange(2**num_sites)
    shifts = np.arange(num_sites - 1, -1, -1)
    return (indices[:, None] >> shifts[None, :]) & 1


def build_xy_hamiltonian(params):
    """Dense Hamiltonian of the periodic XY ring.

    H = -sum_i { J/2 [(1+g) X_i X_{i+1} + (1-g) Y_i Y_{i+1}] + h Z_i },
    i+1 taken mod L. The sum is literal, so for L = 2 the single bond is
    visited twice.

    Every entry is real in the computational basis, so the operator is
    returned as a real symmetric ``float64`` array.
    """
    size = params.num_sites
    dim = params.dimension
    bits = _site_bits(size)
    spins = 1 - 2 * bits
    indices = np.arange(dim)

    hamiltonian = np.zeros((dim, dim))
    hamiltonian[indices, indices] = -params.field * spins.sum(axis=1)

    half = params.coupling / 2.0
    for site in range(size):
        neighbour = (site + 1) % size
        flipped = indices ^ (1 << (size - 1 - site)) ^ (1 << (size - 1 - neighbour))
        # X X contributes 1; Y Y contributes -1 on aligned bits and +1 on anti-aligned
        aligned = spins[:, site] == spins[:, neighbour]
        yy = np.where(aligned, -1.0, 1.0)
        amplitude = half * ((1 + params.anisotropy) + (1 - params.anisotropy) * yy)
        np.add.at(hamiltonian, (flipped, indices), -amplitude)

    logger.debug("built XY hamiltonian for %s", params)
    return hamiltonian


def is_hermitian(operator, atol=1e-12):
    return bool(np.allclose(operator, operator.conj().T, rtol=0.0, atol=atol))
