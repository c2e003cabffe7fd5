"""Ground states, reduced states, entropies and multipartite mutual information."""
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.special

from gqd.exceptions import DomainError, NumericError

logger = logging.getLogger(__name__)

DEGENERACY_TOLERANCE = 1e-9
NEGATIVITY_TOLERANCE = 1e-10
LEVELS_RECORDED = 4


def _num_qubits_for(dim):
    num_qubits = int(dim).bit_length() - 1
    if dim < 1 or 2**num_qubits != dim:
        raise DomainError(f"dimension {dim} is not a power of two")
    return num_qubits


@dataclass(frozen=True, eq=False)
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (2**self.num_qubits,):
            raise DomainError(
                f"expected {2**self.num_qubits} amplitudes, got shape {self.amplitudes.shape}"
            )
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > 1e-10:
            raise DomainError(f"state vector norm is {norm!r}, expected 1")

    @classmethod
    def from_amplitudes(cls, amplitudes, normalize=False):
        amplitudes = np.asarray(amplitudes, dtype=complex).ravel()
        if normalize:
            amplitudes = amplitudes / np.linalg.norm(amplitudes)
        return cls(_num_qubits_for(amplitudes.size), amplitudes)

    @classmethod
    def basis_state(cls, bits):
        """Product state ``|b_0 b_1 ...>`` from a bit string such as ``"0101"``."""
        amplitudes = np.zeros(2 ** len(bits), dtype=complex)
        amplitudes[int(bits, 2)] = 1.0
        return cls(len(bits), amplitudes)

    def projector(self):
        return DensityMatrix(
            self.num_qubits, np.outer(self.amplitudes, self.amplitudes.conj())
        )


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    num_qubits: int
    entries: np.ndarray

    def __post_init__(self):
        dim = 2**self.num_qubits
        if self.entries.shape != (dim, dim):
            raise DomainError(
                f"expected a {dim}x{dim} density matrix, got shape {self.entries.shape}"
            )
        if not np.allclose(self.entries, self.entries.conj().T, rtol=0.0, atol=1e-12):
            raise DomainError("density matrix is not Hermitian")
        trace = np.trace(self.entries).real
        if abs(trace - 1.0) > 1e-10:
            raise DomainError(f"density matrix trace is {trace!r}, expected 1")

    @classmethod
    def from_entries(cls, entries):
        entries = np.asarray(entries, dtype=complex)
        return cls(_num_qubits_for(entries.shape[0]), entries)

    def eigenvalues(self):
        return scipy.linalg.eigvalsh(self.entries)

    def is_positive(self):
        return bool(self.eigenvalues().min() >= -NEGATIVITY_TOLERANCE)


@dataclass(frozen=True, eq=False)
class GroundStateResult:
    energy: float
    state: StateVector
    gap_to_next: float
    degenerate: bool
    levels: tuple


def _fix_global_phase(vector):
    pivot = int(np.argmax(np.abs(vector)))
    phase = vector[pivot] / abs(vector[pivot])
    return vector * phase.conjugate()


def ground_state(hamiltonian, degeneracy_tolerance=DEGENERACY_TOLERANCE):
    """Lowest eigenvector of a dense Hermitian operator.

    The full spectrum is computed so the gap (and with it level crossings)
    is always available. Among degenerate lowest levels the first
    eigenvector returned by the solver is kept; its global phase is fixed
    so the largest-magnitude amplitude is real and positive.
    """
    try:
        energies, vectors = scipy.linalg.eigh(hamiltonian)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(
            f"eigendecomposition of a {hamiltonian.shape[0]}x{hamiltonian.shape[1]} "
            f"operator failed: {exc}"
        ) from exc
    if not np.all(np.isfinite(energies)):
        raise NumericError("eigendecomposition returned non-finite eigenvalues")

    amplitudes = _fix_global_phase(vectors[:, 0].astype(complex))
    amplitudes /= np.linalg.norm(amplitudes)
    gap = float(energies[1] - energies[0]) if energies.size > 1 else float("inf")
    gap = max(gap, 0.0)
    return GroundStateResult(
        energy=float(energies[0]),
        state=StateVector.from_amplitudes(amplitudes),
        gap_to_next=gap,
        degenerate=gap < degeneracy_tolerance,
        levels=tuple(float(level) for level in energies[:LEVELS_RECORDED]),
    )


def low_spectrum(hamiltonian, count):
    if count < 1:
        raise DomainError(f"count must be positive, got {count}")
    upper = min(count, hamiltonian.shape[0]) - 1
    return scipy.linalg.eigvalsh(hamiltonian, subset_by_index=[0, upper])


def _check_keep(keep, num_qubits):
    keep = tuple(int(qubit) for qubit in keep)
    if not keep:
        raise DomainError("keep set must not be empty")
    if any(later <= earlier for earlier, later in zip(keep, keep[1:])):
        raise DomainError(f"keep set must be strictly increasing, got {keep}")
    if keep[0] < 0 or keep[-1] >= num_qubits:
        raise DomainError(f"keep set {keep} out of range for {num_qubits} qubits")
    return keep


def partial_trace(rho, keep):
    """Reduced state on the qubits in ``keep``, preserving their order."""
    keep = _check_keep(keep, rho.num_qubits)
    num_qubits = rho.num_qubits
    tensor = rho.entries.reshape([2] * (2 * num_qubits))
    remaining = num_qubits
    for qubit in reversed(range(num_qubits)):
        if qubit in keep:
            continue
        tensor = np.trace(tensor, axis1=qubit, axis2=qubit + remaining)
        remaining -= 1
    dim = 2 ** len(keep)
    entries = tensor.reshape(dim, dim)
    return DensityMatrix(len(keep), (entries + entries.conj().T) / 2)


def reduced_density_matrix(state, keep):
    """Reduced state of a pure state, computed from the amplitudes directly."""
    keep = _check_keep(keep, state.num_qubits)
    traced = [qubit for qubit in range(state.num_qubits) if qubit not in keep]
    tensor = state.amplitudes.reshape([2] * state.num_qubits)
    matrix = np.transpose(tensor, list(keep) + traced).reshape(2 ** len(keep), -1)
    entries = matrix @ matrix.conj().T
    return DensityMatrix(len(keep), (entries + entries.conj().T) / 2)


def shannon_entropy(probabilities):
    """Entropy in bits along the last axis, with 0 log 0 = 0.

    A single vector gives a float; a stack of vectors gives one entropy per row.
    """
    probabilities = np.clip(np.asarray(probabilities, dtype=float), 0.0, 1.0)
    entropy = scipy.special.entr(probabilities).sum(axis=-1) / math.log(2)
    return float(entropy) if np.ndim(entropy) == 0 else entropy


def von_neumann_entropy(rho):
    eigenvalues = rho.eigenvalues()
    if eigenvalues.min() < -NEGATIVITY_TOLERANCE:
        raise DomainError(
            f"density matrix has eigenvalue {eigenvalues.min()!r} below "
            f"-{NEGATIVITY_TOLERANCE}"
        )
    return max(shannon_entropy(eigenvalues), 0.0)


def single_site_parts(num_qubits):
    return tuple((qubit,) for qubit in range(num_qubits))


def _check_parts(parts, num_qubits):
    covered = sorted(qubit for part in parts for qubit in part)
    if covered != list(range(num_qubits)):
        raise DomainError(
            f"parts {parts} do not cover qubits 0..{num_qubits - 1} disjointly"
        )


def multipartite_mutual_information(rho, parts=None):
    """I = sum_k S(rho_k) - S(rho) in bits; single-qubit parts by default."""
    if parts is None:
        parts = single_site_parts(rho.num_qubits)
    _check_parts(parts, rho.num_qubits)
    local = sum(von_neumann_entropy(partial_trace(rho, sorted(part))) for part in parts)
    return local - von_neumann_entropy(rho)


def state_fidelity(psi, phi):
    if psi.amplitudes.shape != phi.amplitudes.shape:
        raise DomainError(
            f"cannot compare states of {psi.num_qubits} and {phi.num_qubits} qubits"
        )
    return min(float(abs(np.vdot(psi.amplitudes, phi.amplitudes))), 1.0)
