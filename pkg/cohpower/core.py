"""
Dense complex linear-algebra substrate: validated states and operators, dephasing, von Neumann
entropy and the canonical constructors (rotations, discrete Fourier transform, Haar sampling).

Every value type is an immutable pydantic dataclass. Matrices travel as read-only
`numpy.ndarray` objects coerced to `complex128`.
"""
import logging
from math import pi
from typing import Sequence, Union

import numpy as np
from pydantic import validator
from pydantic.dataclasses import dataclass
from scipy.special import entr

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
UNITARY_TOL = 1e-10
NORM_TOL = 1e-12
EIGEN_ZERO_TOL = 1e-12
PHASE_TOL = 1e-12

SeedLike = Union[int, np.random.SeedSequence]


class Config:
    validate_assignment = True
    arbitrary_types_allowed = True


class CohpowerError(Exception):
    """Base class of every error raised by the library."""


class DimensionMismatch(CohpowerError, ValueError):
    pass


class EstimateMismatch(CohpowerError, RuntimeError):
    """A reported power disagrees with the re-evaluated gain of its achiever."""


class OptimizerError(CohpowerError, RuntimeError):
    """
    No restart of a global search converged. The best estimate reached so far is kept under
    `partial`.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class LimitNotConverged(CohpowerError, RuntimeError):
    """Successive extrapolated estimates of a generator power disagree beyond tolerance."""

    def __init__(self, message, estimates=()):
        super().__init__(message)
        self.estimates = tuple(estimates)


class ComplexMatrix(np.ndarray):
    """
    pydantic field type for a dense N×N complex matrix with finite entries. The validated
    value is a read-only `complex128` array.
    """

    @classmethod
    def __get_validators__(cls):
        yield cls.validate

    @classmethod
    def validate(cls, value):
        try:
            arr = np.array(value, dtype=complex)
        except (TypeError, ValueError):
            raise ValueError(f"Not a valid complex matrix - {value!r}")
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise ValueError(f"Not a valid complex matrix - shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("Not a valid complex matrix - non-finite entries")
        arr.setflags(write=False)
        return arr


class ComplexVector(np.ndarray):
    """pydantic field type for a non-empty 1-D complex vector with finite entries."""

    @classmethod
    def __get_validators__(cls):
        yield cls.validate

    @classmethod
    def validate(cls, value):
        try:
            arr = np.array(value, dtype=complex)
        except (TypeError, ValueError):
            raise ValueError(f"Not a valid complex vector - {value!r}")
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError(f"Not a valid complex vector - shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("Not a valid complex vector - non-finite entries")
        arr.setflags(write=False)
        return arr


def hermiticity_residual(mat):
    return float(np.max(np.abs(mat - mat.conj().T)))


def unitarity_residual(mat):
    return float(np.max(np.abs(mat.conj().T @ mat - np.eye(mat.shape[0]))))


def _canonical_phase(amps):
    out = np.array(amps, dtype=complex)
    first = int(np.flatnonzero(np.abs(out) > PHASE_TOL)[0])
    modulus = abs(out[first])
    out = out * np.conj(out[first] / modulus)
    out[first] = modulus
    out.setflags(write=False)
    return out


@dataclass(config=Config, frozen=True, eq=False)
class PureState:
    """
    Unit-norm state vector. The global phase is fixed so that the first amplitude with
    modulus above `PHASE_TOL` is real and non-negative.

    **Attributes:**

    - `amps` (ComplexVector): N complex amplitudes (**required**)

    **Example:**

    ```python
    >>> psi = PureState(amps=[0.3, 0, (1 - 0.3 ** 2) ** 0.5])
    >>> psi.dim
    3
    ```
    """

    amps: ComplexVector

    @validator("amps")
    def _valid_amps(cls, value):
        residual = abs(float(np.sum(np.abs(value) ** 2)) - 1.0)
        if residual > NORM_TOL:
            raise ValueError(f"Not a valid pure state - norm residual {residual:.3e}")
        return _canonical_phase(value)

    @property
    def dim(self):
        return self.amps.shape[0]

    @classmethod
    def from_amplitudes(cls, amps):
        """Normalizes an arbitrary non-zero vector before validating it."""
        arr = np.asarray(amps, dtype=complex)
        norm = float(np.linalg.norm(arr))
        if norm == 0.0 or not np.isfinite(norm):
            raise ValueError(f"Not a valid pure state - norm {norm}")
        return cls(amps=arr / norm)


@dataclass(config=Config, frozen=True, eq=False)
class DensityMatrix:
    """
    Hermitian, positive-semidefinite, unit-trace matrix.

    **Attributes:**

    - `mat` (ComplexMatrix): the N×N entries ρ_ij (**required**)
    """

    mat: ComplexMatrix

    @validator("mat")
    def _valid_density(cls, value):
        residual = hermiticity_residual(value)
        if residual > HERMITIAN_TOL:
            raise ValueError(f"Not a valid density matrix - hermiticity residual {residual:.3e}")
        residual = abs(complex(np.trace(value)) - 1.0)
        if residual > TRACE_TOL:
            raise ValueError(f"Not a valid density matrix - trace residual {residual:.3e}")
        lowest = float(np.linalg.eigvalsh(value)[0])
        if lowest < -PSD_TOL:
            raise ValueError(f"Not a valid density matrix - positivity residual {-lowest:.3e}")
        return value

    @property
    def dim(self):
        return self.mat.shape[0]


@dataclass(config=Config, frozen=True, eq=False)
class UnitaryOperator:
    """
    N×N matrix with U†U = I up to `UNITARY_TOL` (max-entry deviation).

    **Attributes:**

    - `mat` (ComplexMatrix): the entries U_ij (**required**)
    """

    mat: ComplexMatrix

    @validator("mat")
    def _valid_unitary(cls, value):
        residual = unitarity_residual(value)
        if residual > UNITARY_TOL:
            raise ValueError(f"Not a valid unitary - unitarity residual {residual:.3e}")
        return value

    @property
    def dim(self):
        return self.mat.shape[0]


@dataclass(config=Config, frozen=True, eq=False)
class HamiltonianOperator:
    """
    Hermitian generator H of the evolution U(t) = exp(-iHt).

    **Attributes:**

    - `mat` (ComplexMatrix): the entries H_ij (**required**)
    """

    mat: ComplexMatrix

    @validator("mat")
    def _valid_hamiltonian(cls, value):
        residual = hermiticity_residual(value)
        if residual > HERMITIAN_TOL:
            raise ValueError(f"Not a valid hamiltonian - hermiticity residual {residual:.3e}")
        return value

    @property
    def dim(self):
        return self.mat.shape[0]


def check_dims(left, right):
    """Raises `DimensionMismatch` unless both operands act on the same space."""
    if left.dim != right.dim:
        raise DimensionMismatch(
            f"Dimension mismatch - {type(left).__name__} is {left.dim}, "
            f"{type(right).__name__} is {right.dim}"
        )


def density_from_pure(psi: PureState) -> DensityMatrix:
    """Rank-1 projector |ψ⟩⟨ψ|."""
    return DensityMatrix(mat=np.outer(psi.amps, psi.amps.conj()))


def conjugate_by_unitary(rho: DensityMatrix, u: UnitaryOperator) -> DensityMatrix:
    """Returns UρU†."""
    check_dims(rho, u)
    return DensityMatrix(mat=u.mat @ rho.mat @ u.mat.conj().T)


def dephase(rho: DensityMatrix) -> DensityMatrix:
    """Full dephasing in the reference basis: keeps the diagonal, zeroes the rest."""
    return DensityMatrix(mat=np.diag(np.diag(rho.mat)))


def spectrum_entropy(probabilities) -> float:
    """
    -Σ p ln p over the last axis, with 0·ln 0 = 0. Entries below `EIGEN_ZERO_TOL` count as
    exactly zero.
    """
    p = np.asarray(probabilities, dtype=float)
    p = np.where(p < EIGEN_ZERO_TOL, 0.0, p)
    return entr(p).sum(axis=-1)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """Entropy of ρ in nats, computed from its eigenvalues."""
    value = float(spectrum_entropy(np.linalg.eigvalsh(rho.mat)))
    return max(value, 0.0)


def purity(rho: DensityMatrix) -> float:
    return float(np.real(np.trace(rho.mat @ rho.mat)))


def basis_state(dim: int, k: int) -> PureState:
    """Incoherent basis state |k⟩, zero-based index."""
    if not 0 <= k < dim:
        raise ValueError(f"Not a valid basis index - {k} for dimension {dim}")
    amps = np.zeros(dim, dtype=complex)
    amps[k] = 1.0
    return PureState(amps=amps)


def maximally_coherent_state(dim: int) -> PureState:
    return PureState(amps=np.full(dim, 1.0 / np.sqrt(dim), dtype=complex))


def identity_unitary(dim: int) -> UnitaryOperator:
    return UnitaryOperator(mat=np.eye(dim, dtype=complex))


def diagonal_unitary(phases: Sequence[float]) -> UnitaryOperator:
    """diag(e^{iφ_1}, ..., e^{iφ_N}); leaves every coherence measure unchanged."""
    return UnitaryOperator(mat=np.diag(np.exp(1j * np.asarray(phases, dtype=float))))


def permutation_unitary(perm: Sequence[int]) -> UnitaryOperator:
    """Maps |j⟩ to |perm[j]⟩."""
    perm = list(perm)
    if sorted(perm) != list(range(len(perm))):
        raise ValueError(f"Not a valid permutation - {perm}")
    mat = np.zeros((len(perm), len(perm)), dtype=complex)
    mat[perm, range(len(perm))] = 1.0
    return UnitaryOperator(mat=mat)


def rotation_x(theta: float, dim: int = 3) -> UnitaryOperator:
    """
    Rotation by `theta` around the x axis: identity on the first basis state, the block
    [[cos θ, -sin θ], [sin θ, cos θ]] on the second and third, identity on any further ones.
    """
    if dim < 3:
        raise ValueError(f"Not a valid rotation dimension - {dim}")
    mat = np.eye(dim, dtype=complex)
    c, s = np.cos(theta), np.sin(theta)
    mat[1:3, 1:3] = [[c, -s], [s, c]]
    return UnitaryOperator(mat=mat)


def fourier_unitary(dim: int) -> UnitaryOperator:
    """Discrete Fourier transform, F_aj = exp(2πi·aj/N)/√N."""
    if dim < 1:
        raise ValueError(f"Not a valid dimension - {dim}")
    idx = np.arange(dim)
    return UnitaryOperator(mat=np.exp(2j * pi * np.outer(idx, idx) / dim) / np.sqrt(dim))


def _ginibre(dim, rng):
    return (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)


def haar_random_unitary(dim: int, seed: SeedLike) -> UnitaryOperator:
    """
    Haar-distributed unitary: QR decomposition of a complex Ginibre matrix, with the phases
    of diag(R) moved into Q so the distribution is exactly Haar.
    """
    if dim < 1:
        raise ValueError(f"Not a valid dimension - {dim}")
    q, r = np.linalg.qr(_ginibre(dim, np.random.default_rng(seed)))
    d = np.diagonal(r)
    return UnitaryOperator(mat=q * (d / np.abs(d)))


def random_density_matrix(dim: int, seed: SeedLike) -> DensityMatrix:
    """Full-rank random state AA†/Tr(AA†) with A complex Ginibre."""
    a = _ginibre(dim, np.random.default_rng(seed))
    m = a @ a.conj().T
    m = (m + m.conj().T) / 2
    return DensityMatrix(mat=m / np.trace(m).real)


def pauli_x() -> HamiltonianOperator:
    return HamiltonianOperator(mat=[[0, 1], [1, 0]])


def evolve(h: HamiltonianOperator, t: float) -> UnitaryOperator:
    """
    exp(-iHt) from the eigendecomposition of H. A vanishing generator or time gives the
    identity exactly.
    """
    if t == 0 or not np.any(h.mat):
        return identity_unitary(h.dim)
    w, v = np.linalg.eigh(h.mat)
    return UnitaryOperator(mat=(v * np.exp(-1j * w * t)) @ v.conj().T)
