"""
Coherence quantifiers over density matrices and the coherence gain of a unitary on one input.
"""
import logging
from enum import Enum

import numpy as np

from .core import (
    DensityMatrix,
    UnitaryOperator,
    check_dims,
    conjugate_by_unitary,
    dephase,
    spectrum_entropy,
    von_neumann_entropy,
)

log = logging.getLogger(__name__)

NEGATIVE_ZERO_TOL = 1e-10


class CoherenceMeasureId(str, Enum):
    L1 = "l1"
    RELENT = "relent"

    @classmethod
    def parse(cls, value):
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"Not a valid measure - {value}")


def c_l1(rho: DensityMatrix) -> float:
    """l1-coherence: Σ_{i≠j} |ρ_ij|."""
    off_diagonal = rho.mat - np.diag(np.diag(rho.mat))
    return float(np.abs(off_diagonal).sum())


def c_rel_ent(rho: DensityMatrix) -> float:
    """Relative entropy of coherence S(Δ(ρ)) - S(ρ), in nats."""
    value = von_neumann_entropy(dephase(rho)) - von_neumann_entropy(rho)
    if -NEGATIVE_ZERO_TOL < value < 0:
        return 0.0
    return value


_MEASURES = {
    CoherenceMeasureId.L1: c_l1,
    CoherenceMeasureId.RELENT: c_rel_ent,
}


def coherence(rho: DensityMatrix, m: CoherenceMeasureId) -> float:
    return _MEASURES[CoherenceMeasureId(m)](rho)


def gain(u: UnitaryOperator, rho: DensityMatrix, m: CoherenceMeasureId) -> float:
    """
    Coherence gain C(UρU†) - C(ρ) of `u` on the single input `rho`. It may be negative when
    the unitary destroys coherence the input already had.
    """
    check_dims(rho, u)
    return coherence(conjugate_by_unitary(rho, u), m) - coherence(rho, m)


def _pure_coherence(amps, m):
    if m is CoherenceMeasureId.L1:
        moduli = np.abs(amps)
        return moduli.sum(axis=-1) ** 2 - (moduli ** 2).sum(axis=-1)
    # S(ψ) = 0, so only the dephased distribution contributes
    return spectrum_entropy(np.abs(amps) ** 2)


def pure_gain_batch(u_mat, amps, m: CoherenceMeasureId):
    """
    Gain of `u_mat` on each row of `amps` (shape (..., N)), treating every row as a pure
    state. For a unit vector a: C_l1 = (Σ|a_i|)² - Σ|a_i|² and C_rel = -Σ|a_i|² ln|a_i|².
    """
    m = CoherenceMeasureId(m)
    amps = np.asarray(amps, dtype=complex)
    return _pure_coherence(amps @ np.asarray(u_mat).T, m) - _pure_coherence(amps, m)


def pure_gain(u_mat, amps, m: CoherenceMeasureId) -> float:
    return float(pure_gain_batch(u_mat, np.asarray(amps)[np.newaxis, :], m)[0])
