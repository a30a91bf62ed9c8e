"""
Coherence power of unitaries and of Hamiltonian generators.

- `qubit_l1_power`: closed form for N = 2, where incoherent inputs are optimal
- `incoherent_l1_power`, `incoherent_relent_power`: maxima over basis-state inputs
- `global_power`: multistart search over all pure inputs, a heuristic lower bound on the power
- `generator_power`: Δt → 0 limit of the power of exp(-iHΔt), divided by Δt
"""
import logging
from dataclasses import replace
from typing import Dict, Iterable

import numpy as np
from pydantic.dataclasses import dataclass

from .core import (
    Config,
    DimensionMismatch,
    HamiltonianOperator,
    LimitNotConverged,
    OptimizerError,
    UnitaryOperator,
    basis_state,
    evolve,
    random_density_matrix,
    spectrum_entropy,
)
from .measures import CoherenceMeasureId, gain, pure_gain
from .optim import (
    Diagnostics,
    GeneratorConfig,
    OptimizerConfig,
    PowerEstimate,
    PowerMethod,
    StateParams,
    decode,
    decode_amplitudes,
    finalize_estimate,
    multistart_maximize,
    restart_starts,
)

log = logging.getLogger(__name__)

__all__ = [
    "PowerComparison",
    "PowerEstimate",
    "PowerMethod",
    "compare_powers",
    "gap_summary",
    "generator_power",
    "global_power",
    "incoherent_l1_power",
    "incoherent_power",
    "incoherent_relent_power",
    "qubit_l1_power",
]

MIXED_CHECK_MARGIN = 1e-9


def _column_scan(u, m, weights, method):
    # argmax keeps the lowest index on ties
    j = int(np.argmax(weights))
    diagnostics = Diagnostics(restarts=u.dim, best_restart=j)
    return finalize_estimate(u, m, basis_state(u.dim, j), float(weights[j]), method, diagnostics)


def qubit_l1_power(u: UnitaryOperator) -> PowerEstimate:
    """
    l1 coherence power of a qubit unitary, max_j (Σ_i |U_ij|)² - 1. For N = 2 the maximum
    gain is always reached on a basis state.
    """
    if u.dim != 2:
        raise DimensionMismatch(f"Closed form needs a 2x2 unitary - got dimension {u.dim}")
    weights = np.abs(u.mat).sum(axis=0) ** 2 - 1.0
    return _column_scan(u, CoherenceMeasureId.L1, weights, PowerMethod.CLOSED_FORM)


def incoherent_l1_power(u: UnitaryOperator) -> PowerEstimate:
    """Largest l1 gain over basis-state inputs, max_j (Σ_i |U_ij|)² - 1, for any N."""
    weights = np.abs(u.mat).sum(axis=0) ** 2 - 1.0
    return _column_scan(u, CoherenceMeasureId.L1, weights, PowerMethod.INCOHERENT_SCAN)


def incoherent_relent_power(u: UnitaryOperator) -> PowerEstimate:
    """
    Largest relative-entropy gain over basis-state inputs. U|j⟩ is column j, so the scan
    runs over columns: max_j -Σ_i |U_ij|² ln |U_ij|².
    """
    weights = spectrum_entropy((np.abs(u.mat) ** 2).T)
    return _column_scan(u, CoherenceMeasureId.RELENT, weights, PowerMethod.INCOHERENT_SCAN)


def incoherent_power(u: UnitaryOperator, m: CoherenceMeasureId) -> PowerEstimate:
    if CoherenceMeasureId(m) is CoherenceMeasureId.L1:
        return incoherent_l1_power(u)
    return incoherent_relent_power(u)


def _mixed_state_check(u, m, cfg):
    if cfg.mixed_samples == 0:
        return None
    streams = np.random.SeedSequence([cfg.seed, 1]).spawn(cfg.mixed_samples)
    return max(gain(u, random_density_matrix(u.dim, s), m) for s in streams)


def global_power(
    u: UnitaryOperator, m: CoherenceMeasureId, cfg: OptimizerConfig = OptimizerConfig()
) -> PowerEstimate:
    """
    Multistart maximization of the gain over pure inputs. Basis states and the maximally
    coherent state are always among the starts, so the result never falls below the
    incoherent scan. It is the best gain found, not a certified maximum.

    Raises `OptimizerError` (with the estimate under `partial`) when no restart converged.
    """
    m = CoherenceMeasureId(m)
    if u.dim < 2:
        raise DimensionMismatch(f"Global search needs dimension 2 or more - got {u.dim}")

    u_mat = u.mat

    def objective(params: StateParams) -> float:
        return pure_gain(u_mat, decode_amplitudes(params.thetas, params.phis), m)

    params, value, diagnostics = multistart_maximize(objective, restart_starts(u.dim, cfg), cfg)

    mixed_best = _mixed_state_check(u, m, cfg)
    if mixed_best is not None and mixed_best > value + MIXED_CHECK_MARGIN:
        log.warning(
            f"A sampled mixed state gains {mixed_best!r}, above the pure optimum {value!r}"
        )
    diagnostics = replace(diagnostics, mixed_best=mixed_best)

    estimate = finalize_estimate(
        u, m, decode(params), value, PowerMethod.GLOBAL_OPTIMIZATION, diagnostics
    )
    if not diagnostics.converged:
        raise OptimizerError(
            f"None of {diagnostics.restarts} restarts converged within {cfg.max_iters} "
            "iterations",
            partial=estimate,
        )
    return estimate


def generator_power(
    h: HamiltonianOperator, m: CoherenceMeasureId, cfg: GeneratorConfig = GeneratorConfig()
) -> PowerEstimate:
    """
    Coherence power of the generator H: the rate g(Δt) = P(exp(-iHΔt))/Δt is computed on
    `cfg.dt_ladder` and extrapolated to Δt → 0 with one Richardson step per consecutive pair,
    R = (r·g(Δt/r) - g(Δt))/(r - 1). The achiever is the one found at the smallest Δt.

    Raises `LimitNotConverged` when successive extrapolated values differ by more than
    `cfg.limit_tol`.
    """
    m = CoherenceMeasureId(m)
    rates, estimate = [], None
    for dt in cfg.dt_ladder:
        estimate = global_power(evolve(h, dt), m, cfg.inner)
        rates.append(estimate.value / dt)
        log.debug(f"Generator rate at dt={dt!r}: {rates[-1]!r}")

    ladder = []
    for (dt0, g0), (dt1, g1) in zip(
        zip(cfg.dt_ladder, rates), zip(cfg.dt_ladder[1:], rates[1:])
    ):
        r = dt0 / dt1
        ladder.append((r * g1 - g0) / (r - 1))

    worst = max((abs(b - a) for a, b in zip(ladder, ladder[1:])), default=0.0)
    if worst > cfg.limit_tol:
        raise LimitNotConverged(
            f"Generator power did not settle - successive estimates differ by {worst:.3e}",
            estimates=ladder,
        )
    diagnostics = replace(estimate.diagnostics, ladder=tuple(ladder))
    return PowerEstimate(
        value=ladder[-1],
        measure=m,
        method=PowerMethod.GENERATOR_LIMIT,
        achiever=estimate.achiever,
        diagnostics=diagnostics,
    )


@dataclass(config=Config, frozen=True, eq=False)
class PowerComparison:
    """
    Incoherent-restricted power against the global search for one unitary.

    **Attributes:**

    - `incoherent` (PowerEstimate): basis-state scan
    - `global_` (PowerEstimate): multistart search
    - `gap` (float): `global_.value - incoherent.value`
    """

    incoherent: PowerEstimate
    global_: PowerEstimate
    gap: float


def compare_powers(
    u: UnitaryOperator, m: CoherenceMeasureId, cfg: OptimizerConfig = OptimizerConfig()
) -> PowerComparison:
    incoherent = incoherent_power(u, m)
    best = global_power(u, m, cfg)
    return PowerComparison(incoherent=incoherent, global_=best, gap=best.value - incoherent.value)


def gap_summary(gaps: Iterable[float]) -> Dict[str, float]:
    """Min, quartiles and max of a population of gaps."""
    values = np.asarray(list(gaps), dtype=float)
    if values.size == 0:
        raise ValueError("Not a valid gap population - empty")
    q = np.quantile(values, [0.0, 0.25, 0.5, 0.75, 1.0])
    return dict(zip(("min", "q25", "median", "q75", "max"), (float(x) for x in q)))
