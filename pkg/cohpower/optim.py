"""
Pure-state parameterization, deterministic multistart local search and the brute-force grid
oracle for small dimensions.

A pure state in dimension N is described by N-1 hyperspherical angles θ_k ∈ [0, π/2] and N-1
relative phases φ_k ∈ [0, 2π]:

    a_1 = cos θ_1
    a_k = sin θ_1 ··· sin θ_{k-1} cos θ_k e^{iφ_{k-1}}
    a_N = sin θ_1 ··· sin θ_{N-1} e^{iφ_{N-1}}

The phase of the first amplitude is fixed at zero, matching the canonical phase of `PureState`.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import field, replace
from enum import Enum
from math import pi
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import validator
from pydantic.dataclasses import dataclass
from scipy.optimize import minimize

from .core import (
    Config,
    DimensionMismatch,
    EstimateMismatch,
    PureState,
    UnitaryOperator,
    basis_state,
    density_from_pure,
    maximally_coherent_state,
)
from .measures import CoherenceMeasureId, gain, pure_gain_batch

log = logging.getLogger(__name__)

THETA_MAX = pi / 2
PHI_MAX = 2 * pi
ESTIMATE_TOL = 1e-8
MAX_BRUTE_FORCE_DIM = 3
MIN_GRID_STEPS = 8


class RealVector(np.ndarray):
    """pydantic field type for a 1-D finite float vector (possibly empty)."""

    @classmethod
    def __get_validators__(cls):
        yield cls.validate

    @classmethod
    def validate(cls, value):
        arr = np.array(value, dtype=float).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise ValueError("Not a valid real vector - non-finite entries")
        arr.setflags(write=False)
        return arr


@dataclass(config=Config, frozen=True, eq=False)
class OptimizerConfig:
    """
    Settings of the multistart Nelder-Mead search.

    **Attributes:**

    - `restarts` (int): number of local searches; basis states and the maximally coherent state
    are always among them
    - `max_iters` (int): iteration budget of one local search
    - `param_tol` (float): simplex diameter at which a search stops
    - `value_tol` (float): objective spread at which a search stops
    - `seed` (int): master seed; restart i draws from child stream i
    - `initial_step` (float): edge length in radians of the starting simplex
    - `workers` (int): thread pool width for restarts, results do not depend on it
    - `mixed_samples` (int): random density matrices evaluated as a check on the pure optimum
    """

    restarts: int = 64
    max_iters: int = 2000
    param_tol: float = 1e-9
    value_tol: float = 1e-10
    seed: int = 0
    initial_step: float = 0.25
    workers: int = 1
    mixed_samples: int = 50

    @validator("restarts", "max_iters", "workers")
    def _valid_positive_int(cls, value):
        if value < 1:
            raise ValueError(f"Not a valid count - {value}")
        return value

    @validator("param_tol", "value_tol", "initial_step")
    def _valid_positive_float(cls, value):
        if not value > 0:
            raise ValueError(f"Not a valid tolerance - {value}")
        return value

    @validator("seed", "mixed_samples")
    def _valid_non_negative(cls, value):
        if value < 0:
            raise ValueError(f"Not a valid seed or sample count - {value}")
        return value


DEFAULT_DT_LADDER = (1e-2, 5e-3, 2.5e-3, 1.25e-3)


@dataclass(config=Config, frozen=True, eq=False)
class GeneratorConfig:
    """
    Settings of the Δt → 0 extrapolation for generator power.

    **Attributes:**

    - `inner` (OptimizerConfig): search settings used at every Δt
    - `dt_ladder` (tuple): strictly decreasing positive time steps
    - `limit_tol` (float): largest accepted difference of successive extrapolated estimates
    """

    inner: OptimizerConfig = field(default_factory=OptimizerConfig)
    dt_ladder: Tuple[float, ...] = DEFAULT_DT_LADDER
    limit_tol: float = 1e-3

    @validator("dt_ladder")
    def _valid_ladder(cls, value):
        if len(value) < 2:
            raise ValueError("Not a valid dt ladder - needs at least two steps")
        if any(dt <= 0 for dt in value):
            raise ValueError(f"Not a valid dt ladder - non-positive step in {value}")
        if any(a <= b for a, b in zip(value, value[1:])):
            raise ValueError(f"Not a valid dt ladder - not strictly decreasing {value}")
        return value

    @validator("limit_tol")
    def _valid_limit_tol(cls, value):
        if not value > 0:
            raise ValueError(f"Not a valid limit_tol - {value}")
        return value


@dataclass(config=Config, frozen=True, eq=False)
class StateParams:
    """
    2N-2 real coordinates of a pure state.

    **Attributes:**

    - `dim` (int): dimension N (**required**)
    - `thetas` (RealVector): N-1 angles in [0, π/2] (**required**)
    - `phis` (RealVector): N-1 relative phases in [0, 2π] (**required**)
    """

    dim: int
    thetas: RealVector
    phis: RealVector

    @validator("dim")
    def _valid_dim(cls, value):
        if value < 1:
            raise ValueError(f"Not a valid dimension - {value}")
        return value

    @validator("thetas")
    def _valid_thetas(cls, value, values):
        if "dim" in values and value.size != values["dim"] - 1:
            raise ValueError(f"Not a valid thetas - expected {values['dim'] - 1} angles")
        if np.any(value < 0) or np.any(value > THETA_MAX):
            raise ValueError("Not a valid thetas - outside [0, pi/2]")
        return value

    @validator("phis")
    def _valid_phis(cls, value, values):
        if "dim" in values and value.size != values["dim"] - 1:
            raise ValueError(f"Not a valid phis - expected {values['dim'] - 1} phases")
        if np.any(value < 0) or np.any(value > PHI_MAX):
            raise ValueError("Not a valid phis - outside [0, 2pi]")
        return value

    def to_vector(self):
        return np.concatenate([self.thetas, self.phis])

    @classmethod
    def from_vector(cls, dim, x):
        """Folds a raw search vector back into the parameter box."""
        x = np.asarray(x, dtype=float)
        return cls(
            dim=dim,
            thetas=np.clip(x[: dim - 1], 0.0, THETA_MAX),
            phis=np.mod(x[dim - 1:], PHI_MAX),
        )


def parameter_bounds(dim):
    lower = np.zeros(2 * (dim - 1))
    upper = np.concatenate([np.full(dim - 1, THETA_MAX), np.full(dim - 1, PHI_MAX)])
    return lower, upper


def decode_amplitudes(thetas, phis):
    """Amplitudes for the parameters along the last axis; batches are supported."""
    thetas = np.asarray(thetas, dtype=float)
    phis = np.asarray(phis, dtype=float)
    dim = thetas.shape[-1] + 1
    radial = np.ones(thetas.shape[:-1] + (dim,))
    radial[..., 1:] = np.cumprod(np.sin(thetas), axis=-1)
    radial[..., :-1] *= np.cos(thetas)
    phases = np.ones(radial.shape, dtype=complex)
    phases[..., 1:] = np.exp(1j * phis)
    return radial * phases


def decode(p: StateParams) -> PureState:
    return PureState(amps=decode_amplitudes(p.thetas, p.phis))


def encode(psi: PureState) -> StateParams:
    """Inverse of `decode` on canonical pure states."""
    moduli = np.abs(psi.amps)
    tails = np.sqrt(np.cumsum((moduli ** 2)[::-1])[::-1])
    thetas = np.arctan2(tails[1:], moduli[:-1])
    phis = np.where(moduli[1:] > 1e-12, np.mod(np.angle(psi.amps[1:]), PHI_MAX), 0.0)
    return StateParams(dim=psi.dim, thetas=np.clip(thetas, 0.0, THETA_MAX), phis=phis)


@dataclass(config=Config, frozen=True, eq=False)
class Diagnostics:
    """
    Bookkeeping of a power computation.

    - `restarts`: local searches attempted (basis states for the scans)
    - `best_restart`: index of the winning start
    - `iterations`: total Nelder-Mead iterations, or grid points for the brute-force oracle
    - `converged`: at least one search met both stopping tolerances
    - `mixed_best`: best gain over the sampled mixed states, when checked
    - `ladder`: extrapolated generator estimates, one per consecutive Δt pair
    """

    restarts: int = 1
    best_restart: int = 0
    iterations: int = 0
    converged: bool = True
    mixed_best: Optional[float] = None
    ladder: Optional[Tuple[float, ...]] = None


class PowerMethod(str, Enum):
    CLOSED_FORM = "closed_form"
    INCOHERENT_SCAN = "incoherent_scan"
    GLOBAL_OPTIMIZATION = "global_optimization"
    BRUTE_FORCE = "brute_force"
    GENERATOR_LIMIT = "generator_limit"


@dataclass(config=Config, frozen=True, eq=False)
class PowerEstimate:
    """
    Result of a coherence power computation.

    **Attributes:**

    - `value` (float): the power, nats for relative entropy (a rate for generators)
    - `measure` (CoherenceMeasureId): measure it was computed with
    - `method` (PowerMethod): how it was obtained
    - `achiever` (PureState): best input state found
    - `diagnostics` (Diagnostics): optimizer bookkeeping
    """

    value: float
    measure: CoherenceMeasureId
    method: PowerMethod
    achiever: Optional[PureState] = None
    diagnostics: Diagnostics = field(default_factory=Diagnostics)


def finalize_estimate(
    u: UnitaryOperator,
    m: CoherenceMeasureId,
    achiever: PureState,
    value: float,
    method: PowerMethod,
    diagnostics: Diagnostics,
) -> PowerEstimate:
    """
    Re-evaluates the achiever through `measures.gain` and refuses to report a value that
    disagrees with it.
    """
    verified = gain(u, density_from_pure(achiever), m)
    if abs(verified - value) > ESTIMATE_TOL:
        raise EstimateMismatch(
            f"Reported {method.value} power {value!r} but the achiever gains {verified!r}"
        )
    return PowerEstimate(
        value=value, measure=m, method=method, achiever=achiever, diagnostics=diagnostics
    )


def _initial_simplex(x0, lower, upper, step):
    simplex = np.tile(x0, (x0.size + 1, 1))
    for k in range(x0.size):
        if x0[k] + step <= upper[k]:
            simplex[k + 1, k] += step
        else:
            simplex[k + 1, k] -= step
    return np.clip(simplex, lower, upper)


def local_maximize(
    objective: Callable[[StateParams], float], start: StateParams, cfg: OptimizerConfig
) -> Tuple[StateParams, float, Diagnostics]:
    """
    Derivative-free Nelder-Mead ascent from `start` inside the parameter box. Stops once the
    simplex diameter is below `param_tol` and the value spread below `value_tol`, or after
    `max_iters` iterations (reported as `converged=False`). The returned value is `objective`
    evaluated at the returned parameters and never falls below the start value.
    """
    start_value = objective(start)
    x0 = start.to_vector()
    if x0.size == 0:
        return start, start_value, Diagnostics()

    lower, upper = parameter_bounds(start.dim)

    def negated(x):
        return -objective(StateParams.from_vector(start.dim, x))

    result = minimize(
        negated,
        x0,
        method="Nelder-Mead",
        bounds=list(zip(lower, upper)),
        options=dict(
            maxiter=cfg.max_iters,
            xatol=cfg.param_tol,
            fatol=cfg.value_tol,
            initial_simplex=_initial_simplex(x0, lower, upper, cfg.initial_step),
        ),
    )
    params = StateParams.from_vector(start.dim, result.x)
    value = objective(params)
    if value < start_value:
        params, value = start, start_value
    diagnostics = Diagnostics(iterations=int(result.nit), converged=result.status == 0)
    if not diagnostics.converged:
        log.debug(f"Local search stopped without converging: {result.message}")
    return params, value, diagnostics


def restart_starts(dim: int, cfg: OptimizerConfig) -> List[StateParams]:
    """
    Basis states, then the maximally coherent state, then uniform random parameters. Random
    start i is drawn from child i of the master seed.
    """
    starts = [encode(basis_state(dim, k)) for k in range(dim)]
    starts.append(encode(maximally_coherent_state(dim)))
    total = max(cfg.restarts, len(starts))
    streams = np.random.SeedSequence(cfg.seed).spawn(total)
    for i in range(len(starts), total):
        rng = np.random.default_rng(streams[i])
        starts.append(
            StateParams(
                dim=dim,
                thetas=rng.uniform(0.0, THETA_MAX, dim - 1),
                phis=rng.uniform(0.0, PHI_MAX, dim - 1),
            )
        )
    return starts


def multistart_maximize(
    objective: Callable[[StateParams], float],
    starts: Sequence[StateParams],
    cfg: OptimizerConfig,
) -> Tuple[StateParams, float, Diagnostics]:
    """
    Runs `local_maximize` from every start and keeps the best value, lowest start index on
    ties. Execution order does not affect the result.
    """

    def run(start):
        return local_maximize(objective, start, cfg)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(run, starts))
    else:
        outcomes = [run(start) for start in starts]

    best = max(range(len(outcomes)), key=lambda i: (outcomes[i][1], -i))
    params, value, _ = outcomes[best]
    log.debug(f"Best of {len(outcomes)} restarts is #{best} with value {value!r}")
    diagnostics = Diagnostics(
        restarts=len(outcomes),
        best_restart=best,
        iterations=sum(d.iterations for _, _, d in outcomes),
        converged=any(d.converged for _, _, d in outcomes),
    )
    return params, value, diagnostics


def _grid_axes(dim, grid_steps):
    theta_axis = np.linspace(0.0, THETA_MAX, grid_steps)
    phi_axis = np.linspace(0.0, PHI_MAX, grid_steps, endpoint=False)
    return [theta_axis] * (dim - 1) + [phi_axis] * (dim - 1)


def brute_force_power(
    u: UnitaryOperator, m: CoherenceMeasureId, grid_steps: int = 48
) -> PowerEstimate:
    """
    Exhaustive evaluation of the pure-state gain on a grid of `grid_steps` points per
    coordinate (angles include both ends of [0, π/2], phases exclude 2π). Only N ≤ 3 is
    accepted. Grids are nested when the finer one has `k·(s-1)+1` angle and `k·s` phase
    points, so refining never lowers the result.
    """
    m = CoherenceMeasureId(m)
    if u.dim > MAX_BRUTE_FORCE_DIM:
        raise DimensionMismatch(
            f"Brute-force grid limited to dimension {MAX_BRUTE_FORCE_DIM} - got {u.dim}"
        )
    if grid_steps < MIN_GRID_STEPS:
        raise ValueError(f"Not a valid grid_steps - {grid_steps} < {MIN_GRID_STEPS}")

    dim = u.dim
    if dim == 1:
        achiever = basis_state(1, 0)
        return finalize_estimate(
            u, m, achiever, 0.0, PowerMethod.BRUTE_FORCE, Diagnostics(iterations=1)
        )

    axes = _grid_axes(dim, grid_steps)
    rest = np.stack([g.ravel() for g in np.meshgrid(*axes[1:], indexing="ij")], axis=-1)
    best_value, best_point, evaluated = -np.inf, None, 0
    for first in axes[0]:
        points = np.hstack([np.full((rest.shape[0], 1), first), rest])
        values = pure_gain_batch(
            u.mat, decode_amplitudes(points[:, : dim - 1], points[:, dim - 1:]), m
        )
        evaluated += values.size
        k = int(np.argmax(values))
        if values[k] > best_value:
            best_value, best_point = float(values[k]), points[k]

    params = StateParams(dim=dim, thetas=best_point[: dim - 1], phis=best_point[dim - 1:])
    diagnostics = Diagnostics(iterations=evaluated)
    return finalize_estimate(
        u, m, decode(params), best_value, PowerMethod.BRUTE_FORCE, diagnostics
    )


def with_seed(cfg: OptimizerConfig, seed: int) -> OptimizerConfig:
    return replace(cfg, seed=seed)
