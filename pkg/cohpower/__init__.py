from .core import (
    DensityMatrix,
    HamiltonianOperator,
    PureState,
    UnitaryOperator,
    density_from_pure,
    fourier_unitary,
    haar_random_unitary,
    rotation_x,
)
from .measures import CoherenceMeasureId, c_l1, c_rel_ent, coherence, gain
from .optim import GeneratorConfig, OptimizerConfig, PowerEstimate, brute_force_power
from .power import (
    compare_powers,
    generator_power,
    global_power,
    incoherent_power,
    qubit_l1_power,
)

__version__ = "0.1.0"

__all__ = [
    "DensityMatrix",
    "HamiltonianOperator",
    "PureState",
    "UnitaryOperator",
    "density_from_pure",
    "fourier_unitary",
    "haar_random_unitary",
    "rotation_x",
    "CoherenceMeasureId",
    "c_l1",
    "c_rel_ent",
    "coherence",
    "gain",
    "GeneratorConfig",
    "OptimizerConfig",
    "PowerEstimate",
    "brute_force_power",
    "compare_powers",
    "generator_power",
    "global_power",
    "incoherent_power",
    "qubit_l1_power",
]
