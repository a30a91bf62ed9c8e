"""
Command-line surface of cohpower.

```
cohpower measure STATE_FILE --measure l1
cohpower power [UNITARY_FILE | --builtin rx:pi/4] --measure l1 --mode global --json
cohpower generator --builtin pauli-x --measure l1
cohpower reproduce --seed 3
cohpower haar-scan --dim 3 --samples 100 --measure relent --out scan.csv
```

Exit codes: 0 ok, 1 failed reproduction check, 2 parse or argument error, 3 invariant
violation, 4 mode/dimension mismatch, 5 optimizer failure, 6 unwritable output.
"""
import argparse
import csv
import json
import logging
import os
import sys
import time
from math import pi, sqrt
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np
from pydantic import BaseSettings, ValidationError, validator
from pydantic.dataclasses import dataclass
from tabulate import tabulate

from .core import (
    CohpowerError,
    Config,
    DensityMatrix,
    DimensionMismatch,
    HamiltonianOperator,
    LimitNotConverged,
    OptimizerError,
    PureState,
    UnitaryOperator,
    density_from_pure,
    fourier_unitary,
    haar_random_unitary,
    pauli_x,
    rotation_x,
)
from .matrix_utils import (
    MatrixParseError,
    builtin_hamiltonian,
    builtin_unitary,
    read_matrix_file,
)
from .measures import CoherenceMeasureId, coherence, gain
from .optim import (
    GeneratorConfig,
    OptimizerConfig,
    PowerEstimate,
    brute_force_power,
    with_seed,
)
from .power import (
    compare_powers,
    gap_summary,
    generator_power,
    global_power,
    incoherent_l1_power,
    incoherent_power,
    incoherent_relent_power,
    qubit_l1_power,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_PARSE = 2
EXIT_INVARIANT = 3
EXIT_MISMATCH = 4
EXIT_OPTIMIZER = 5
EXIT_OUTPUT = 6

CSV_HEADER = ["label", "N", "measure", "incoherent", "global", "gap", "seed", "ms"]
_CSV_TYPES = {"N": int, "seed": int, "incoherent": float, "global": float, "gap": float, "ms": float}

MODES = ("incoherent", "global", "qubit", "brute")


class ReportFormatError(CohpowerError, ValueError):
    """A report CSV whose layout does not match `CSV_HEADER`."""


class CliSettings(BaseSettings):
    """Defaults read from the environment: `COHPOWER_SEED`, `COHPOWER_LOG_LEVEL`."""

    seed: int = 0
    log_level: str = "WARNING"

    class Config:
        env_prefix = "COHPOWER_"


@dataclass(config=Config, frozen=True, eq=False)
class ReportRow:
    """
    One unitary of a population scan.

    **Attributes:**

    - `label` (str): where the unitary came from, e.g. `haar:3:17`
    - `dim` (int): dimension N
    - `measure` (CoherenceMeasureId): coherence measure
    - `incoherent` (float): incoherent-restricted power
    - `global_` (float): global search power
    - `gap` (float): `global_ - incoherent`
    - `achiever` (tuple): `(re, im)` amplitudes of the global achiever
    - `restarts` (int): restarts of the global search
    - `seed` (int): seed of the sample and of its search
    - `ms` (float): wall time of the row in milliseconds
    """

    label: str
    dim: int
    measure: CoherenceMeasureId
    incoherent: float
    global_: float
    gap: float
    achiever: Tuple[Tuple[float, float], ...]
    restarts: int
    seed: int
    ms: float

    @validator("gap")
    def _valid_gap(cls, value, values):
        if "incoherent" in values and "global_" in values:
            residual = abs(value - (values["global_"] - values["incoherent"]))
            if residual > 1e-12:
                raise ValueError(f"Not a valid gap - residual {residual:.3e}")
        return value

    @classmethod
    def from_comparison(cls, label, comparison, seed, ms):
        best = comparison.global_
        return cls(
            label=label,
            dim=best.achiever.dim,
            measure=best.measure,
            incoherent=comparison.incoherent.value,
            global_=best.value,
            gap=comparison.gap,
            achiever=_amplitude_pairs(best.achiever),
            restarts=best.diagnostics.restarts,
            seed=seed,
            ms=ms,
        )

    def as_record(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "N": self.dim,
            "measure": self.measure.value,
            "incoherent": self.incoherent,
            "global": self.global_,
            "gap": self.gap,
            "seed": self.seed,
            "ms": self.ms,
        }


def _format_field(value):
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_report_csv(records: Iterable[Mapping[str, Any]], handle) -> None:
    """Writes records under `CSV_HEADER`; floats keep 17 significant digits."""
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for record in records:
        writer.writerow([_format_field(record[key]) for key in CSV_HEADER])


def read_report_csv(path) -> List[Dict[str, Any]]:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != CSV_HEADER:
            raise ReportFormatError(f"Unexpected CSV header in {path} - {reader.fieldnames}")
        return [
            {key: _CSV_TYPES.get(key, str)(raw) for key, raw in row.items()} for row in reader
        ]


def _amplitude_pairs(psi: Optional[PureState]):
    if psi is None:
        return None
    return tuple((float(z.real), float(z.imag)) for z in psi.amps)


def estimate_report(estimate: PowerEstimate, seed: Optional[int]) -> Dict[str, Any]:
    """JSON-ready view of a `PowerEstimate`."""
    pairs = _amplitude_pairs(estimate.achiever)
    return {
        "value": estimate.value,
        "measure": estimate.measure.value,
        "method": estimate.method.value,
        "achiever": [list(p) for p in pairs] if pairs is not None else None,
        "diagnostics": {
            "restarts": estimate.diagnostics.restarts,
            "iterations": estimate.diagnostics.iterations,
            "converged": estimate.diagnostics.converged,
        },
        "seed": seed,
    }


def _print_estimate(estimate: PowerEstimate, seed, as_json, out=None):
    report = estimate_report(estimate, seed)
    if out:
        Path(out).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    if as_json:
        print(json.dumps(report, indent=2))
        return
    print(f"value: {estimate.value:.12g}")
    print(f"measure: {report['measure']}")
    print(f"method: {report['method']}")
    if report["achiever"] is not None:
        amps = " ".join(f"{re:.12g},{im:.12g}" for re, im in report["achiever"])
        print(f"achiever: {amps}")


def _optimizer_config(args, settings):
    seed = args.seed if args.seed is not None else settings.seed
    return OptimizerConfig(
        restarts=args.restarts, max_iters=args.max_iters, seed=seed, workers=args.workers
    )


def _read_input(path, allow_vector=False):
    try:
        return read_matrix_file(path, allow_vector)
    except OSError as err:
        raise ValueError(f"Cannot read {path}: {err.strerror}")


def _load_unitary(args) -> UnitaryOperator:
    if args.builtin:
        return builtin_unitary(args.builtin)
    if not args.file:
        raise ValueError("Need either a unitary file or --builtin")
    return UnitaryOperator(mat=_read_input(args.file))


def cmd_measure(args, settings) -> int:
    """Prints the coherence of the state stored in `args.file`."""
    values = _read_input(args.file, allow_vector=True)
    if values.ndim == 1:
        rho = density_from_pure(PureState(amps=values))
    else:
        rho = DensityMatrix(mat=values)
    print(f"{coherence(rho, CoherenceMeasureId.parse(args.measure)):.12g}")
    return EXIT_OK


def cmd_power(args, settings) -> int:
    """Prints the coherence power of a unitary in the requested mode."""
    u = _load_unitary(args)
    m = CoherenceMeasureId.parse(args.measure)
    cfg = _optimizer_config(args, settings)
    seed = None
    if args.mode == "incoherent":
        estimate = incoherent_power(u, m)
    elif args.mode == "qubit":
        if m is not CoherenceMeasureId.L1:
            raise DimensionMismatch("Qubit closed form exists only for the l1 measure")
        estimate = qubit_l1_power(u)
    elif args.mode == "brute":
        estimate = brute_force_power(u, m, args.grid_steps)
    else:
        seed = cfg.seed
        try:
            estimate = global_power(u, m, cfg)
        except OptimizerError as err:
            print(f"Optimizer failure: {err}", file=sys.stderr)
            if err.partial is not None:
                _print_estimate(err.partial, seed, args.json)
            return EXIT_OPTIMIZER
    _print_estimate(estimate, seed, args.json, args.out)
    return EXIT_OK


def cmd_generator(args, settings) -> int:
    """Prints the coherence power of a Hamiltonian generator."""
    if args.builtin:
        h = builtin_hamiltonian(args.builtin)
    elif args.file:
        h = HamiltonianOperator(mat=_read_input(args.file))
    else:
        raise ValueError("Need either a Hamiltonian file or --builtin")
    cfg = GeneratorConfig(inner=_optimizer_config(args, settings))
    estimate = generator_power(h, CoherenceMeasureId.parse(args.measure), cfg)
    _print_estimate(estimate, cfg.inner.seed, args.json, args.out)
    return EXIT_OK


def _check(rows, name, expected, computed, tolerance, passed):
    rows.append((name, expected, computed, tolerance, "PASS" if passed else "FAIL"))


def reproduction_checks(cfg: OptimizerConfig) -> List[Tuple[str, str, float, str, str]]:
    """
    Runs the fixed reproduction suite and returns `(check, expected, computed, tolerance,
    verdict)` rows.
    """
    rows = []
    l1, relent = CoherenceMeasureId.L1, CoherenceMeasureId.RELENT

    deviations = []
    for i in range(100):
        u = haar_random_unitary(2, np.random.SeedSequence([cfg.seed, i]))
        deviations.append(global_power(u, l1, cfg).value - qubit_l1_power(u).value)
    worst = max(abs(d) for d in deviations)
    _check(
        rows, "Haar qubits global l1 = closed form", "0", worst, "1e-4 (above: 1e-6)",
        worst <= 1e-4 and max(deviations) <= 1e-6,
    )

    rx4 = rotation_x(pi / 4)
    c1 = 0.3
    witness = density_from_pure(PureState(amps=[c1, 0.0, sqrt(1 - c1 ** 2)]))
    value = incoherent_l1_power(rx4).value
    _check(rows, "Rx(pi/4) incoherent l1 = 1", "1", value, "1e-12", abs(value - 1) <= 1e-12)
    value = gain(rx4, witness, l1)
    _check(rows, "Rx(pi/4) witness gain l1", "1.1471", value, "5e-5", abs(value - 1.1471) <= 5e-5)
    rx4_global = global_power(rx4, l1, cfg).value
    _check(rows, "Rx(pi/4) global l1 >= 1.1471", ">= 1.1471", rx4_global, "1e-4",
           rx4_global >= 1.1471 - 1e-4)

    rx8 = rotation_x(pi / 8)
    q3 = 0.12533
    witness = density_from_pure(PureState(amps=[0.0, sqrt(1 - q3 ** 2), q3]))
    value = incoherent_relent_power(rx8).value
    _check(rows, "Rx(pi/8) incoherent relent = 0.41650", "0.41650", value, "5e-5",
           abs(value - 0.41650) <= 5e-5)
    value = gain(rx8, witness, relent)
    _check(rows, "Rx(pi/8) witness gain relent", "0.47648", value, "5e-5",
           abs(value - 0.47648) <= 5e-5)
    value = global_power(rx8, relent, cfg).value
    _check(rows, "Rx(pi/8) global relent >= 0.47648", ">= 0.47648", value, "1e-4",
           value >= 0.47648 - 1e-4)

    for n in range(2, 7):
        value = incoherent_l1_power(fourier_unitary(n)).value
        _check(rows, f"Fourier N={n} incoherent l1 = N-1", str(n - 1), value, "1e-9",
               abs(value - (n - 1)) <= 1e-9)

    brute = brute_force_power(rx4, l1, 48).value
    _check(rows, "Rx(pi/4) brute l1 (48 steps) >= 1.146", ">= 1.146", brute, "0", brute >= 1.146)
    _check(rows, "Rx(pi/4) brute l1 <= global l1", f"<= {rx4_global:.6f}", brute, "1e-6",
           brute <= rx4_global + 1e-6)

    value = generator_power(pauli_x(), l1, GeneratorConfig(inner=cfg)).value
    _check(rows, "Pauli-x generator l1 = 2", "2", value, "1e-3", abs(value - 2) <= 1e-3)
    return rows


def cmd_reproduce(args, settings) -> int:
    """Prints the PASS/FAIL table of the reproduction suite; exit 1 on any FAIL."""
    rows = reproduction_checks(_optimizer_config(args, settings))
    print(
        tabulate(
            rows,
            headers=["Check", "Expected", "Computed", "Tolerance", "Verdict"],
            floatfmt=".6f",
        )
    )
    return EXIT_OK if all(row[-1] == "PASS" for row in rows) else EXIT_CHECK_FAILED


def _writable_target(path) -> bool:
    parent = Path(path).resolve().parent
    return parent.is_dir() and os.access(parent, os.W_OK)


def cmd_haar_scan(args, settings) -> int:
    """
    Writes one CSV row per sampled unitary and prints gap quantiles. The output file is only
    opened once every sample is computed, so a failed scan leaves an existing file untouched.
    """
    if args.dim < 2 or args.samples < 1:
        print("Not a valid scan - needs --dim >= 2 and --samples >= 1", file=sys.stderr)
        return EXIT_PARSE
    if not _writable_target(args.out):
        print(f"Cannot write {args.out}: directory missing or read-only", file=sys.stderr)
        return EXIT_OUTPUT
    m = CoherenceMeasureId.parse(args.measure)
    cfg = _optimizer_config(args, settings)

    if args.builtin:
        samples = [(args.builtin, cfg.seed, builtin_unitary(args.builtin))]
    else:
        samples = (
            (f"haar:{args.dim}:{cfg.seed + i}", cfg.seed + i,
             haar_random_unitary(args.dim, cfg.seed + i))
            for i in range(args.samples)
        )
    rows = []
    for label, seed, u in samples:
        started = time.perf_counter()
        comparison = compare_powers(u, m, with_seed(cfg, seed))
        ms = (time.perf_counter() - started) * 1000.0
        rows.append(ReportRow.from_comparison(label, comparison, seed, ms))
        log.info(f"{label}: gap {comparison.gap!r}")

    try:
        with open(args.out, "w", newline="", encoding="utf-8") as handle:
            write_report_csv((row.as_record() for row in rows), handle)
    except OSError as err:
        print(f"Cannot write {args.out}: {err}", file=sys.stderr)
        return EXIT_OUTPUT

    summary = gap_summary(row.gap for row in rows)
    print(" ".join(f"{name}={value:.12g}" for name, value in summary.items()))
    return EXIT_OK


def _add_search_flags(parser):
    parser.add_argument("--measure", choices=["l1", "relent"], default="l1")
    parser.add_argument("--restarts", type=int, default=64)
    parser.add_argument("--max-iters", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=None, help="overrides COHPOWER_SEED")
    parser.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cohpower", description="Coherence of states and coherence power of unitaries."
    )
    parser.add_argument("--log-level", default=None, help="overrides COHPOWER_LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    measure = commands.add_parser("measure", help="coherence of a state file")
    measure.add_argument("file")
    measure.add_argument("--measure", choices=["l1", "relent"], default="l1")
    measure.set_defaults(handler=cmd_measure)

    power = commands.add_parser("power", help="coherence power of a unitary")
    power.add_argument("file", nargs="?")
    power.add_argument("--builtin", help="identity:N, fourier:N, rx:THETA or haar:N:SEED")
    power.add_argument("--mode", choices=MODES, default="global")
    power.add_argument("--grid-steps", type=int, default=48)
    power.add_argument("--json", action="store_true")
    power.add_argument("--out", help="also write the JSON report to this file")
    _add_search_flags(power)
    power.set_defaults(handler=cmd_power)

    generator = commands.add_parser("generator", help="coherence power of a Hamiltonian")
    generator.add_argument("file", nargs="?")
    generator.add_argument("--builtin", help="pauli-x, zero:N or diag:E1,E2,...")
    generator.add_argument("--json", action="store_true")
    generator.add_argument("--out", help="also write the JSON report to this file")
    _add_search_flags(generator)
    generator.set_defaults(handler=cmd_generator)

    reproduce = commands.add_parser("reproduce", help="run the reproduction suite")
    _add_search_flags(reproduce)
    reproduce.set_defaults(handler=cmd_reproduce)

    scan = commands.add_parser("haar-scan", help="incoherent vs global power over Haar samples")
    scan.add_argument("--dim", type=int, default=3)
    scan.add_argument("--samples", type=int, default=100)
    scan.add_argument("--builtin", help="scan this unitary instead of Haar samples")
    scan.add_argument("--out", default="haar_scan.csv")
    _add_search_flags(scan)
    scan.set_defaults(handler=cmd_haar_scan)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    settings = CliSettings()
    logging.basicConfig(
        level=(args.log_level or settings.log_level).upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args, settings)
    except MatrixParseError as err:
        print(f"Parse error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as err:
        print(f"Invariant violation: {err}", file=sys.stderr)
        return EXIT_INVARIANT
    except DimensionMismatch as err:
        print(f"Mismatch: {err}", file=sys.stderr)
        return EXIT_MISMATCH
    except (OptimizerError, LimitNotConverged) as err:
        print(f"Optimizer failure: {err}", file=sys.stderr)
        return EXIT_OPTIMIZER
    except ValueError as err:
        print(f"Argument error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as err:
        print(f"Cannot write output: {err}", file=sys.stderr)
        return EXIT_OUTPUT


if __name__ == "__main__":
    sys.exit(main())
