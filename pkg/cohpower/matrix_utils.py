"""
Helpers for reading and writing matrix files and for building the `--builtin` operators.

File format: UTF-8 text, `#` lines are comments, the first line holds N, then N rows of N
whitespace-separated `re,im` entries. A vector is written as N followed by a single row.
"""
from math import pi
from pathlib import Path
from typing import Union

import numpy as np

from .core import (
    CohpowerError,
    HamiltonianOperator,
    UnitaryOperator,
    fourier_unitary,
    haar_random_unitary,
    identity_unitary,
    pauli_x,
    rotation_x,
)

PathLike = Union[str, Path]


class MatrixParseError(CohpowerError, ValueError):
    """Malformed matrix file. `line` and `column` are 1-based, column counts entries."""

    def __init__(self, message, line, column=None):
        where = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.column = column


def _parse_entry(token, line, column):
    parts = token.split(",")
    if len(parts) != 2:
        raise MatrixParseError(f"expected 're,im', got {token!r}", line, column)
    try:
        return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        raise MatrixParseError(f"not a number pair {token!r}", line, column)


def parse_matrix(text: str, allow_vector: bool = True) -> np.ndarray:
    """
    Parses file contents into an N×N matrix. With `allow_vector`, a file holding a single row
    is a length-N vector; otherwise it is reported as missing rows.
    """
    rows = [
        (number, raw.split())
        for number, raw in enumerate(text.splitlines(), start=1)
        if raw.strip() and not raw.lstrip().startswith("#")
    ]
    if not rows:
        raise MatrixParseError("missing dimension header", 1)

    header_line, header = rows[0]
    try:
        (dim,) = header
        dim = int(dim)
    except ValueError:
        raise MatrixParseError(f"expected a single integer N, got {' '.join(header)!r}", header_line)
    if dim < 1:
        raise MatrixParseError(f"dimension must be positive, got {dim}", header_line)

    body = rows[1:]
    entries = []
    for number, tokens in body:
        if len(tokens) != dim:
            raise MatrixParseError(f"expected {dim} entries, got {len(tokens)}", number)
        entries.append([_parse_entry(tok, number, col) for col, tok in enumerate(tokens, start=1)])

    if allow_vector and len(entries) == 1 and dim > 1:
        return np.array(entries[0], dtype=complex)
    if len(entries) != dim:
        last = body[-1][0] if body else header_line
        raise MatrixParseError(f"expected {dim} rows, got {len(entries)}", last)
    return np.array(entries, dtype=complex)


def read_matrix_file(path: PathLike, allow_vector: bool = True) -> np.ndarray:
    return parse_matrix(Path(path).read_text(encoding="utf-8"), allow_vector)


def format_matrix(values) -> str:
    """Writes a matrix or vector with 17 significant digits per component."""
    arr = np.asarray(values, dtype=complex)
    rows = arr[np.newaxis, :] if arr.ndim == 1 else arr
    lines = [str(arr.shape[0])]
    for row in rows:
        lines.append(" ".join(f"{z.real:.17g},{z.imag:.17g}" for z in row))
    return "\n".join(lines) + "\n"


def write_matrix_file(values, path: PathLike) -> None:
    Path(path).write_text(format_matrix(values), encoding="utf-8")


def builtin_unitary(key: str) -> UnitaryOperator:
    """
    Builds a unitary from `identity:N`, `fourier:N`, `rx:THETA` (3×3) or `haar:N:SEED`.
    `THETA` also accepts `pi/K`.
    """
    name, _, arg = key.partition(":")
    try:
        if name == "identity":
            return identity_unitary(int(arg))
        if name == "fourier":
            return fourier_unitary(int(arg))
        if name == "rx":
            return rotation_x(_parse_angle(arg))
        if name == "haar":
            dim, _, seed = arg.partition(":")
            return haar_random_unitary(int(dim), int(seed or 0))
    except ValueError as err:
        raise ValueError(f"Not a valid builtin - {key}: {err}")
    raise ValueError(f"Not a valid builtin - {key}")


def builtin_hamiltonian(key: str) -> HamiltonianOperator:
    """Builds a generator from `pauli-x`, `zero:N` or `diag:E1,E2,...`."""
    name, _, arg = key.partition(":")
    try:
        if name == "pauli-x":
            return pauli_x()
        if name == "zero":
            return HamiltonianOperator(mat=np.zeros((int(arg), int(arg))))
        if name == "diag":
            return HamiltonianOperator(mat=np.diag([float(x) for x in arg.split(",")]))
    except ValueError as err:
        raise ValueError(f"Not a valid builtin - {key}: {err}")
    raise ValueError(f"Not a valid builtin - {key}")


def _parse_angle(text):
    if text.startswith("pi/"):
        return pi / float(text[3:])
    return float(text)
