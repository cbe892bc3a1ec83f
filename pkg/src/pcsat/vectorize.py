"""Fixed-width integer matrix encoding of canonical path conditions.

A PC with d constraints over at most t_max variables becomes a d x (t_max+2)
matrix: one row per constraint, columns 0..t_max-1 hold the variable
coefficients (zero for absent variables), column t_max the constant term,
and the last column the operator code (0 for ==, 1 for !=, 2 for <=).
An all-zero row encodes the tautology 0 == 0.
"""

from __future__ import annotations

from dataclasses import dataclass

from .pc import OP_RANK, LinearConstraint, Op, PathCondition

CELL_CAP = 2**31 - 1

_CODE_OPS = {0: Op.EQ, 1: Op.NEQ, 2: Op.LEQ}


class VectorizeError(ValueError):
    pass


class NotCanonical(VectorizeError):
    pass


class TooManyVariables(VectorizeError):
    def __init__(self, t: int, t_max: int):
        super().__init__(f"{t} variables exceed the group capacity {t_max}")
        self.t = t
        self.t_max = t_max


class CellOverflow(VectorizeError):
    def __init__(self, value: int):
        super().__init__(f"coefficient {value} exceeds the cell capacity {CELL_CAP}")
        self.value = value


@dataclass(frozen=True)
class PcMatrix:
    """Row-major integer matrix; immutable and hashable."""

    cells: tuple[tuple[int, ...], ...]
    t_max: int

    @property
    def rows(self) -> int:
        return len(self.cells)

    @property
    def cols(self) -> int:
        return self.t_max + 2

    def flatten(self) -> tuple[int, ...]:
        return tuple(x for row in self.cells for x in row)


def vectorize(pc: PathCondition, t_max: int) -> PcMatrix:
    """Encode a canonical PC at variable capacity ``t_max``."""
    if not pc.canonical:
        raise NotCanonical("vectorize requires a canonical path condition")
    t = len(pc.variables())
    if t > t_max:
        raise TooManyVariables(t, t_max)
    rows = []
    for c in pc.constraints:
        row = [0] * (t_max + 2)
        for v, coeff in c.coeffs.items():
            if abs(coeff) > CELL_CAP:
                raise CellOverflow(coeff)
            row[v] = coeff
        if abs(c.constant) > CELL_CAP:
            raise CellOverflow(c.constant)
        row[t_max] = c.constant
        row[t_max + 1] = OP_RANK[c.op]
        rows.append(tuple(row))
    return PcMatrix(tuple(rows), t_max)


def matrix_key(m: PcMatrix) -> bytes:
    """Injective byte key over matrices; the dataset dedup key."""
    body = ";".join(",".join(str(x) for x in row) for row in m.cells)
    return f"{m.rows}x{m.cols}:{body}".encode()


def pad_rows(m: PcMatrix, extra: int) -> PcMatrix:
    """Append all-zero rows, each the tautology 0 == 0."""
    if extra < 0:
        raise ValueError("extra must be non-negative")
    zero = tuple([0] * m.cols)
    return PcMatrix(m.cells + (zero,) * extra, m.t_max)


def decode_matrix(m: PcMatrix, assume_canonical: bool = False) -> PathCondition:
    """Reconstruct a PC from a matrix (test and debugging helper).

    ``assume_canonical`` marks the result canonical; valid for matrices that
    came straight out of :func:`vectorize`, not for padded ones.
    """
    constraints = []
    for row in m.cells:
        code = row[m.t_max + 1]
        if code not in _CODE_OPS:
            raise VectorizeError(f"unknown operator code {code}")
        coeffs = {v: c for v, c in enumerate(row[: m.t_max]) if c != 0}
        constraints.append(LinearConstraint(coeffs, row[m.t_max], _CODE_OPS[code]))
    return PathCondition(constraints, canonical=assume_canonical)


def dump_matrix(m: PcMatrix) -> str:
    """Debugging dump: tab-separated decimal integers, one row per line."""
    return "\n".join("\t".join(str(x) for x in row) for row in m.cells)
