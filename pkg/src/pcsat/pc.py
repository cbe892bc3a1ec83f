"""Linear integer path conditions: parsing, printing, and canonization.

A path condition (PC) is a conjunction of linear constraints over integer
variables.  Every constraint is stored in the left-normal form

    c0*v0 + c1*v1 + ... + k  op  0

with arbitrary-precision integer coefficients.  Canonization rewrites every
comparison into the operator set {==, !=, <=} using integer tightening,
normalizes coefficients by their GCD, drops constant tautologies, removes
duplicate constraints, orders the remaining constraints, and renames
variables by first appearance, so that equivalent conditions collide on
their printed form.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping


class PcError(ValueError):
    """Base class for path-condition errors."""


class ParseError(PcError):
    """Malformed PC text.  Carries the byte offset of the offence."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class NonlinearError(PcError):
    """A term of degree greater than one (e.g. a product of variables)."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)
        self.position = position


class Op(Enum):
    """Comparison operator of a constraint against zero.

    EQ, NEQ and LEQ are the canonical operators; LT, GT and GEQ occur only
    in freshly parsed constraints and never survive canonization.
    """

    EQ = "=="
    NEQ = "!="
    LEQ = "<="
    LT = "<"
    GT = ">"
    GEQ = ">="

    @property
    def is_canonical(self) -> bool:
        return self in (Op.EQ, Op.NEQ, Op.LEQ)

    def negated(self) -> "Op":
        return _NEGATIONS[self]

    def holds(self, value: int) -> bool:
        """Truth of ``value op 0``."""
        if self is Op.EQ:
            return value == 0
        if self is Op.NEQ:
            return value != 0
        if self is Op.LEQ:
            return value <= 0
        if self is Op.LT:
            return value < 0
        if self is Op.GT:
            return value > 0
        return value >= 0


_NEGATIONS = {
    Op.EQ: Op.NEQ,
    Op.NEQ: Op.EQ,
    Op.LEQ: Op.GT,
    Op.GT: Op.LEQ,
    Op.LT: Op.GEQ,
    Op.GEQ: Op.LT,
}

# Rank used both for constraint ordering and for the matrix op column.
OP_RANK = {Op.EQ: 0, Op.NEQ: 1, Op.LEQ: 2}


class LinearConstraint:
    """One linear constraint ``sum(coeffs[v] * x_v) + constant  op  0``.

    Zero coefficients are never stored (absent means zero).  Instances are
    immutable by convention: never mutate ``coeffs`` after construction.
    """

    __slots__ = ("coeffs", "constant", "op", "_key")

    def __init__(self, coeffs: Mapping[int, int], constant: int, op: Op):
        self.coeffs: dict[int, int] = {
            v: c for v, c in sorted(coeffs.items()) if c != 0
        }
        self.constant = constant
        self.op = op
        self._key = (tuple(self.coeffs.items()), constant, op)

    def __eq__(self, other) -> bool:
        return isinstance(other, LinearConstraint) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        return f"LinearConstraint({self.coeffs!r}, {self.constant!r}, {self.op.name})"

    def evaluate(self, assignment: Mapping[int, int]) -> bool:
        """Truth under a concrete assignment; absent variables count as 0."""
        total = sum(c * assignment.get(v, 0) for v, c in self.coeffs.items())
        return self.op.holds(total + self.constant)

    def negated(self) -> "LinearConstraint":
        return LinearConstraint(self.coeffs, self.constant, self.op.negated())

    def renamed(self, mapping: Mapping[int, int]) -> "LinearConstraint":
        return LinearConstraint(
            {mapping[v]: c for v, c in self.coeffs.items()}, self.constant, self.op
        )


class PathCondition:
    """An ordered conjunction of linear constraints.

    ``canonical`` marks values produced by :func:`canonize`.  Structural
    equality compares the constraint sequences and ignores the flag, so a
    parse/format round trip compares equal to its source value.
    """

    __slots__ = ("constraints", "canonical")

    def __init__(self, constraints: Iterable[LinearConstraint], canonical: bool = False):
        self.constraints: tuple[LinearConstraint, ...] = tuple(constraints)
        self.canonical = canonical

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PathCondition)
            and self.constraints == other.constraints
        )

    def __hash__(self) -> int:
        return hash(self.constraints)

    def __len__(self) -> int:
        return len(self.constraints)

    def __repr__(self) -> str:
        return f"PathCondition({list(self.constraints)!r}, canonical={self.canonical})"

    def variables(self) -> list[int]:
        """Sorted distinct variable indices used by any constraint."""
        seen: set[int] = set()
        for c in self.constraints:
            seen.update(c.coeffs)
        return sorted(seen)

    def evaluate(self, assignment: Mapping[int, int]) -> bool:
        return all(c.evaluate(assignment) for c in self.constraints)


@dataclass(frozen=True)
class PcDimension:
    """Constraint count, highest term degree, and variable count."""

    d: int
    n: int
    t: int


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<int>\d+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>&&|==|!=|<=|>=|<|>|\+|-|\*)"
    r"|(?P<space>\s+)"
    r"|(?P<bad>.)"
)

_RELOPS = {"==": Op.EQ, "!=": Op.NEQ, "<=": Op.LEQ, "<": Op.LT, ">": Op.GT, ">=": Op.GEQ}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        if kind == "space":
            continue
        if kind == "bad":
            raise ParseError(f"unexpected character {m.group()!r}", m.start())
        tokens.append((kind, m.group(), m.start()))
    tokens.append(("end", "", len(text)))
    return tokens


class _PcParser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.var_index: dict[str, int] = {}

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def pc(self) -> PathCondition:
        constraints = [self.cmp()]
        while self.peek()[:2] == ("op", "&&"):
            self.advance()
            constraints.append(self.cmp())
        kind, value, at = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {value!r}", at)
        return PathCondition(constraints, canonical=False)

    def cmp(self) -> LinearConstraint:
        lhs_coeffs, lhs_k = self.expr()
        kind, value, at = self.peek()
        if kind != "op" or value not in _RELOPS:
            raise ParseError("expected a comparison operator", at)
        self.advance()
        op = _RELOPS[value]
        rhs_coeffs, rhs_k = self.expr()
        coeffs = dict(lhs_coeffs)
        for v, c in rhs_coeffs.items():
            coeffs[v] = coeffs.get(v, 0) - c
        return LinearConstraint(coeffs, lhs_k - rhs_k, op)

    def expr(self) -> tuple[dict[int, int], int]:
        coeffs: dict[int, int] = {}
        const = 0

        def add(coeff: int, var: int | None):
            nonlocal const
            if var is None:
                const += coeff
            else:
                coeffs[var] = coeffs.get(var, 0) + coeff

        add(*self.term(1))
        while True:
            kind, value, at = self.peek()
            if kind == "op" and value in ("+", "-"):
                self.advance()
                add(*self.term(1 if value == "+" else -1))
            elif kind == "op" and value == "*":
                raise NonlinearError("term has degree greater than one", at)
            else:
                return coeffs, const

    def term(self, sign: int) -> tuple[int, int | None]:
        kind, value, at = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            kind, value, at = self.peek()
            if kind != "int":
                raise ParseError("expected an integer after unary minus", at)
            sign = -sign
        if kind == "int":
            self.advance()
            coeff = sign * int(value)
            kind, value, at = self.peek()
            if kind == "op" and value == "*":
                self.advance()
                kind, value, at = self.peek()
                if kind != "ident":
                    raise ParseError("expected a variable after '*'", at)
                self.advance()
                return coeff, self._index(value)
            return coeff, None
        if kind == "ident":
            self.advance()
            nk, nv, nat = self.peek()
            if nk == "op" and nv == "*":
                fk, _, _ = self.tokens[self.pos + 1]
                if fk == "ident":
                    raise NonlinearError("product of variables", nat)
                raise ParseError("integer coefficient must precede the variable", nat)
            return sign, self._index(value)
        raise ParseError("expected a term", at)

    def _index(self, name: str) -> int:
        if name not in self.var_index:
            self.var_index[name] = len(self.var_index)
        return self.var_index[name]


def parse_pc(text: str) -> PathCondition:
    """Parse one PC from text.

    Variable names are mapped to indices in order of first appearance, so
    alpha-renamed texts parse to identical structures.  The result is not
    canonical.  Raises :class:`ParseError` or :class:`NonlinearError`.
    """
    return _PcParser(text).pc()


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def format_constraint(c: LinearConstraint) -> str:
    parts = [f"{coeff}*v{v}" for v, coeff in c.coeffs.items()]
    parts.append(str(c.constant))
    return f"{' + '.join(parts)} {c.op.value} 0"


def format_pc(pc: PathCondition) -> str:
    """Deterministic textual form; the reuse-cache key for canonical PCs.

    ``parse_pc(format_pc(pc))`` is structurally equal to ``pc`` whenever the
    variable indices of ``pc`` are dense and ordered by first appearance,
    which holds for every parsed or canonized PC.
    """
    return " && ".join(format_constraint(c) for c in pc.constraints)


# ---------------------------------------------------------------------------
# Canonization
# ---------------------------------------------------------------------------

TAUTOLOGY = LinearConstraint({}, 0, Op.EQ)       # 0 == 0
CONTRADICTION = LinearConstraint({}, 1, Op.LEQ)  # 1 <= 0


def rewrite_op(c: LinearConstraint) -> LinearConstraint:
    """Rewrite LT/GT/GEQ into LEQ with integer tightening.

    a < 0  =>  a + 1 <= 0;  a > 0  =>  -a + 1 <= 0;  a >= 0  =>  -a <= 0.
    Sound and complete over the integers.
    """
    if c.op.is_canonical:
        return c
    if c.op is Op.LT:
        return LinearConstraint(c.coeffs, c.constant + 1, Op.LEQ)
    neg = {v: -k for v, k in c.coeffs.items()}
    if c.op is Op.GT:
        return LinearConstraint(neg, -c.constant + 1, Op.LEQ)
    return LinearConstraint(neg, -c.constant, Op.LEQ)


def normalize_constraint(c: LinearConstraint) -> LinearConstraint | bool:
    """GCD-normalize a constraint that already has a canonical op.

    Returns the truth value directly for constant-only constraints.  For
    EQ/NEQ the GCD of coefficients and constant divides everything; for LEQ
    only the coefficients are divided and the constant is tightened to
    ceil(k/g), which preserves the integer solution set exactly.
    """
    if not c.coeffs:
        return c.op.holds(c.constant)
    g = math.gcd(*c.coeffs.values())
    if c.op is Op.LEQ:
        if g == 1:
            return c
        coeffs = {v: k // g for v, k in c.coeffs.items()}
        return LinearConstraint(coeffs, -((-c.constant) // g), Op.LEQ)
    g = math.gcd(g, abs(c.constant))
    if g == 1:
        return c
    coeffs = {v: k // g for v, k in c.coeffs.items()}
    return LinearConstraint(coeffs, c.constant // g, c.op)


def _order_key(c: LinearConstraint):
    # Invariant under variable renaming, so canonization is a fixpoint:
    # re-canonizing a canonical PC neither reorders nor renames anything.
    return (-len(c.coeffs), sorted(c.coeffs.values()), OP_RANK[c.op], c.constant)


def canonize(pc: PathCondition) -> PathCondition:
    """Produce the canonical form: equisatisfiable, deterministic, idempotent.

    Operators are rewritten to {==, !=, <=}, constraints GCD-normalized,
    constant constraints evaluated away (a false one collapses the whole PC
    to ``1 <= 0``), duplicates dropped, constraints ordered, and variables
    renamed 0..t-1 by first appearance in the final order.
    """
    if pc.canonical:
        return pc
    kept: list[LinearConstraint] = []
    seen: set[LinearConstraint] = set()
    for c in pc.constraints:
        r = normalize_constraint(rewrite_op(c))
        if r is True:
            continue
        if r is False:
            return PathCondition((CONTRADICTION,), canonical=True)
        if r not in seen:
            seen.add(r)
            kept.append(r)
    if not kept:
        return PathCondition((TAUTOLOGY,), canonical=True)
    kept.sort(key=_order_key)
    mapping: dict[int, int] = {}
    for c in kept:
        for v in c.coeffs:
            if v not in mapping:
                mapping[v] = len(mapping)
    return PathCondition((c.renamed(mapping) for c in kept), canonical=True)


def dimension_of(pc: PathCondition) -> PcDimension:
    """(d, n, t): constraint count, max term degree, variable count.

    The parser rejects terms of degree above one, so n is 1 when any
    variable occurs and 0 for constant-only conditions.
    """
    n = 1 if any(c.coeffs for c in pc.constraints) else 0
    return PcDimension(len(pc.constraints), n, len(pc.variables()))
