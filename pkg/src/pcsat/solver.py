"""Exact satisfiability and model generation for linear integer constraints.

The decision procedure first eliminates every equality by exact integer
substitution (with unimodular changes of variables when no unit coefficient
exists), which also decides divisibility-infeasible equality systems on the
spot.  Every disequality is case-split into two inequalities, and the
remaining inequality system is decided by depth-first branch and bound: the
rational relaxation is solved by an exact phase-1 simplex over Fractions
(Bland's rule), and fractional vertices are split on the variable with the
largest fractional part, floor side first.  All variables are confined a
priori to a box that is guaranteed (Borosh-Treybig style bound via
Hadamard's inequality) to contain an integer solution whenever one exists,
so an exhausted search is a sound UNSAT and the procedure terminates within
its node budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .pc import LinearConstraint, Op, PathCondition, normalize_constraint, rewrite_op

DEFAULT_NODE_BUDGET = 100_000


class SolverError(Exception):
    pass


class ResourceLimit(SolverError):
    """Node budget exhausted; the verdict is unknown, never a label."""

    def __init__(self, nodes: int):
        super().__init__(f"branch-and-bound exceeded {nodes} nodes")
        self.nodes = nodes


class BoxTooLarge(SolverError):
    pass


@dataclass(frozen=True)
class Verdict:
    sat: bool
    model: dict[int, int] | None = None

    @staticmethod
    def satisfied(model: dict[int, int]) -> "Verdict":
        return Verdict(True, dict(model))

    @staticmethod
    def unsatisfied() -> "Verdict":
        return Verdict(False, None)


# A row represents  sum(coeffs[v] * x_v) + k <= 0  (or == 0 for eqs).
_Row = tuple[dict[int, int], int]


def _preprocess(pc: PathCondition) -> tuple[list[_Row], list[_Row], list[_Row]] | bool:
    """Split into (eqs, leqs, neqs) rows with GCD tightening applied.

    Returns False when some constraint is unsatisfiable on its own (constant
    falsehood, or an equality whose coefficient GCD does not divide the
    constant) and True when every constraint is trivially true.
    """
    eqs: list[_Row] = []
    leqs: list[_Row] = []
    neqs: list[_Row] = []
    for raw in pc.constraints:
        c = normalize_constraint(rewrite_op(raw))
        if c is True:
            continue
        if c is False:
            return False
        g = math.gcd(*c.coeffs.values())
        if c.op is Op.EQ:
            if c.constant % g != 0:
                return False
            eqs.append(({v: k // g for v, k in c.coeffs.items()}, c.constant // g))
        elif c.op is Op.NEQ:
            if c.constant % g != 0:
                continue  # always true: the variable part is a multiple of g
            neqs.append(({v: k // g for v, k in c.coeffs.items()}, c.constant // g))
        else:
            leqs.append((dict(c.coeffs), c.constant))
    if not (eqs or leqs or neqs):
        return True
    return eqs, leqs, neqs


def _substitute(row: _Row, var: int, expr: _Row) -> _Row:
    """Replace ``var`` by the affine expression in a row, in place-free form."""
    coeffs, k = row
    c = coeffs.get(var)
    if not c:
        return row
    out = dict(coeffs)
    del out[var]
    e_coeffs, e_k = expr
    for v, ce in e_coeffs.items():
        out[v] = out.get(v, 0) + c * ce
        if out[v] == 0:
            del out[v]
    return out, k + c * e_k


def _tighten_leq(row: _Row) -> _Row | bool:
    coeffs, k = row
    if not coeffs:
        return k <= 0
    g = math.gcd(*coeffs.values())
    if g == 1:
        return row
    return {v: c // g for v, c in coeffs.items()}, -((-k) // g)


class _Eliminator:
    """Removes equality rows by exact integer substitution.

    When the row has a unit coefficient the variable is solved and replaced
    everywhere.  Otherwise two variables are merged through the extended-GCD
    unimodular change (y_i, y_j) -> (u, w) with a_i*y_i + a_j*y_j = g*u,
    strictly decreasing the row's coefficient GCD structure until a unit
    appears.  Reconstruction expressions map solutions of the transformed
    system back to the original variables.
    """

    def __init__(self, variables: Iterable[int]):
        self.recon: dict[int, _Row] = {v: ({v: 1}, 0) for v in variables}
        self.fresh = max(self.recon, default=-1) + 1

    def _apply(self, var: int, expr: _Row, rows: list[_Row]) -> list[_Row]:
        for orig, rexpr in self.recon.items():
            self.recon[orig] = _substitute(rexpr, var, expr)
        return [_substitute(r, var, expr) for r in rows]

    def eliminate(
        self, eqs: list[_Row], others: list[list[_Row]]
    ) -> bool:
        """Consume ``eqs``, rewriting ``others`` in place.  False on UNSAT."""
        pending = list(eqs)
        while pending:
            coeffs, k = pending.pop(0)
            if not coeffs:
                if k != 0:
                    return False
                continue
            g = math.gcd(*coeffs.values())
            if k % g != 0:
                return False
            if g > 1:
                coeffs = {v: c // g for v, c in coeffs.items()}
                k //= g
            unit = next((v for v, c in coeffs.items() if abs(c) == 1), None)
            while unit is None:
                ordered = sorted(coeffs.items(), key=lambda vc: (abs(vc[1]), vc[0]))
                (vi, ai), (vj, aj) = ordered[0], ordered[1]
                g2, p, q = _ext_gcd(ai, aj)
                u, w = self.fresh, self.fresh + 1
                self.fresh += 2
                expr_i = ({u: p, w: -(aj // g2)}, 0)
                expr_j = ({u: q, w: ai // g2}, 0)
                for var, expr in ((vi, expr_i), (vj, expr_j)):
                    pending = self._apply(var, expr, pending)
                    for rows in others:
                        rows[:] = self._apply(var, expr, rows)
                    coeffs, k = _substitute((coeffs, k), var, expr)
                unit = next((v for v, c in coeffs.items() if abs(c) == 1), None)
            a = coeffs[unit]
            expr = (
                {v: -c * a for v, c in coeffs.items() if v != unit},
                -k * a,
            )  # a in {1, -1}, so 1/a == a
            pending = self._apply(unit, expr, pending)
            for rows in others:
                rows[:] = self._apply(unit, expr, rows)
        return True

    def rebuild(self, solution: Mapping[int, int]) -> dict[int, int]:
        model = {}
        for orig, (coeffs, k) in self.recon.items():
            model[orig] = sum(c * solution.get(v, 0) for v, c in coeffs.items()) + k
        return model


def _ext_gcd(a: int, b: int) -> tuple[int, int, int]:
    """g, p, q with p*a + q*b == g == gcd(a, b), g > 0."""
    old_r, r = a, b
    old_p, p = 1, 0
    old_q, q = 0, 1
    while r:
        quot = old_r // r
        old_r, r = r, old_r - quot * r
        old_p, p = p, old_p - quot * p
        old_q, q = q, old_q - quot * q
    if old_r < 0:
        old_r, old_p, old_q = -old_r, -old_p, -old_q
    return old_r, old_p, old_q


def _box_bound(rows: Sequence[_Row]) -> int:
    """Integer box radius that must contain a solution if one exists.

    Hadamard bound on the minors of the standard-form system matrix
    [A, -A, I | b]; by the Borosh-Treybig theorem a solvable system has a
    nonnegative solution bounded by the largest minor, hence the original
    free variables have a solution within [-B, B].
    """
    bound = 1
    for coeffs, k in rows:
        sq = 2 * sum(c * c for c in coeffs.values()) + k * k + 1
        s = math.isqrt(sq)
        if s * s < sq:
            s += 1
        bound *= max(s, 1)
    return max(bound, 1)


class _Budget:
    __slots__ = ("left", "limit")

    def __init__(self, limit: int):
        self.left = limit
        self.limit = limit

    def spend(self) -> None:
        if self.left <= 0:
            raise ResourceLimit(self.limit)
        self.left -= 1


def _lp_vertex(
    rows: Sequence[_Row], variables: Sequence[int], shift: int
) -> dict[int, Fraction] | None:
    """Exact phase-1 simplex over ``y = x + shift >= 0``.

    Returns a basic feasible point for the system (as original-variable
    Fractions) or None when the rational relaxation is infeasible.  Uses
    Bland's rule, so the pivoting always terminates.
    """
    n = len(variables)
    col_of = {v: j for j, v in enumerate(variables)}
    m = len(rows)
    if m == 0:
        return {v: Fraction(0) for v in variables}

    # Tableau columns: n structural, m slacks, artificials appended, rhs last.
    art_rows = []
    body: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    for i, (coeffs, k) in enumerate(rows):
        row = [Fraction(0)] * (n + m)
        e = shift * sum(coeffs.values()) - k
        for v, c in coeffs.items():
            row[col_of[v]] = Fraction(c)
        row[n + i] = Fraction(1)
        if e < 0:
            row = [-x for x in row]
            e = -e
            art_rows.append(i)
        body.append(row)
        rhs.append(Fraction(e))

    n_art = len(art_rows)
    if n_art:
        art_col = {i: n + m + j for j, i in enumerate(art_rows)}
        for i, row in enumerate(body):
            row.extend([Fraction(0)] * n_art)
            if i in art_col:
                row[art_col[i]] = Fraction(1)
    basis = []
    for i in range(m):
        if i in art_rows:
            basis.append(n + m + art_rows.index(i))
        else:
            basis.append(n + i)

    total_cols = n + m + n_art
    # Phase-1 objective: minimize the artificial sum.  Reduced-cost row.
    obj = [Fraction(0)] * total_cols
    obj_val = Fraction(0)
    art_set = set(n + m + j for j in range(n_art))
    for j in range(total_cols):
        if j in art_set:
            obj[j] = Fraction(1)
    for i, b in enumerate(basis):
        if b in art_set:
            for j in range(total_cols):
                obj[j] -= body[i][j]
            obj_val -= rhs[i]

    if n_art:
        while True:
            enter = -1
            for j in range(total_cols):
                if obj[j] < 0:
                    enter = j
                    break
            if enter < 0:
                break
            leave = -1
            best: Fraction | None = None
            for i in range(m):
                a = body[i][enter]
                if a > 0:
                    ratio = rhs[i] / a
                    if best is None or ratio < best or (
                        ratio == best and basis[i] < basis[leave]
                    ):
                        best = ratio
                        leave = i
            if leave < 0:
                raise SolverError("phase-1 objective unbounded")  # impossible
            piv = body[leave][enter]
            body[leave] = [x / piv for x in body[leave]]
            rhs[leave] /= piv
            for i in range(m):
                if i != leave and body[i][enter] != 0:
                    f = body[i][enter]
                    body[i] = [x - f * y for x, y in zip(body[i], body[leave])]
                    rhs[i] -= f * rhs[leave]
            if obj[enter] != 0:
                f = obj[enter]
                obj = [x - f * y for x, y in zip(obj, body[leave])]
                obj_val -= f * rhs[leave]
            basis[leave] = enter
        if -obj_val > 0:
            return None

    values = {v: Fraction(-shift) for v in variables}
    for i, b in enumerate(basis):
        if b < n:
            values[variables[b]] = rhs[i] - shift
    return values


def _rows_hold(rows: Sequence[_Row], point: Mapping[int, int]) -> bool:
    return all(
        sum(c * point.get(v, 0) for v, c in coeffs.items()) + k <= 0
        for coeffs, k in rows
    )


def _branch_and_bound(
    rows: list[_Row], variables: Sequence[int], shift: int, budget: _Budget
) -> dict[int, int] | None:
    budget.spend()
    point = _lp_vertex(rows, variables, shift)
    if point is None:
        return None
    frac_var = None
    frac_best = Fraction(0)
    for v in variables:
        f = point[v] - math.floor(point[v])
        if f > frac_best:
            frac_best = f
            frac_var = v
    if frac_var is None:
        return {v: int(point[v]) for v in variables}
    rounded = {v: math.floor(point[v] + Fraction(1, 2)) for v in variables}
    if _rows_hold(rows, rounded):
        return rounded
    lo = math.floor(point[frac_var])
    floor_rows = rows + [({frac_var: 1}, -lo)]          # x <= lo
    ceil_rows = rows + [({frac_var: -1}, lo + 1)]       # x >= lo + 1
    for branch in (floor_rows, ceil_rows):
        model = _branch_and_bound(branch, variables, shift, budget)
        if model is not None:
            return model
    return None


def _solve_split(
    base: list[_Row],
    neqs: list[_Row],
    variables: Sequence[int],
    shift: int,
    budget: _Budget,
) -> dict[int, int] | None:
    if neqs:
        budget.spend()
        if _lp_vertex(base, variables, shift) is None:
            return None
        (coeffs, k), rest = neqs[0], neqs[1:]
        below = base + [(dict(coeffs), k + 1)]                       # a <= -1
        above = base + [({v: -c for v, c in coeffs.items()}, -k + 1)]  # a >= 1
        for branch in (below, above):
            model = _solve_split(branch, rest, variables, shift, budget)
            if model is not None:
                return model
        return None
    return _branch_and_bound(base, variables, shift, budget)


def solve(pc: PathCondition, node_budget: int = DEFAULT_NODE_BUDGET) -> Verdict:
    """Exact verdict over unbounded integers, with a witness model when SAT.

    Deterministic for fixed input.  Raises :class:`ResourceLimit` when the
    node budget is exhausted; callers must treat that as unknown.
    """
    pre = _preprocess(pc)
    if pre is True:
        return Verdict.satisfied({v: 0 for v in pc.variables()})
    if pre is False:
        return Verdict.unsatisfied()
    eqs, leqs, neqs = pre

    elim = _Eliminator(pc.variables())
    others = [leqs, neqs]
    if not elim.eliminate(eqs, others):
        return Verdict.unsatisfied()
    leqs, neqs = others

    base: list[_Row] = []
    for row in leqs:
        t = _tighten_leq(row)
        if t is False:
            return Verdict.unsatisfied()
        if t is not True:
            base.append(t)
    final_neqs: list[_Row] = []
    for coeffs, k in neqs:
        if not coeffs:
            if k == 0:
                return Verdict.unsatisfied()
            continue
        g = math.gcd(*coeffs.values())
        if k % g != 0:
            continue  # always true
        final_neqs.append(({v: c // g for v, c in coeffs.items()}, k // g))

    all_rows = base + [
        ({v: s * c for v, c in coeffs.items()}, s * k + 1)
        for coeffs, k in final_neqs
        for s in (1, -1)
    ]
    variables = sorted({v for coeffs, _ in all_rows for v in coeffs})
    if not variables:
        solution: dict[int, int] | None = {}
    else:
        # Widening box ladder: small boxes find the typical small model
        # quickly; only an in-box UNSAT escalates, and the final rung is the
        # Borosh-Treybig bound, so the last UNSAT is sound.
        theory_bound = _box_bound(all_rows)
        budget = _Budget(node_budget)
        solution = None
        for bound in (2**4, 2**8, 2**16, theory_bound):
            if bound > theory_bound:
                bound = theory_bound
            boxed = base + [({v: 1}, -bound) for v in variables]
            boxed += [({v: -1}, -bound) for v in variables]
            solution = _solve_split(boxed, final_neqs, variables, bound, budget)
            if solution is not None or bound == theory_bound:
                break
    if solution is None:
        return Verdict.unsatisfied()

    full = {v: 0 for v in pc.variables()}
    full.update(elim.rebuild(solution))
    if not pc.evaluate(full):
        raise SolverError("internal error: model fails substitution check")
    return Verdict.satisfied(full)


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

_ENUM_LIMIT = 2**30


def brute_force_solve(pc: PathCondition, bound: int) -> Verdict:
    """Enumerate the box [-bound, bound]^t exhaustively.

    SAT comes with the lexicographically smallest model in the box; UNSAT is
    box-relative (used as a one-sided oracle for SAT and as a necessary
    condition for UNSAT).  Raises :class:`BoxTooLarge` when the box exceeds
    the enumeration limit.
    """
    variables = pc.variables()
    t = len(variables)
    width = 2 * bound + 1
    if width**t > _ENUM_LIMIT:
        raise BoxTooLarge(f"{width}**{t} points exceed the enumeration limit")
    if t == 0:
        if all(c.op.holds(c.constant) for c in pc.constraints):
            return Verdict.satisfied({})
        return Verdict.unsatisfied()

    axis = np.arange(-bound, bound + 1, dtype=np.int64)
    rest = variables[1:]
    shapes = []
    for j in range(len(rest)):
        shape = [1] * len(rest)
        shape[j] = width
        shapes.append(axis.reshape(shape))

    first = variables[0]
    for v0 in axis:
        mask: np.ndarray | None = None
        ok = True
        for c in pc.constraints:
            acc = np.int64(c.constant + c.coeffs.get(first, 0) * int(v0))
            val = acc
            for j, var in enumerate(rest):
                coeff = c.coeffs.get(var, 0)
                if coeff:
                    val = val + coeff * shapes[j]
            if np.isscalar(val) or val.ndim == 0:
                if not c.op.holds(int(val)):
                    ok = False
                    break
                continue
            cond = _op_mask(c.op, val)
            mask = cond if mask is None else (mask & cond)
            if not mask.any():
                ok = False
                break
        if not ok:
            continue
        if mask is None:
            return Verdict.satisfied(
                {first: int(v0), **{v: -bound for v in rest}}
            )
        idx = np.argwhere(mask)
        if idx.size:
            point = idx[0]  # C order: lexicographically smallest
            model = {first: int(v0)}
            for j, var in enumerate(rest):
                model[var] = int(axis[point[j]])
            return Verdict.satisfied(model)
    return Verdict.unsatisfied()


def _op_mask(op: Op, val: np.ndarray) -> np.ndarray:
    if op is Op.EQ:
        return val == 0
    if op is Op.NEQ:
        return val != 0
    if op is Op.LEQ:
        return val <= 0
    if op is Op.LT:
        return val < 0
    if op is Op.GT:
        return val > 0
    return val >= 0
