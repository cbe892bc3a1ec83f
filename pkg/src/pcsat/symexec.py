"""Toy-language symbolic executor with classifier-first feasibility checks.

Programs are integer functions with assignments, if/else over linear
comparisons, bounded while loops, asserts, and halt.  Exploration is
depth-first with an explicit stack: every popped state's path condition is
checked by the configured backend; an "unsatisfiable" or unsupported answer
falls back to the exact solver before the path may be pruned, so a
misclassified satisfiable condition can never lose a feasible path.  At
halt/abort leaves the solver produces a concrete test input.
"""

from __future__ import annotations

import dataclasses
import re
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from . import bank as bank_mod
from . import reuse
from .pc import LinearConstraint, Op, PathCondition, canonize, format_pc
from .solver import DEFAULT_NODE_BUDGET, ResourceLimit, Verdict, solve


class ProgramError(ValueError):
    pass


class ProgramSyntaxError(ProgramError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class NonlinearError(ProgramError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class UndeclaredVar(ProgramError):
    def __init__(self, name: str):
        super().__init__(f"variable {name!r} used before assignment")
        self.name = name


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Term:
    """coeff * var, or a bare integer when var is None."""

    coeff: int
    var: str | None = None


@dataclass(frozen=True)
class Expr:
    """Sum of signed terms: sign in {+1, -1} per term."""

    items: tuple[tuple[int, Term], ...]


@dataclass(frozen=True)
class Cmp:
    lhs: Expr
    op: Op
    rhs: Expr


@dataclass(frozen=True)
class Assign:
    name: str
    value: Expr


@dataclass(frozen=True)
class If:
    cond: Cmp
    then: tuple
    orelse: tuple


@dataclass(frozen=True)
class While:
    cond: Cmp
    bound: int
    body: tuple


@dataclass(frozen=True)
class Assert:
    cond: Cmp


@dataclass(frozen=True)
class Halt:
    pass


@dataclass(frozen=True)
class _AbortLeaf:
    """Synthetic statement marking an assert-failure continuation."""


@dataclass(frozen=True)
class Program:
    name: str
    params: tuple[str, ...]
    body: tuple


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_PROG_TOKEN_RE = re.compile(
    r"(?P<int>\d+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>:=|&&|==|!=|<=|>=|<|>|\+|-|\*|\(|\)|\{|\}|;|,)"
    r"|(?P<space>\s+)"
    r"|(?P<bad>.)"
)

_KEYWORDS = {"fn", "if", "else", "while", "bound", "assert", "halt"}
_RELOPS = {"==": Op.EQ, "!=": Op.NEQ, "<=": Op.LEQ, "<": Op.LT, ">": Op.GT, ">=": Op.GEQ}


class _ProgParser:
    def __init__(self, text: str):
        self.tokens: list[tuple[str, str, int]] = []
        for m in _PROG_TOKEN_RE.finditer(text):
            kind = m.lastgroup
            if kind == "space":
                continue
            if kind == "bad":
                raise ProgramSyntaxError(f"unexpected character {m.group()!r}", m.start())
            self.tokens.append((kind, m.group(), m.start()))
        self.tokens.append(("end", "", len(text)))
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str):
        kind, got, at = self.peek()
        if got != value or kind == "end":
            raise ProgramSyntaxError(f"expected {value!r}, found {got!r}", at)
        return self.advance()

    def expect_ident(self) -> str:
        kind, got, at = self.peek()
        if kind != "ident" or got in _KEYWORDS:
            raise ProgramSyntaxError(f"expected an identifier, found {got!r}", at)
        self.advance()
        return got

    def program(self) -> Program:
        self.expect("fn")
        name = self.expect_ident()
        self.expect("(")
        params: list[str] = []
        if self.peek()[1] != ")":
            params.append(self.expect_ident())
            while self.peek()[1] == ",":
                self.advance()
                params.append(self.expect_ident())
        if len(set(params)) != len(params):
            raise ProgramSyntaxError("duplicate parameter name", self.peek()[2])
        self.expect(")")
        body = self.block()
        kind, got, at = self.peek()
        if kind != "end":
            raise ProgramSyntaxError(f"unexpected {got!r} after program body", at)
        return Program(name, tuple(params), body)

    def block(self) -> tuple:
        self.expect("{")
        stmts = []
        while self.peek()[1] != "}":
            if self.peek()[0] == "end":
                raise ProgramSyntaxError("unterminated block", self.peek()[2])
            stmts.append(self.stmt())
        self.expect("}")
        return tuple(stmts)

    def stmt(self):
        kind, value, at = self.peek()
        if value == "if":
            self.advance()
            self.expect("(")
            cond = self.cmp()
            self.expect(")")
            then = self.block()
            orelse: tuple = ()
            if self.peek()[1] == "else":
                self.advance()
                orelse = self.block()
            return If(cond, then, orelse)
        if value == "while":
            self.advance()
            self.expect("(")
            cond = self.cmp()
            self.expect(")")
            nk, nv, nat = self.peek()
            if nv != "bound":
                raise ProgramSyntaxError("while requires a 'bound N' annotation", nat)
            self.advance()
            bk, bv, bat = self.peek()
            if bk != "int":
                raise ProgramSyntaxError("loop bound must be a non-negative integer", bat)
            self.advance()
            return While(cond, int(bv), self.block())
        if value == "assert":
            self.advance()
            self.expect("(")
            cond = self.cmp()
            self.expect(")")
            self.expect(";")
            return Assert(cond)
        if value == "halt":
            self.advance()
            self.expect(";")
            return Halt()
        if kind == "ident" and value not in _KEYWORDS:
            name = self.expect_ident()
            self.expect(":=")
            value_expr = self.expr()
            self.expect(";")
            return Assign(name, value_expr)
        raise ProgramSyntaxError(f"expected a statement, found {value!r}", at)

    def cmp(self) -> Cmp:
        lhs = self.expr()
        kind, value, at = self.peek()
        if value not in _RELOPS:
            raise ProgramSyntaxError("expected a comparison operator", at)
        self.advance()
        return Cmp(lhs, _RELOPS[value], self.expr())

    def expr(self) -> Expr:
        items = [(1, self.term())]
        while True:
            kind, value, at = self.peek()
            if value in ("+", "-") and kind == "op":
                self.advance()
                items.append((1 if value == "+" else -1, self.term()))
            elif value == "*":
                raise NonlinearError("term has degree greater than one", at)
            else:
                return Expr(tuple(items))

    def term(self) -> Term:
        kind, value, at = self.peek()
        sign = 1
        if value == "-" and kind == "op":
            self.advance()
            kind, value, at = self.peek()
            if kind != "int":
                raise ProgramSyntaxError("expected an integer after unary minus", at)
            sign = -1
        if kind == "int":
            self.advance()
            coeff = sign * int(value)
            nk, nv, nat = self.peek()
            if nv == "*" and nk == "op":
                self.advance()
                return Term(coeff, self.expect_ident())
            return Term(coeff, None)
        if kind == "ident" and value not in _KEYWORDS:
            self.advance()
            nk, nv, nat = self.peek()
            if nv == "*" and nk == "op":
                fk, fv, _ = self.tokens[self.pos + 1]
                if fk == "ident":
                    raise NonlinearError("product of variables", nat)
                raise ProgramSyntaxError("integer coefficient must precede the variable", nat)
            return Term(1, value)
        raise ProgramSyntaxError("expected a term", at)


def _check_declared(program: Program) -> None:
    def expr_vars(expr: Expr) -> Iterable[str]:
        for _, term in expr.items:
            if term.var is not None:
                yield term.var

    def cmp_vars(cmp: Cmp) -> Iterable[str]:
        yield from expr_vars(cmp.lhs)
        yield from expr_vars(cmp.rhs)

    def walk(stmts: tuple, declared: set[str]) -> set[str]:
        live = set(declared)
        for stmt in stmts:
            if isinstance(stmt, Assign):
                for name in expr_vars(stmt.value):
                    if name not in live:
                        raise UndeclaredVar(name)
                live.add(stmt.name)
            elif isinstance(stmt, If):
                for name in cmp_vars(stmt.cond):
                    if name not in live:
                        raise UndeclaredVar(name)
                after_then = walk(stmt.then, live)
                after_else = walk(stmt.orelse, live)
                live |= after_then & after_else
            elif isinstance(stmt, While):
                for name in cmp_vars(stmt.cond):
                    if name not in live:
                        raise UndeclaredVar(name)
                walk(stmt.body, live)  # body may not run, so no merges
            elif isinstance(stmt, Assert):
                for name in cmp_vars(stmt.cond):
                    if name not in live:
                        raise UndeclaredVar(name)
        return live

    walk(program.body, set(program.params))


def parse_program(text: str) -> Program:
    """Parse and statically check one toy-language program."""
    program = _ProgParser(text).program()
    _check_declared(program)
    return program


# ---------------------------------------------------------------------------
# Symbolic values
# ---------------------------------------------------------------------------

# A symbolic value is an affine map over the program's symbolic inputs:
# a coefficient dict over input indices plus an integer constant.
LinVal = tuple[dict[int, int], int]


def _eval_expr(expr: Expr, store: Mapping[str, LinVal]) -> LinVal:
    coeffs: dict[int, int] = {}
    const = 0
    for sign, term in expr.items:
        if term.var is None:
            const += sign * term.coeff
            continue
        vc, vk = store[term.var]
        factor = sign * term.coeff
        const += factor * vk
        for idx, c in vc.items():
            coeffs[idx] = coeffs.get(idx, 0) + factor * c
    return {k: v for k, v in coeffs.items() if v != 0}, const


def _lower_cmp(cmp: Cmp, store: Mapping[str, LinVal]) -> LinearConstraint:
    lc, lk = _eval_expr(cmp.lhs, store)
    rc, rk = _eval_expr(cmp.rhs, store)
    coeffs = dict(lc)
    for idx, c in rc.items():
        coeffs[idx] = coeffs.get(idx, 0) - c
    return LinearConstraint(coeffs, lk - rk, cmp.op)


def _eval_expr_concrete(expr: Expr, env: Mapping[str, int]) -> int:
    total = 0
    for sign, term in expr.items:
        if term.var is None:
            total += sign * term.coeff
        else:
            total += sign * term.coeff * env[term.var]
    return total


def _eval_cmp_concrete(cmp: Cmp, env: Mapping[str, int]) -> bool:
    return cmp.op.holds(_eval_expr_concrete(cmp.lhs, env) - _eval_expr_concrete(cmp.rhs, env))


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

@dataclass
class SymState:
    """Continuation frames, symbolic store, and the accumulated PC."""

    frames: tuple[tuple[tuple, int], ...]
    store: dict[str, LinVal]
    pc: tuple[LinearConstraint, ...]
    trace: tuple[tuple[int, bool], ...]


@dataclass
class PathResult:
    path: int
    leaf: str  # "halt" | "assert_fail"
    pc_text: str
    inputs: dict[str, int]
    trace: tuple[tuple[int, bool], ...]


@dataclass
class RunReport:
    pcs_checked: int = 0
    states_explored: int = 0
    leaf_states: int = 0
    tests: list[dict] = field(default_factory=list)
    type1_count: int = 0
    type2_count: int | None = None
    solver_calls: int = 0
    classifier_calls: int = 0
    cache_hits: int = 0
    cache_misses: int = 0
    unknown_paths: int = 0
    loop_bound_hits: int = 0
    incomplete: bool = False
    wall_time: float = 0.0
    paths: list[PathResult] = field(default_factory=list)
    checks: list[tuple[str, bool]] = field(default_factory=list)

    def to_dict(self, include_timing: bool = True) -> dict:
        doc = {
            "pcs_checked": self.pcs_checked,
            "states_explored": self.states_explored,
            "leaf_states": self.leaf_states,
            "tests": self.tests,
            "type1_count": self.type1_count,
            "type2_count": self.type2_count,
            "solver_calls": self.solver_calls,
            "classifier_calls": self.classifier_calls,
            "cache_hits": self.cache_hits,
            "cache_misses": self.cache_misses,
            "unknown_paths": self.unknown_paths,
            "loop_bound_hits": self.loop_bound_hits,
            "incomplete": self.incomplete,
        }
        if include_timing:
            doc["wall_time"] = self.wall_time
        return doc


class SolverOnly:
    """Backend that always defers to the exact solver."""


class Classifier:
    def __init__(self, bank: bank_mod.ClassifierBank):
        self.bank = bank


class Cache:
    def __init__(self, cache: reuse.SolutionCache | None = None):
        self.cache = cache if cache is not None else reuse.SolutionCache()


@dataclass
class RunOptions:
    max_states: int = 10_000
    node_budget: int = DEFAULT_NODE_BUDGET
    collect_checks: bool = False
    verify: bool = False


def _branch_sites(program: Program) -> dict[int, int]:
    """Number every guard-bearing statement in preorder."""
    sites: dict[int, int] = {}

    def walk(stmts: tuple):
        for stmt in stmts:
            if isinstance(stmt, (If, While, Assert)):
                sites[id(stmt)] = len(sites)
            if isinstance(stmt, If):
                walk(stmt.then)
                walk(stmt.orelse)
            elif isinstance(stmt, While):
                walk(stmt.body)

    walk(program.body)
    return sites


def run(program: Program, backend, opts: RunOptions | None = None) -> RunReport:
    """Depth-first exploration: classifier first, solver as the safety net.

    Pop a state and check its PC with the backend; an "unsatisfiable" or
    unsupported answer is re-solved exactly before pruning.  Branches push
    the true successor first and the false successor second, so the false
    side is explored first off the LIFO stack.  Halt and assert-failure
    leaves always ask the solver for a witness input; an unsatisfiable leaf
    produces no test.  UNKNOWN solver results abort only their own path.
    """
    opts = opts or RunOptions()
    verify = opts.verify
    report = RunReport(type2_count=0 if verify else None)
    started = time.perf_counter()
    sites = _branch_sites(program)
    pinned_clones: list[While] = []  # keeps id()-keyed site entries alive

    init_store = {name: ({i: 1}, 0) for i, name in enumerate(program.params)}
    stack = [SymState(((program.body, 0),), init_store, (), ())]
    path_counter = 0

    def ground_truth(pcobj: PathCondition) -> Verdict:
        return solve(pcobj, opts.node_budget)

    def check_state(pc_tuple) -> tuple[bool, Verdict | None] | None:
        """(explore?, solver verdict if one was computed); None on UNKNOWN."""
        pcobj = PathCondition(pc_tuple)
        report.pcs_checked += 1
        want_text = opts.collect_checks or verify
        text = format_pc(canonize(pcobj)) if want_text else None

        if isinstance(backend, Classifier):
            outcome = bank_mod.check(pcobj, backend.bank)
            report.classifier_calls += 1
            if isinstance(outcome, bank_mod.Classified) and outcome.sat:
                truth = None
                if verify:  # observational ground truth for the tallies
                    try:
                        truth = ground_truth(pcobj)
                    except ResourceLimit:
                        return None
                    if not truth.sat:
                        report.type2_count += 1
                    if opts.collect_checks:
                        report.checks.append((text, truth.sat))
                return True, truth
            # Unsupported, or a questionable "unsatisfiable": ask the solver.
            try:
                truth = ground_truth(pcobj)
            except ResourceLimit:
                return None
            report.solver_calls += 1
            if isinstance(outcome, bank_mod.Classified) and truth.sat:
                report.type1_count += 1
            if opts.collect_checks:
                report.checks.append((text, truth.sat))
            return truth.sat, truth

        if isinstance(backend, Cache):
            try:
                sat, hit = reuse.cache_check(pcobj, backend.cache, ground_truth)
            except ResourceLimit:
                return None
            if hit:
                report.cache_hits += 1
            else:
                report.cache_misses += 1
                report.solver_calls += 1
            if opts.collect_checks:
                report.checks.append((text, sat))
            return sat, None

        try:
            truth = ground_truth(pcobj)
        except ResourceLimit:
            return None
        report.solver_calls += 1
        if opts.collect_checks:
            report.checks.append((text, truth.sat))
        return truth.sat, truth

    while stack:
        if report.states_explored >= opts.max_states:
            report.incomplete = True
            break
        state = stack.pop()
        checked = check_state(state.pc)
        if checked is None:
            report.unknown_paths += 1
            continue
        explore, verdict = checked
        if not explore:
            continue
        report.states_explored += 1

        frames = list(state.frames)
        store = dict(state.store)
        leaf: str | None = None
        branched = False
        while frames:
            block, idx = frames[-1]
            if idx >= len(block):
                frames.pop()
                continue
            stmt = block[idx]
            frames[-1] = (block, idx + 1)
            if isinstance(stmt, Assign):
                store[stmt.name] = _eval_expr(stmt.value, store)
                continue
            if isinstance(stmt, Halt):
                leaf = "halt"
                break
            if isinstance(stmt, _AbortLeaf):
                leaf = "assert_fail"
                break
            base_frames = tuple(frames)
            if isinstance(stmt, If):
                cond = _lower_cmp(stmt.cond, store)
                site = sites[id(stmt)]
                stack.append(SymState(
                    base_frames + ((stmt.then, 0),), dict(store),
                    state.pc + (cond,), state.trace + ((site, True),),
                ))
                stack.append(SymState(
                    base_frames + ((stmt.orelse, 0),), dict(store),
                    state.pc + (cond.negated(),), state.trace + ((site, False),),
                ))
            elif isinstance(stmt, While):
                cond = _lower_cmp(stmt.cond, store)
                site = sites[id(stmt)]
                if stmt.bound > 0:
                    rest = While(stmt.cond, stmt.bound - 1, stmt.body)
                    pinned_clones.append(rest)
                    sites[id(rest)] = site
                    unrolled = stmt.body + (rest,)
                    stack.append(SymState(
                        base_frames + ((unrolled, 0),), dict(store),
                        state.pc + (cond,), state.trace + ((site, True),),
                    ))
                    stack.append(SymState(
                        base_frames, dict(store),
                        state.pc + (cond.negated(),), state.trace + ((site, False),),
                    ))
                else:
                    # Bound exhausted: only the exit edge survives; the
                    # still-looping continuation is truncated and counted.
                    report.loop_bound_hits += 1
                    stack.append(SymState(
                        base_frames, dict(store),
                        state.pc + (cond.negated(),), state.trace + ((site, False),),
                    ))
            elif isinstance(stmt, Assert):
                cond = _lower_cmp(stmt.cond, store)
                site = sites[id(stmt)]
                stack.append(SymState(
                    base_frames, dict(store),
                    state.pc + (cond,), state.trace + ((site, True),),
                ))
                stack.append(SymState(
                    (((_AbortLeaf(),), 0),), dict(store),
                    state.pc + (cond.negated(),), state.trace + ((site, False),),
                ))
            else:
                raise ProgramError(f"unknown statement {stmt!r}")
            branched = True
            break
        if branched:
            continue
        if leaf is None:
            leaf = "halt"  # ran off the end of the body

        report.leaf_states += 1
        if verdict is None or verdict.model is None:
            try:
                verdict = ground_truth(PathCondition(state.pc))
                report.solver_calls += 1
            except ResourceLimit:
                report.unknown_paths += 1
                continue
        if not verdict.sat:
            continue  # a type-II extra, filtered at the leaf
        inputs = {name: verdict.model.get(i, 0) for i, name in enumerate(program.params)}
        pc_text = format_pc(canonize(PathCondition(state.pc)))
        report.paths.append(PathResult(path_counter, leaf, pc_text, inputs, state.trace))
        report.tests.append({"path": path_counter, "inputs": inputs, "leaf": leaf})
        path_counter += 1

    report.wall_time = time.perf_counter() - started
    return report


def run_verified(
    program: Program, bank: bank_mod.ClassifierBank, opts: RunOptions | None = None
) -> RunReport:
    """Classifier run that also solves every checked PC for ground truth.

    Exploration decisions are identical to ``run`` with a Classifier
    backend: the extra solving is observational and feeds the type-I/II
    misclassification tallies.
    """
    opts = dataclasses.replace(opts or RunOptions(), verify=True)
    return run(program, Classifier(bank), opts)


# ---------------------------------------------------------------------------
# Concrete replay
# ---------------------------------------------------------------------------

def concrete_run(
    program: Program, inputs: Mapping[str, int], max_steps: int = 100_000
) -> tuple[tuple[tuple[int, bool], ...], str]:
    """Interpret concretely; returns (branch trace, leaf kind).

    The oracle for emitted tests: an input satisfying a path's PC must
    reproduce exactly that path's branch decisions.
    """
    sites = _branch_sites(program)
    env = {name: int(inputs[name]) for name in program.params}
    trace: list[tuple[int, bool]] = []
    steps = 0

    def exec_block(stmts: tuple) -> str | None:
        nonlocal steps
        for stmt in stmts:
            steps += 1
            if steps > max_steps:
                raise ProgramError("concrete interpreter step limit exceeded")
            if isinstance(stmt, Assign):
                env[stmt.name] = _eval_expr_concrete(stmt.value, env)
            elif isinstance(stmt, If):
                taken = _eval_cmp_concrete(stmt.cond, env)
                trace.append((sites[id(stmt)], taken))
                leaf = exec_block(stmt.then if taken else stmt.orelse)
                if leaf:
                    return leaf
            elif isinstance(stmt, While):
                site = sites[id(stmt)]
                for _ in range(stmt.bound):
                    taken = _eval_cmp_concrete(stmt.cond, env)
                    trace.append((site, taken))
                    if not taken:
                        break
                    leaf = exec_block(stmt.body)
                    if leaf:
                        return leaf
                else:
                    if _eval_cmp_concrete(stmt.cond, env):
                        return "loop_bound"  # would need more iterations
                    trace.append((site, False))
            elif isinstance(stmt, Assert):
                holds = _eval_cmp_concrete(stmt.cond, env)
                trace.append((sites[id(stmt)], holds))
                if not holds:
                    return "assert_fail"
            elif isinstance(stmt, Halt):
                return "halt"
        return None

    leaf = exec_block(program.body) or "halt"
    return tuple(trace), leaf
