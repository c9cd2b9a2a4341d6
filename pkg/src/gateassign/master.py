"""Restricted set-covering master problem.

Rows of the restricted master, in order:

* one covering row per flight   ``sum_p delta_ip z_p >= 1``   (dual ``pi_i``)
* one convexity row per gate    ``sum_{p at k} z_p = 1``      (dual ``mu_k``)
* one row per branching decision, ``... <= 0``                (dual ``lam``)
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .lp import EQ, GE, LE, LinearProgram, SimplexSolver
from .model import GateSchedule, Instance, ScheduleError, schedule_for

FORCE_ON = "on"
FORCE_OFF = "off"

TOL_ZERO = 1e-9
FAVORABLE = -1e-6


class InfeasibleMaster(RuntimeError):
    """The restricted master (or a node) admits no feasible solution."""


@dataclass(frozen=True)
class Pattern:
    gate_id: int
    flights: tuple
    schedule: GateSchedule = field(compare=False, repr=False)

    @property
    def cost(self) -> int:
        return self.schedule.total_delay

    @property
    def key(self):
        return (self.gate_id, self.flights)

    def covers(self, flight_id: int) -> bool:
        return flight_id in self.flights


def make_pattern(instance: Instance, gate_id: int, flight_ids: Iterable[int]) -> Pattern:
    sched = schedule_for(instance, gate_id, flight_ids)
    return Pattern(gate_id, sched.accepted, sched)


@dataclass(frozen=True)
class BranchConstraint:
    """``direction == FORCE_ON``: flight must use gate; ``FORCE_OFF``: must not."""

    flight: int
    gate: int
    direction: str

    def __post_init__(self):
        if self.direction not in (FORCE_ON, FORCE_OFF):
            raise ValueError(f"unknown branch direction {self.direction!r}")

    def coefficient(self, pattern: Pattern) -> int:
        inside = pattern.covers(self.flight)
        if self.direction == FORCE_ON:
            if pattern.gate_id == self.gate:
                return 0 if inside else 1
            return 1 if inside else 0
        return 1 if (pattern.gate_id == self.gate and inside) else 0


def forced_at(constraints: Sequence[BranchConstraint], gate_id: int) -> set:
    return {c.flight for c in constraints if c.direction == FORCE_ON and c.gate == gate_id}


def forbidden_at(constraints: Sequence[BranchConstraint], gate_id: int) -> set:
    """Flights that may not appear in any useful pattern of ``gate_id``."""
    out = set()
    for c in constraints:
        if c.direction == FORCE_OFF and c.gate == gate_id:
            out.add(c.flight)
        elif c.direction == FORCE_ON and c.gate != gate_id:
            out.add(c.flight)
    return out


class ColumnPool:
    """Append-only set of patterns, deduplicated by (gate, flight set)."""

    def __init__(self, instance: Instance, with_empty: bool = True):
        self.instance = instance
        self.patterns: list = []
        self._index: dict = {}
        self._by_gate: list = [[] for _ in instance.gates]
        if with_empty:
            self.add(make_pattern(instance, g.id, ()) for g in instance.gates)

    def __len__(self):
        return len(self.patterns)

    def __iter__(self):
        return iter(self.patterns)

    def __contains__(self, pattern: Pattern):
        return pattern.key in self._index

    def position(self, pattern: Pattern) -> int:
        return self._index[pattern.key]

    def gate_columns(self, gate_id: int) -> list:
        return self._by_gate[gate_id]

    def add(self, patterns) -> int:
        if isinstance(patterns, Pattern):
            patterns = [patterns]
        added = 0
        for p in patterns:
            if p.key in self._index:
                continue
            try:
                p.schedule.validate(self.instance)
            except ScheduleError as exc:
                raise ScheduleError(f"rejected pattern for gate {p.gate_id}: {exc}") from exc
            if p.schedule.gate_id != p.gate_id or p.schedule.accepted != p.flights:
                raise ScheduleError("pattern schedule does not match its gate/flights")
            self._index[p.key] = len(self.patterns)
            self._by_gate[p.gate_id].append(len(self.patterns))
            self.patterns.append(p)
            added += 1
        return added


def add_columns(pool: ColumnPool, patterns) -> int:
    return pool.add(patterns)


@dataclass
class Duals:
    pi: np.ndarray
    mu: np.ndarray
    lam: tuple = ()


@dataclass
class MasterSolution:
    status: str
    objective: float = float("nan")
    z: np.ndarray | None = None
    duals: Duals | None = None
    branch_rows: tuple = ()
    iterations: int = 0
    basis: tuple = field(default=(), repr=False)

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"

    def support(self, tol: float = 1e-9):
        return [(j, float(v)) for j, v in enumerate(self.z) if v > tol]


def fold_branch_duals(duals: Duals, branch_rows: Sequence[BranchConstraint], gate_id: int):
    """Per-gate flight benefits and convexity dual with branching duals folded in.

    Returns ``(pi, mu)`` such that for every pattern ``p`` of ``gate_id``
    the reduced cost equals ``cost(p) - sum(pi[i] for i in p) - mu``.
    Contributions of stacked rows simply add up.
    """
    pi = np.array(duals.pi, dtype=float)
    mu = float(duals.mu[gate_id])
    for row, lam in zip(branch_rows, duals.lam):
        if row.direction == FORCE_ON and row.gate == gate_id:
            # coefficient 1 - delta: constant part moves into mu
            pi[row.flight] -= lam
            mu += lam
        else:
            # coefficient delta on this gate (or zero for a right row elsewhere)
            if row.direction == FORCE_ON or row.gate == gate_id:
                pi[row.flight] += lam
    return pi, mu


def reduced_cost(pattern: Pattern, duals: Duals, branch_rows: Sequence[BranchConstraint] = ()) -> float:
    """Reduced cost of a column against the master duals, branching rows included."""
    rc = float(pattern.cost) - float(sum(duals.pi[i] for i in pattern.flights)) - float(duals.mu[pattern.gate_id])
    for row, lam in zip(branch_rows, duals.lam):
        coef = row.coefficient(pattern)
        if coef:
            rc -= coef * lam
    return rc


def _column(pool: ColumnPool, p: Pattern) -> np.ndarray:
    inst = pool.instance
    col = np.zeros(inst.n_flights + inst.n_gates)
    col[list(p.flights)] = 1.0
    col[inst.n_flights + p.gate_id] = 1.0
    return col


def _build_lp(pool: ColumnPool, branch_rows, columns, base=None) -> LinearProgram:
    inst = pool.instance
    nf, ng = inst.n_flights, inst.n_gates
    if base is None:
        base = np.column_stack([_column(pool, pool.patterns[j]) for j in columns]) if columns else np.zeros((nf + ng, 0))
    extra = np.array(
        [[row.coefficient(pool.patterns[j]) for j in columns] for row in branch_rows], dtype=float
    ).reshape(len(branch_rows), len(columns))
    A = np.vstack([base, extra])
    c = np.array([pool.patterns[j].cost for j in columns], dtype=float)
    senses = [GE] * nf + [EQ] * ng + [LE] * len(branch_rows)
    b = np.concatenate([np.ones(nf), np.ones(ng), np.zeros(len(branch_rows))])
    return LinearProgram(c, A, senses, b, col_labels=list(columns))


class RestrictedMaster:
    """LP relaxation of the set-covering master over a column pool.

    Keeps one simplex solver per distinct set of branching rows so that
    re-solves after adding columns start from the previous basis.
    """

    def __init__(self, pool: ColumnPool, solver_factory=SimplexSolver):
        self.pool = pool
        self._factory = solver_factory
        self._solvers: dict = {}
        self._base = np.zeros((pool.instance.n_flights + pool.instance.n_gates, 0))

    def _base_columns(self, columns):
        have = self._base.shape[1]
        if have < len(self.pool):
            new = [_column(self.pool, p) for p in self.pool.patterns[have:]]
            self._base = np.hstack([self._base, np.column_stack(new)])
        return self._base[:, columns]

    def solve(self, branch_rows: Sequence[BranchConstraint] = (), columns=None,
              basis=None) -> MasterSolution:
        branch_rows = tuple(branch_rows)
        if columns is None:
            columns = range(len(self.pool))
            key = branch_rows
        else:
            key = None
        columns = list(columns)
        lp = _build_lp(self.pool, branch_rows, columns, self._base_columns(columns))
        if key is not None:
            solver = self._solvers.setdefault(key, self._factory())
        else:
            solver = self._factory(warm_start=False)
        sol = solver.solve(lp, basis)
        inst = self.pool.instance
        if not sol.optimal:
            # unbounded is impossible with nonnegative costs
            return MasterSolution("infeasible", branch_rows=branch_rows, iterations=sol.iterations)
        z = np.zeros(len(self.pool))
        z[columns] = sol.x
        nf, ng = inst.n_flights, inst.n_gates
        duals = Duals(
            pi=sol.y[:nf].copy(),
            mu=sol.y[nf:nf + ng].copy(),
            lam=tuple(float(v) for v in sol.y[nf + ng:]),
        )
        return MasterSolution("optimal", sol.objective, z, duals, branch_rows, sol.iterations, sol.basis)

    def forget(self, branch_rows):
        self._solvers.pop(tuple(branch_rows), None)


def build_and_solve_rmp(pool: ColumnPool, branch_rows: Sequence[BranchConstraint] = ()) -> MasterSolution:
    return RestrictedMaster(pool).solve(branch_rows)


# -- binary restricted master ---------------------------------------------------

@dataclass
class BinaryResult:
    status: str  # "optimal", "infeasible" or "time_limit"
    value: float = float("inf")
    selected: tuple = ()
    nodes: int = 0

    @property
    def timed_out(self) -> bool:
        return self.status == "time_limit"


def _integral_costs(pool: ColumnPool) -> bool:
    return all(float(p.cost).is_integer() for p in pool.patterns)


@dataclass(frozen=True)
class _FixRow:
    """``sum of z over keys <= 0``; pins columns of the binary search to zero."""

    keys: frozenset

    def coefficient(self, pattern: Pattern) -> int:
        return 1 if pattern.key in self.keys else 0


def solve_binary_rmp(pool: ColumnPool, branch_rows: Sequence[BranchConstraint] = (),
                     time_limit: float | None = None, int_tol: float = 1e-6,
                     cutoff: float = float("inf"), node_limit: int | None = None) -> BinaryResult:
    """Exact 0/1 optimum over the pooled columns by LP-based depth-first search.

    Branches on the most fractional ``z``; the ``z = 1`` side is explored
    first. Fixings are extra ``<= 0`` rows, so every child starts from its
    parent's basis. With a time or node limit the best incumbent so far is
    returned and the result is flagged ``time_limit``. Only selections
    strictly cheaper than ``cutoff`` are searched for; if none exists the
    result is infeasible.
    """
    start = time.monotonic()
    rmp = RestrictedMaster(pool)
    integral = _integral_costs(pool)
    every = range(len(pool))
    base_rows = tuple(branch_rows)
    best_val, best_sel = cutoff, ()
    nodes = 0
    # each entry: (fixing rows, parent basis)
    stack = [((), None)]
    timed_out = False
    while stack:
        if (time_limit is not None and time.monotonic() - start > time_limit) or \
                (node_limit is not None and nodes >= node_limit):
            timed_out = True
            break
        fixes, warm = stack.pop()
        nodes += 1
        sol = rmp.solve(base_rows + fixes, columns=every, basis=warm)
        if not sol.feasible:
            continue
        bound = sol.objective
        if integral:
            bound = math.ceil(bound - int_tol)
        if bound >= best_val - 1e-9:
            continue
        frac = [(abs(v - 0.5), j) for j, v in enumerate(sol.z) if int_tol < v < 1 - int_tol]
        if not frac:
            sel = tuple(j for j, v in enumerate(sol.z) if v > 0.5)
            val = float(sum(pool.patterns[j].cost for j in sel))
            if val < best_val:
                best_val, best_sel = val, sel
            continue
        _, j = min(frac)
        p = pool.patterns[j]
        others = frozenset(pool.patterns[q].key for q in pool.gate_columns(p.gate_id) if q != j)
        stack.append((fixes + (_FixRow(frozenset({p.key})),), sol.basis))
        stack.append((fixes + (_FixRow(others),), sol.basis))
    if timed_out:
        status = "time_limit"
    elif best_sel:
        status = "optimal"
    else:
        status = "infeasible"
        best_val = float("inf")
    return BinaryResult(status, best_val, best_sel, nodes)


# -- solutions ------------------------------------------------------------------

@dataclass(frozen=True)
class GapReport:
    value: float
    is_absolute: bool

    def __str__(self):
        if self.is_absolute:
            return f"{self.value:.2f}(a)"
        return f"{100.0 * self.value:.1f}%"

    @property
    def percent(self) -> float:
        return 100.0 * self.value


def compute_gap(ub: float, lb: float, tol_zero: float = TOL_ZERO, tol: float = 1e-6) -> GapReport:
    """Relative gap ``(ub - lb) / lb``; absolute ``ub - lb`` when ``lb`` is zero."""
    if ub < lb - tol * (1.0 + abs(lb)):
        raise ValueError(f"upper bound {ub} is below lower bound {lb}")
    diff = max(ub - lb, 0.0)
    if abs(lb) <= tol_zero:
        return GapReport(diff, True)
    return GapReport(diff / lb, False)


@dataclass
class Solution:
    instance: Instance
    schedules: tuple
    lb: float = float("nan")
    ub: float = float("nan")
    status: str = "feasible"
    stats: dict = field(default_factory=dict)
    log: list = field(default_factory=list)

    @property
    def objective(self) -> int:
        return sum(s.total_delay for s in self.schedules)

    @property
    def assignment(self) -> dict:
        return {fid: s.gate_id for s in self.schedules for fid in s.accepted}

    @property
    def gap(self) -> GapReport:
        if math.isnan(self.lb) or math.isnan(self.ub):
            return GapReport(float("nan"), False)
        return compute_gap(self.ub, self.lb)

    def validate(self) -> None:
        """Every flight on exactly one compatible gate, schedules feasible."""
        seen = {}
        for s in self.schedules:
            s.validate(self.instance)
            for fid in s.accepted:
                if fid in seen:
                    raise ScheduleError(f"flight {fid} assigned to gates {seen[fid]} and {s.gate_id}")
                seen[fid] = s.gate_id
        missing = set(range(self.instance.n_flights)) - set(seen)
        if missing:
            raise ScheduleError(f"unassigned flights: {sorted(missing)}")

    def to_dict(self) -> dict:
        gap = self.gap
        rows = []
        for s in self.schedules:
            for fid, park, push in zip(s.accepted, s.park_times, s.pushback_times):
                rows.append({"flight": fid, "gate": s.gate_id, "park": park, "pushback": push})
        rows.sort(key=lambda r: r["flight"])
        return {
            "instance": self.instance.name,
            "status": self.status,
            "objective": self.objective,
            "lb": self.lb,
            "ub": self.ub,
            "gap": gap.value,
            "gap_is_absolute": gap.is_absolute,
            "assignments": rows,
            "stats": dict(self.stats),
        }


def recover_partition(instance: Instance, patterns: Sequence[Pattern]) -> Solution:
    """Turn a covering selection (one pattern per gate) into a partition.

    Multiply covered flights are processed in id order; each stays on the
    gate that gives the smallest total delay once it is dropped everywhere
    else (ties to the lowest gate id). Dropping a flight never raises the
    delay at a gate, so the result costs at most the covering cost.
    """
    by_gate = {g.id: set() for g in instance.gates}
    for p in patterns:
        by_gate[p.gate_id].update(p.flights)
    covered = {}
    for g, fl in by_gate.items():
        for f in fl:
            covered.setdefault(f, []).append(g)
    missing = set(range(instance.n_flights)) - set(covered)
    if missing:
        raise InfeasibleMaster(f"selection does not cover flights {sorted(missing)}")

    delay = {g: schedule_for(instance, g, fl).total_delay for g, fl in by_gate.items()}
    for f in sorted(covered):
        gates = sorted(covered[f])
        if len(gates) < 2:
            continue
        without = {g: schedule_for(instance, g, by_gate[g] - {f}).total_delay for g in gates}
        best_gate, best_total = None, None
        for keep in gates:
            total = delay[keep] + sum(without[g] for g in gates if g != keep)
            if best_total is None or total < best_total:
                best_gate, best_total = keep, total
        for g in gates:
            if g != best_gate:
                by_gate[g].discard(f)
                delay[g] = without[g]
    schedules = tuple(schedule_for(instance, g, by_gate[g]) for g in sorted(by_gate))
    return Solution(instance, schedules)
