"""Branch-and-price over flight/gate assignment decisions.

Each tree node runs column generation on the shared column pool: solve the
restricted master, price every gate with the configured strategy chain,
add the favorable patterns, repeat until the exact DP finds nothing. A
fractional ``y_ik`` then splits the node into "flight i must use gate k"
and "flight i must not use gate k".
"""
from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .master import (
    FAVORABLE,
    FORCE_OFF,
    FORCE_ON,
    BranchConstraint,
    ColumnPool,
    InfeasibleMaster,
    MasterSolution,
    RestrictedMaster,
    Solution,
    compute_gap,
    fold_branch_duals,
    make_pattern,
    recover_partition,
    reduced_cost,
    solve_binary_rmp,
)
from .model import Instance, schedule_for
from .pricing import (
    adjacency_parameter,
    double_greedy,
    dp_tabular,
    preprocess,
    rolling_horizon,
)

log = logging.getLogger(__name__)

__all__ = [
    "BranchConstraint",
    "BnPNode",
    "SolverConfig",
    "fold_branch_duals",
    "fractional_assignments",
    "make_children",
    "select_branch",
    "solve",
]

STRATEGIES = ("dp", "sm+dp", "adp+dp", "rhf", "rhm", "sm+rhm")
INT_TOL = 1e-6


@dataclass
class SolverConfig:
    pricing: str = "sm+dp"
    rel_gap: float = 0.02
    abs_gap: float = 0.5
    time_limit: float | None = None
    threads: int = 1
    seed: int = 0
    sm_iterations: int = 70
    sm_trials: int = 3
    adp_iterations: int = 25
    rh_horizon: int = 20
    rh_window: int = 1
    sm_switch_sigma: int = 60
    sm_switch_iterations: int = 25
    binary_time_limit: float | None = None
    binary_node_limit: int | None = 100  # a node budget keeps runs reproducible
    max_nodes: int | None = None

    def __post_init__(self):
        if self.pricing not in STRATEGIES:
            raise ValueError(f"unknown pricing strategy {self.pricing!r}; pick one of {STRATEGIES}")
        if self.rel_gap <= 0 or self.abs_gap <= 0:
            raise ValueError("gap targets must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.sm_trials < 1:
            raise ValueError("sm_trials must be >= 1")


@dataclass
class BnPNode:
    id: int
    parent: int | None
    constraints: tuple = ()
    lb: float = 0.0
    status: str = "open"
    depth: int = 0
    warm: tuple | None = field(default=None, repr=False)  # parent's final basis


# -- branching ----------------------------------------------------------------

def fractional_assignments(ms: MasterSolution, pool: ColumnPool) -> dict:
    y = {}
    for j, v in enumerate(ms.z):
        if v <= 1e-12:
            continue
        p = pool.patterns[j]
        for i in p.flights:
            key = (i, p.gate_id)
            y[key] = y.get(key, 0.0) + float(v)
    return y


def select_branch(y_map: dict, tol: float = INT_TOL):
    best = None
    for (i, k), v in y_map.items():
        if v <= tol or v >= 1 - tol:
            continue
        cand = (abs(v - 0.5), i, k)
        if best is None or cand < best:
            best = cand
    return None if best is None else (best[1], best[2])


def make_children(node: BnPNode, flight: int, gate: int, next_id):
    for c in node.constraints:
        if c.flight == flight and c.gate == gate:
            raise ValueError(f"flight {flight} / gate {gate} already branched on this path")
    left = BnPNode(next(next_id), node.id,
                   node.constraints + (BranchConstraint(flight, gate, FORCE_ON),),
                   node.lb, depth=node.depth + 1)
    right = BnPNode(next(next_id), node.id,
                    node.constraints + (BranchConstraint(flight, gate, FORCE_OFF),),
                    node.lb, depth=node.depth + 1)
    return left, right


def allowed_gates(instance: Instance, constraints) -> list:
    allowed = [set(g) for g in instance.compatible_gates]
    for c in constraints:
        if c.direction == FORCE_ON:
            allowed[c.flight] &= {c.gate}
        else:
            allowed[c.flight].discard(c.gate)
    return allowed


def repair_assignment(instance: Instance, assignment: dict, constraints):
    """Move flights of ``assignment`` until it satisfies the branching rows.

    Returns None when some flight has no gate left. Misplaced flights go,
    in id order, to the allowed gate whose delay grows the least.
    """
    allowed = allowed_gates(instance, constraints)
    if any(not a for a in allowed):
        return None
    result = dict(assignment)
    by_gate = {g.id: set() for g in instance.gates}
    for f, g in result.items():
        by_gate[g].add(f)
    for f in range(instance.n_flights):
        g = result[f]
        if g in allowed[f]:
            continue
        by_gate[g].discard(f)
        best = None
        for k in sorted(allowed[f]):
            before = schedule_for(instance, k, by_gate[k]).total_delay
            after = schedule_for(instance, k, by_gate[k] | {f}).total_delay
            if best is None or after - before < best[0]:
                best = (after - before, k)
        result[f] = best[1]
        by_gate[best[1]].add(f)
    return result


def _node_infeasible(instance, constraints) -> bool:
    return any(not a for a in allowed_gates(instance, constraints))


def partition_patterns(instance: Instance, assignment: dict):
    return [
        make_pattern(instance, g.id, [f for f, k in assignment.items() if k == g.id])
        for g in instance.gates
    ]


def solution_from_assignment(instance: Instance, assignment: dict) -> Solution:
    pats = partition_patterns(instance, assignment)
    return Solution(instance, tuple(p.schedule for p in pats))


def random_assignment(instance: Instance, seed) -> dict:
    rng = np.random.default_rng(seed)
    return {f: int(rng.choice(g)) for f, g in enumerate(instance.compatible_gates)}


# -- the solver -----------------------------------------------------------------

class _Run:
    def __init__(self, instance: Instance, config: SolverConfig):
        self.inst = instance
        self.cfg = config
        self.t0 = time.monotonic()
        self.pool = ColumnPool(instance)
        self.rmp = RestrictedMaster(self.pool)
        self.log = []
        self.iterations = 0
        self.nodes = 0
        self.best: Solution | None = None
        self.ub = math.inf
        self.integral = True  # all delays are integers
        self.timed_out = False
        self.executor = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
        self._binary_pool_size = -1

    # -- bookkeeping --
    def elapsed(self):
        return time.monotonic() - self.t0

    def out_of_time(self):
        lim = self.cfg.time_limit
        return lim is not None and self.elapsed() > lim

    def offer(self, sol: Solution, source: str):
        sol.validate()
        if sol.objective < self.ub:
            self.ub = float(sol.objective)
            self.best = sol
            log.debug("new incumbent %d from %s", sol.objective, source)

    def closed(self, lb) -> bool:
        """True once ``lb`` proves the incumbent good enough to stop."""
        if self.ub == math.inf:
            return False
        if lb >= self.ub - 1e-9:
            return True
        if self.integral and math.ceil(lb - INT_TOL) >= self.ub:
            return True
        if lb > 1e-9:
            return (self.ub - lb) / lb <= self.cfg.rel_gap
        return self.ub - lb <= self.cfg.abs_gap

    def prunable(self, lb) -> bool:
        if lb >= self.ub - 1e-9:
            return True
        return self.integral and math.ceil(lb - INT_TOL) >= self.ub

    # -- pricing --
    def _map(self, fn, items):
        if self.executor is None:
            return [fn(x) for x in items]
        return list(self.executor.map(fn, items))

    def _uses_heuristic(self, node_iter: int) -> bool:
        s = self.cfg.pricing
        if s == "sm+dp":
            return node_iter < self.cfg.sm_iterations
        if s == "adp+dp":
            return node_iter < self.cfg.adp_iterations
        return s != "dp"

    def _heuristic_for(self, node_iter: int, sigma: int):
        cfg = self.cfg
        s = cfg.pricing
        if s == "sm+dp":
            return "sm" if node_iter < cfg.sm_iterations else None
        if s == "adp+dp":
            return "adp" if node_iter < cfg.adp_iterations else None
        if s == "rhf":
            return "rhf"
        if s == "rhm":
            return "rhm"
        if s == "sm+rhm":
            if node_iter < cfg.sm_switch_iterations and sigma > cfg.sm_switch_sigma:
                return "sm"
            return "rhm"
        return None

    def _price_gate(self, args):
        gate_id, ms, rows, method, node_iter = args
        inp = preprocess(self.inst, gate_id, ms.duals, rows)
        results = []
        if method == "dp" or method == "adp":
            results.append(dp_tabular(inp))
        elif method == "sm":
            for trial in range(self.cfg.sm_trials):
                ss = np.random.SeedSequence([self.cfg.seed, self.iterations, gate_id, trial])
                results.append(double_greedy(inp, np.random.default_rng(ss)))
        elif method == "rhf":
            results.append(rolling_horizon(inp, self.cfg.rh_horizon, self.cfg.rh_window))
        elif method == "rhm":
            sigma = max(1, adjacency_parameter(inp))
            l = max(min(self.cfg.rh_horizon, sigma), self.cfg.rh_window)
            results.append(rolling_horizon(inp, l, self.cfg.rh_window))
        found = {}
        for r in results:
            pat = make_pattern(self.inst, gate_id, r.accepted)
            rc = reduced_cost(pat, ms.duals, rows)
            if rc < FAVORABLE and pat.key not in found:
                found[pat.key] = (rc, pat)
        return [v[1] for v in found.values()]

    def _price_all(self, ms, rows, method, node_iter, sigmas=None):
        def pick(g):
            if method != "auto":
                return method
            return self._heuristic_for(node_iter, sigmas[g] if sigmas else 0) or "dp"
        jobs = [(g.id, ms, rows, pick(g.id), node_iter) for g in self.inst.gates]
        per_gate = self._map(self._price_gate, jobs)
        return [p for pats in per_gate for p in pats]

    def _sigmas(self, ms, rows):
        return [adjacency_parameter(preprocess(self.inst, g.id, ms.duals, rows)) for g in self.inst.gates]

    # -- column generation at one node --
    def column_generation(self, node: BnPNode):
        rows = node.constraints
        node_iter = 0
        ms = None
        while True:
            if self.out_of_time():
                self.timed_out = True
                return ms, False
            ms = self.rmp.solve(rows, basis=node.warm if node_iter == 0 else None)
            if not ms.feasible:
                return ms, True
            self.iterations += 1
            strategy = "dp"
            if self._uses_heuristic(node_iter):
                sigmas = self._sigmas(ms, rows) if self.cfg.pricing == "sm+rhm" else None
                new = self._price_all(ms, rows, "auto", node_iter, sigmas)
                strategy = self.cfg.pricing.replace("+dp", "")
                if not new:
                    new = self._price_all(ms, rows, "dp", node_iter)
                    strategy = "dp"
            else:
                new = self._price_all(ms, rows, "dp", node_iter)
            added = self.pool.add(new)
            entry = {
                "node": node.id,
                "iteration": node_iter,
                "lb": ms.objective,
                "columns_added": added,
                "strategy": strategy,
                "wall": round(self.elapsed(), 4),
            }
            self.log.append(entry)
            log.info("node=%d iter=%d lb=%.4f added=%d pricing=%s wall=%.2fs",
                     node.id, node_iter, ms.objective, added, strategy, entry["wall"])
            node_iter += 1
            if added == 0:
                if new:
                    log.warning("node %d: priced columns already pooled; stopping column generation", node.id)
                return ms, True

    def binary_upper_bound(self):
        # rerun only once the pool has grown noticeably since the last try
        last = self._binary_pool_size
        if last >= 0 and len(self.pool) < last + max(10, last // 5):
            return
        self._binary_pool_size = len(self.pool)
        limit = self.cfg.binary_time_limit
        if self.cfg.time_limit is not None:
            left = max(self.cfg.time_limit - self.elapsed(), 0.0)
            limit = left if limit is None else min(limit, left)
        res = solve_binary_rmp(self.pool, (), time_limit=limit, cutoff=self.ub,
                               node_limit=self.cfg.binary_node_limit)
        if res.selected:
            sol = recover_partition(self.inst, [self.pool.patterns[j] for j in res.selected])
            self.offer(sol, "binary master")

    def seed_node(self, node: BnPNode) -> bool:
        base = self.best.assignment if self.best is not None else self.initial
        fixed = repair_assignment(self.inst, base, node.constraints)
        if fixed is None:
            return False
        self.pool.add(partition_patterns(self.inst, fixed))
        return True

    def run(self) -> Solution:
        inst = self.inst
        self.initial = random_assignment(inst, np.random.SeedSequence([self.cfg.seed, 0xA55]))
        self.pool.add(partition_patterns(inst, self.initial))
        self.offer(solution_from_assignment(inst, self.initial), "initial partition")

        ids = itertools.count()
        root = BnPNode(next(ids), None)
        heap = [(0.0, 0, root.id, root)]
        root_lb = root_ub = None
        global_lb = 0.0
        try:
            while heap:
                lb, _, _, node = heapq.heappop(heap)
                global_lb = min([lb] + [h[0] for h in heap])
                if self.closed(global_lb) and node.id != root.id:
                    heapq.heappush(heap, (lb, -node.depth, node.id, node))
                    break
                if node.id != root.id and self.prunable(lb):
                    node.status = "fathomed"
                    continue
                if self.out_of_time() or (self.cfg.max_nodes is not None and self.nodes >= self.cfg.max_nodes):
                    self.timed_out = self.out_of_time() or self.timed_out
                    heapq.heappush(heap, (lb, -node.depth, node.id, node))
                    break
                if node.id != root.id and not self.seed_node(node):
                    node.status = "infeasible"
                    continue
                self.nodes += 1
                ms, done = self.column_generation(node)
                if ms is None or not ms.feasible:
                    if not done:
                        heapq.heappush(heap, (lb, -node.depth, node.id, node))
                        break
                    node.status = "infeasible"
                    continue
                node.lb = max(ms.objective, lb)
                if not done:
                    # time ran out mid-node; its bound is only the parent's
                    heapq.heappush(heap, (lb, -node.depth, node.id, node))
                    break
                y = fractional_assignments(ms, self.pool)
                pick = select_branch(y)
                if pick is None:
                    chosen = [self.pool.patterns[j] for j, v in enumerate(ms.z) if v > 0.5]
                    self.offer(recover_partition(inst, chosen), f"integral node {node.id}")
                    node.status = "fathomed"
                else:
                    self.binary_upper_bound()
                if node.id == root.id:
                    root_lb, root_ub = node.lb, self.ub
                    self.root_log = list(self.log)
                self.rmp.forget(node.constraints)
                if pick is None or self.prunable(node.lb):
                    node.status = "fathomed"
                    continue
                node.status = "branched"
                for child in make_children(node, pick[0], pick[1], ids):
                    child.warm = ms.basis
                    heapq.heappush(heap, (node.lb, -child.depth, child.id, child))
                global_lb = min([h[0] for h in heap]) if heap else node.lb
                if self.closed(global_lb):
                    break
        finally:
            if self.executor is not None:
                self.executor.shutdown()

        open_lbs = [h[0] for h in heap if not self.prunable(h[0])]
        if open_lbs:
            final_lb = min(open_lbs)
        else:
            final_lb = self.ub  # tree exhausted: incumbent is optimal
        final_lb = min(final_lb, self.ub)
        sol = self.best
        sol.lb = final_lb
        sol.ub = self.ub
        if self.timed_out:
            sol.status = "time_limit"
        elif not open_lbs:
            sol.status = "optimal"
        else:
            sol.status = "gap_reached"
        sol.stats = {
            "iterations": self.iterations,
            "columns": len(self.pool),
            "nodes": self.nodes,
            "wall_seconds": round(self.elapsed(), 4),
            "root_lb": root_lb,
            "root_ub": root_ub,
            "pricing": self.cfg.pricing,
        }
        sol.log = self.log
        return sol


def solve(instance: Instance, config: SolverConfig | None = None) -> Solution:
    """Minimise total arrival delay; returns the incumbent with its bounds."""
    return _Run(instance, config or SolverConfig()).run()
