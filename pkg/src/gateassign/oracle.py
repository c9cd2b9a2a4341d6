"""Exhaustive reference solvers. Slow on purpose, used to check the fast ones."""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

from .model import Instance, schedule_for
from .pricing import FORBIDDEN, FORCED, PricingInput, eval_f

PRICING_CAP = 20
ASSIGNMENT_CAP = 10**7


class OracleCapExceeded(ValueError):
    """The input is too large to enumerate."""


@dataclass
class OracleReport:
    optimum: float
    optimizer: object
    enumerated: int
    elapsed: float


def brute_force_pricing(inp: PricingInput, cap: int = PRICING_CAP) -> OracleReport:
    start = time.perf_counter()
    forced = [f.id for f in inp.flights if f.status == FORCED]
    free = [f.id for f in inp.flights if f.status not in (FORCED, FORBIDDEN)]
    if len(forced) + len(free) > cap:
        raise OracleCapExceeded(f"{len(forced) + len(free)} flights exceed the cap of {cap}")
    best, best_set, count = None, None, 0
    for r in range(len(free) + 1):
        for combo in itertools.combinations(free, r):
            chosen = tuple(sorted(forced + list(combo)))
            val = eval_f(inp, chosen)
            count += 1
            if best is None or val > best:
                best, best_set = val, chosen
    return OracleReport(best, best_set, count, time.perf_counter() - start)


def assignment_count(instance: Instance) -> int:
    return math.prod(len(g) for g in instance.compatible_gates)


def brute_force_assignment(instance: Instance, cap: int = ASSIGNMENT_CAP) -> OracleReport:
    """Minimum total delay over every compatible flight-to-gate map.

    Walks flights in arrival order keeping each gate's free time, so every
    leaf costs O(1) beyond its parent. The winner is re-evaluated gate by
    gate with the model's schedule rule before returning.
    """
    start = time.perf_counter()
    total = assignment_count(instance)
    if total > cap:
        raise OracleCapExceeded(f"{total} assignments exceed the cap of {cap}")
    flights = instance.flights
    gates = instance.gates
    options = instance.compatible_gates
    free = [0] * len(gates)
    current = [0] * len(flights)
    best = [math.inf, None]
    leaves = 0

    def walk(i, delay):
        nonlocal leaves
        if i == len(flights):
            leaves += 1
            if delay < best[0]:
                best[0], best[1] = delay, list(current)
            return
        f = flights[i]
        for g in options[i]:
            saved = free[g]
            park = max(saved, f.arrival)
            free[g] = park + f.min_turn + gates[g].buffer
            current[i] = g
            walk(i + 1, delay + park - f.arrival)
            free[g] = saved

    walk(0, 0)
    assignment = {i: g for i, g in enumerate(best[1])} if best[1] is not None else {}
    recomputed = sum(
        schedule_for(instance, g.id, [i for i, k in assignment.items() if k == g.id]).total_delay
        for g in gates
    )
    if recomputed != best[0]:
        raise AssertionError(f"oracle re-evaluation mismatch: {recomputed} != {best[0]}")
    return OracleReport(best[0], assignment, leaves, time.perf_counter() - start)


def best_service_order(arrivals, turns, buffer, pair_rule=True):
    """Smallest total delay over service orders of one gate's flights.

    With ``pair_rule`` an order only counts if, for every i < j by index,
    flight i pushes back (plus buffer) before flight j parks, which is how
    the model sequences a gate. Returns (delay, order, orders_checked).
    """
    n = len(arrivals)
    best = (math.inf, None)
    checked = 0
    for order in itertools.permutations(range(n)):
        t_free, delay = 0, 0
        park = [0] * n
        for j in order:
            park[j] = max(t_free, arrivals[j])
            delay += park[j] - arrivals[j]
            t_free = park[j] + turns[j] + buffer
        if pair_rule and any(
            park[i] + turns[i] + buffer > park[j] for i in range(n) for j in range(i + 1, n)
        ):
            continue
        checked += 1
        if delay < best[0]:
            best = (delay, order)
    return best[0], best[1], checked
