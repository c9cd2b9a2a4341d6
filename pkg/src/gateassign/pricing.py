"""Single-gate pricing.

Given benefits ``pi`` for the flights a gate may take, find a subset that
maximises ``f(A) = sum(pi_i) - sum(delay_i)`` where delays follow the
sequential park-time rule. The exact methods are a memoised recursion over
``g_i(t)`` (best value from flight ``i`` on when the gate frees at ``t``)
and its tabular twin on the integer grid; the heuristics are randomised
double greedy, block decomposition and a rolling horizon.

A flight marked forced must be accepted whatever it costs. Forbidden
flights are ignored by every method.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .master import (
    Duals,
    Pattern,
    fold_branch_duals,
    forbidden_at,
    forced_at,
    reduced_cost,
)
from .model import Instance

FREE = "free"
FORCED = "forced"
FORBIDDEN = "forbidden"

MIN_BENEFIT = 1e-9


@dataclass(frozen=True)
class PricingFlight:
    id: int
    arrival: int
    benefit: float
    proc: int
    status: str = FREE


@dataclass(frozen=True)
class PricingInput:
    gate_id: int
    flights: tuple = ()
    mu: float = 0.0  # convexity dual (already folded) of this gate

    def __post_init__(self):
        object.__setattr__(self, "flights", tuple(self.flights))
        prev = None
        for f in self.flights:
            if f.status not in (FREE, FORCED, FORBIDDEN):
                raise ValueError(f"flight {f.id}: unknown status {f.status!r}")
            if f.proc < 0:
                raise ValueError(f"flight {f.id}: negative processing time")
            if prev is not None and (f.arrival, f.id) < (prev.arrival, prev.id):
                raise ValueError("pricing flights must be sorted by arrival")
            prev = f
        if len({f.id for f in self.flights}) != len(self.flights):
            raise ValueError("duplicate flight ids in pricing input")

    @classmethod
    def from_tuples(cls, rows, gate_id=0, forced=(), forbidden=(), mu=0.0):
        """Build from ``(arrival, benefit, proc)`` rows; ids are 1-based positions."""
        flights = []
        for pos, (a, pi, p) in enumerate(rows, start=1):
            status = FORCED if pos in forced else FORBIDDEN if pos in forbidden else FREE
            flights.append(PricingFlight(pos, a, pi, p, status))
        return cls(gate_id, flights, mu)

    def __len__(self):
        return len(self.flights)

    def active(self) -> "PricingInput":
        if all(f.status != FORBIDDEN for f in self.flights):
            return self
        return replace(self, flights=[f for f in self.flights if f.status != FORBIDDEN])

    @property
    def ids(self) -> tuple:
        return tuple(f.id for f in self.flights)


@dataclass
class PricingResult:
    gate_id: int
    accepted: tuple
    park_times: tuple
    objective: float
    strategy: str = ""


def reduced_cost_of_result(result: PricingResult, inp: PricingInput) -> float:
    return -result.objective - inp.mu


# -- preprocessing ----------------------------------------------------------------

def preprocess(instance: Instance, gate_id: int, duals: Duals, branch_rows=(),
               min_benefit: float = MIN_BENEFIT) -> PricingInput:
    pi, mu = fold_branch_duals(duals, branch_rows, gate_id)
    gate = instance.gates[gate_id]
    forced = forced_at(branch_rows, gate_id)
    banned = forbidden_at(branch_rows, gate_id)
    flights = []
    for fid in instance.compatible_flights[gate_id]:
        if fid in banned:
            continue
        f = instance.flights[fid]
        benefit = float(pi[fid])
        if fid in forced:
            status = FORCED
        elif benefit > min_benefit:
            status = FREE
        else:
            continue
        flights.append(PricingFlight(fid, f.arrival, benefit, f.min_turn + gate.buffer, status))
    return PricingInput(gate_id, flights, mu)


def reduced_cost_of_pattern(pattern: Pattern, duals: Duals, branch_rows=()) -> float:
    return reduced_cost(pattern, duals, branch_rows)


# -- objective --------------------------------------------------------------------

def _arrays(inp: PricingInput):
    fl = inp.flights
    return (
        [f.arrival for f in fl],
        [f.benefit for f in fl],
        [f.proc for f in fl],
        [f.status == FORCED for f in fl],
    )


def _schedule(inp: PricingInput, positions: Iterable[int], start=0):
    parks = []
    t_free = start
    value = 0.0
    for j in positions:
        f = inp.flights[j]
        t = max(t_free, f.arrival)
        parks.append(t)
        value += f.benefit - (t - f.arrival)
        t_free = t + f.proc
    return parks, value, t_free


def eval_f(inp: PricingInput, accepted: Iterable[int]) -> float:
    """Net benefit of accepting exactly the flight ids in ``accepted``."""
    want = set(accepted)
    pos = [j for j, f in enumerate(inp.flights) if f.id in want]
    if len(pos) != len(want):
        missing = want - set(inp.ids)
        raise ValueError(f"flights {sorted(missing)} are not part of the pricing input")
    return _schedule(inp, pos)[1]


def total_delay(inp: PricingInput, accepted: Iterable[int]) -> int:
    want = set(accepted)
    pos = [j for j, f in enumerate(inp.flights) if f.id in want]
    parks, _, _ = _schedule(inp, pos)
    return sum(t - inp.flights[j].arrival for t, j in zip(parks, pos))


def _result(inp: PricingInput, positions, strategy: str, start=0) -> PricingResult:
    positions = sorted(positions)
    parks, value, _ = _schedule(inp, positions, start)
    return PricingResult(
        inp.gate_id,
        tuple(inp.flights[j].id for j in positions),
        tuple(parks),
        value,
        strategy,
    )


# -- double greedy ----------------------------------------------------------------

def _delay_shift(a, p, idxs, t_hi, t_lo):
    """Extra delay of flights ``idxs`` when the gate frees at t_hi instead of t_lo."""
    extra = 0
    for j in idxs:
        if t_hi == t_lo:
            break
        aj = a[j]
        hi = t_hi if t_hi > aj else aj
        lo = t_lo if t_lo > aj else aj
        extra += hi - lo
        t_hi, t_lo = hi + p[j], lo + p[j]
    return extra


def double_greedy(inp: PricingInput, rng_seed=None) -> PricingResult:
    """Randomised double greedy for unconstrained submodular maximisation.

    ``rng_seed`` may be an int, a SeedSequence or a numpy Generator.
    Forced flights start inside the lower set and are never dropped.
    """
    inp = inp.active()
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    a, pi, p, forced = _arrays(inp)
    n = len(a)
    forced_pos = [j for j in range(n) if forced[j]]
    x_free = 0  # gate free time after the decided part of X
    y_free = 0  # same for Y
    chosen = []
    for i in range(n):
        if forced[i]:
            x_free = max(x_free, a[i]) + p[i]
            y_free = max(y_free, a[i]) + p[i]
            chosen.append(i)
            continue
        # gain of adding i to X; only forced flights follow it in X
        later_forced = [j for j in forced_pos if j > i]
        park = max(x_free, a[i])
        gain_add = pi[i] - (park - a[i]) - _delay_shift(a, p, later_forced, park + p[i], x_free)
        # gain of removing i from Y; everything after i is still in Y
        park_y = max(y_free, a[i])
        gain_drop = -(pi[i] - (park_y - a[i])) + _delay_shift(a, p, range(i + 1, n), park_y + p[i], y_free)
        ga, gb = max(gain_add, 0.0), max(gain_drop, 0.0)
        if ga + gb <= 0.0:
            take = True
        else:
            take = rng.random() < ga / (ga + gb)
        if take:
            chosen.append(i)
            x_free = park + p[i]
            y_free = park_y + p[i]
    return _result(inp, chosen, "sm")


# -- exact dynamic programs -------------------------------------------------------

def _dp_solve(a, pi, p, forced, start=0):
    """Exact ``g_1(start)`` and maximising positions via memoised recursion."""
    n = len(a)
    memo = {}

    def g(i, t):
        if i == n:
            return 0.0
        if t < a[i]:
            t = a[i]
        key = (i, t)
        hit = memo.get(key)
        if hit is not None:
            return hit[0]
        if forced[i]:
            val = (a[i] + pi[i] - t) + g(i + 1, t + p[i])
            take = True
        elif t > a[i] + pi[i]:
            val = g(i + 1, t)
            take = False
        else:
            acc = (a[i] + pi[i] - t) + g(i + 1, t + p[i])
            rej = g(i + 1, t)
            take = acc >= rej
            val = acc if take else rej
        memo[key] = (val, take)
        return val

    limit = sys.getrecursionlimit()
    if limit < 4 * n + 200:
        sys.setrecursionlimit(4 * n + 200)
    try:
        best = g(0, start)
    finally:
        sys.setrecursionlimit(limit)

    chosen = []
    t = start
    for i in range(n):
        t = max(t, a[i])
        if memo[(i, t)][1]:
            chosen.append(i)
            t += p[i]
    return best, chosen


def dp_recursive(inp: PricingInput, start=0) -> PricingResult:
    inp = inp.active()
    a, pi, p, forced = _arrays(inp)
    _, chosen = _dp_solve(a, pi, p, forced, start)
    return _result(inp, chosen, "dp", start)


def horizon_c(inp: PricingInput) -> int:
    inp = inp.active()
    if not inp.flights:
        return 0
    return math.ceil(inp.flights[-1].arrival + max(f.benefit for f in inp.flights))


class _Table:
    """g_i(t) on t = 0..c, with the forced-only tail for t beyond c."""

    def __init__(self, inp: PricingInput, c: int):
        a, pi, p, forced = _arrays(inp)
        self.a, self.pi, self.p, self.forced = a, pi, p, forced
        self.c = c
        n = len(a)
        grid = np.arange(c + 1)
        G = np.zeros((n + 1, c + 1))
        take = np.zeros((n, c + 1), dtype=bool)
        for i in range(n - 1, -1, -1):
            tt = np.maximum(grid, a[i])
            acc = (a[i] + pi[i] - tt) + self.lookup(i + 1, tt + p[i], G)
            if forced[i]:
                G[i] = acc
                take[i] = True
            else:
                rej = G[i + 1][tt]
                ok = tt <= a[i] + pi[i]
                take[i] = ok & (acc >= rej)
                G[i] = np.where(take[i], acc, rej)
        self.G = G
        self.take = take

    def lookup(self, i, t, G=None):
        G = self.G if G is None else G
        t = np.asarray(t)
        inside = t <= self.c
        out = G[i][np.minimum(t, self.c)]
        if not inside.all():
            out = np.where(inside, out, self._tail(i, t))
        return out

    def _tail(self, i, t):
        # beyond c every free flight is past its window; only forced ones remain
        val = np.zeros(np.shape(t))
        t = np.asarray(t).copy()
        for j in range(i, len(self.a)):
            if self.forced[j]:
                t = np.maximum(t, self.a[j])
                val += self.a[j] + self.pi[j] - t
                t = t + self.p[j]
        return val

    def trace(self, start=0):
        chosen = []
        t = start
        for i in range(len(self.a)):
            t = max(t, self.a[i])
            if t > self.c:
                chosen.extend(j for j in range(i, len(self.a)) if self.forced[j])
                break
            if self.take[i][t]:
                chosen.append(i)
                t += self.p[i]
        return chosen


def _table(inp: PricingInput, c):
    if inp.flights and c < inp.flights[-1].arrival:
        raise ValueError(f"c={c} is below the last arrival {inp.flights[-1].arrival}")
    for f in inp.flights:
        if float(f.arrival) != int(f.arrival) or float(f.proc) != int(f.proc):
            raise ValueError("tabular DP needs integral arrival and processing times")
    # a grid shorter than the horizon would misjudge the tail, so extend it
    return _Table(inp, max(int(c), horizon_c(inp)))


def dp_tabular(inp: PricingInput, c: int | None = None) -> PricingResult:
    inp = inp.active()
    if c is None:
        c = horizon_c(inp)
    tab = _table(inp, c)
    return _result(inp, tab.trace(), "adp")


def dp_table(inp: PricingInput, c: int | None = None) -> np.ndarray:
    """Full table, row ``i`` (0-based) holding g for flights i.. on t = 0..c."""
    inp = inp.active()
    if c is None:
        c = horizon_c(inp)
    return _table(inp, c).G


# -- heuristics -------------------------------------------------------------------

def adjacency_parameter(inp: PricingInput) -> int:
    inp = inp.active()
    fl = inp.flights
    n = len(fl)
    best = 0
    for i, f in enumerate(fl):
        reach = f.arrival + f.benefit + f.proc
        sigma = n - 1 - i
        for j in range(i + 1, n):
            if fl[j].arrival > reach:
                sigma = min(j - i, n - 1 - i)
                break
        best = max(best, sigma)
    return best


def _trim(inp: PricingInput, chosen):
    """Drop free flights parked after their window closes, one at a time."""
    chosen = sorted(chosen)
    while True:
        parks, _, _ = _schedule(inp, chosen)
        late = None
        for t, j in zip(parks, chosen):
            f = inp.flights[j]
            if f.status != FORCED and t > f.arrival + f.benefit:
                late = j
                break
        if late is None:
            return chosen
        chosen.remove(late)


def block_decomposition(inp: PricingInput, improve: bool = False) -> PricingResult:
    inp = inp.active()
    a, pi, p, forced = _arrays(inp)
    n = len(a)
    if n == 0:
        return _result(inp, [], "block")
    size = max(1, adjacency_parameter(inp))
    blocks = [list(range(s, min(s + size, n))) for s in range(0, n, size)]
    picks, values = [], []
    for blk in blocks:
        val, sub = _dp_solve([a[j] for j in blk], [pi[j] for j in blk],
                             [p[j] for j in blk], [forced[j] for j in blk])
        picks.append([blk[j] for j in sub])
        values.append(val)
    odd = sum(values[0::2])
    even = sum(values[1::2])
    win = 0 if odd >= even else 1
    chosen = [j for b in range(win, len(blocks), 2) for j in picks[b]]
    others = [j for b in range(1 - win, len(blocks), 2) for j in blocks[b]]
    chosen += [j for j in others if forced[j]]
    chosen = sorted(chosen)
    if not improve:
        return _result(inp, chosen, "block")

    plain = _trim(inp, chosen)
    current = _schedule(inp, chosen)[1]
    for j in others:
        if forced[j]:
            continue
        trial = sorted(chosen + [j])
        val = _schedule(inp, trial)[1]
        if val > current:
            chosen, current = trial, val
    chosen = _trim(inp, chosen)
    if _schedule(inp, plain)[1] > _schedule(inp, chosen)[1]:
        chosen = plain
    return _result(inp, chosen, "block+")


def rolling_horizon(inp: PricingInput, horizon_l: int, window_w: int = 1) -> PricingResult:
    if window_w < 1 or horizon_l < window_w:
        raise ValueError("need horizon_l >= window_w >= 1")
    inp = inp.active()
    a, pi, p, forced = _arrays(inp)
    n = len(a)
    fixed = []
    s, t = 0, 0
    while s + horizon_l <= n:
        win = range(s, s + horizon_l)
        _, sub = _dp_solve([a[j] for j in win], [pi[j] for j in win],
                           [p[j] for j in win], [forced[j] for j in win], t)
        fixed += [s + j for j in sub if j < window_w]
        t = _schedule(inp, fixed)[2] if fixed else 0
        s += window_w
    if s < n:
        rest = range(s, n)
        _, sub = _dp_solve([a[j] for j in rest], [pi[j] for j in rest],
                           [p[j] for j in rest], [forced[j] for j in rest], t)
        fixed += [s + j for j in sub]
    return _result(inp, fixed, "rh")
