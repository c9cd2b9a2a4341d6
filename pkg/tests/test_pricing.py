import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gateassign.master import FORCE_OFF, FORCE_ON, BranchConstraint, Duals, make_pattern
from gateassign.model import AircraftClass, Flight, Gate, Instance, schedule_for
from gateassign.oracle import brute_force_pricing
from gateassign.pricing import (
    FORCED,
    FREE,
    PricingFlight,
    PricingInput,
    adjacency_parameter,
    block_decomposition,
    double_greedy,
    dp_recursive,
    dp_table,
    dp_tabular,
    eval_f,
    horizon_c,
    preprocess,
    reduced_cost_of_pattern,
    reduced_cost_of_result,
    rolling_horizon,
    total_delay,
)

from helpers import random_pricing_input, random_pricing_inputs

TWO = [(0, 3, 10), (5, 4, 10)]
THREE = TWO + [(100, 2, 10)]


def inp(rows, **kw):
    return PricingInput.from_tuples(rows, **kw)


def seeds(n=100):
    return settings(max_examples=n)(given(st.integers(0, 2**32 - 1)))


# -- preprocessing -------------------------------------------------------------

def small_instance():
    flights = (
        Flight(0, 0, 30, "DL"),
        Flight(1, 10, 30, "DL"),
        Flight(2, 20, 45, "DL", AircraftClass.HEAVY),
    )
    gates = (Gate(0, 10), Gate(1, 10, heavy_capable=True))
    return Instance(flights, gates)


def test_preprocess_zero_dual_dropped():
    inst = small_instance()
    d = Duals(pi=np.array([0.0, 3.0, 0.0]), mu=np.zeros(2))
    assert preprocess(inst, 0, d).ids == (1,)


def test_preprocess_incompatible_dropped():
    inst = small_instance()
    d = Duals(pi=np.array([0.0, 0.0, 5.0]), mu=np.zeros(2))
    assert preprocess(inst, 0, d).ids == ()
    assert preprocess(inst, 1, d).ids == (2,)


def test_preprocess_branch_rows():
    inst = small_instance()
    d = Duals(pi=np.array([4.0, 3.0, 0.0]), mu=np.zeros(2), lam=(0.0, 0.0))
    rows = [BranchConstraint(0, 0, FORCE_OFF), BranchConstraint(1, 1, FORCE_ON)]
    assert preprocess(inst, 0, d, rows).ids == ()
    p1 = preprocess(inst, 1, d, rows)
    assert p1.ids == (0, 1)
    assert p1.flights[1].status == FORCED
    # processing time includes the gate buffer
    assert p1.flights[0].proc == 40


# -- f -------------------------------------------------------------------------

def test_eval_f_examples():
    x = inp(TWO)
    assert eval_f(x, []) == 0
    assert eval_f(x, [1, 2]) == pytest.approx(2.0)
    assert eval_f(x, [2]) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        eval_f(x, [3])


@seeds(500)
def test_submodular(seed):
    rng = np.random.default_rng(seed)
    x = random_pricing_input(rng, n_min=1, n_max=10)
    ids = list(x.ids)
    B = [i for i in ids if rng.random() < 0.5]
    A = [i for i in B if rng.random() < 0.5]
    rest = [i for i in ids if i not in B]
    if not rest:
        return
    u = int(rng.choice(rest))
    gain_a = eval_f(x, A + [u]) - eval_f(x, A)
    gain_b = eval_f(x, B + [u]) - eval_f(x, B)
    assert gain_a >= gain_b - 1e-9


@seeds()
def test_delay_monotone(seed):
    rng = np.random.default_rng(seed)
    x = random_pricing_input(rng, n_max=10)
    B = [i for i in x.ids if rng.random() < 0.6]
    A = [i for i in B if rng.random() < 0.5]
    assert total_delay(x, B) >= total_delay(x, A)


# -- double greedy ---------------------------------------------------------------

def test_double_greedy_examples():
    r = double_greedy(inp([(10, 5, 40)]), 0)
    assert r.accepted == (1,) and r.objective == pytest.approx(5)
    r = double_greedy(inp([]), 0)
    assert r.accepted == () and r.objective == 0


def test_double_greedy_expectation_example():
    x = inp(TWO)
    assert brute_force_pricing(x).optimum == pytest.approx(4)
    vals = [double_greedy(x, s).objective for s in range(1000)]
    assert np.mean(vals) >= 2.0


def test_double_greedy_deterministic():
    x = random_pricing_inputs(1, 3, n_min=8)[0]
    assert double_greedy(x, 17) == double_greedy(x, 17)


def test_double_greedy_expectation_random():
    for x in random_pricing_inputs(5, 99, n_min=5, n_max=10):
        if eval_f(x, x.ids) < 0:
            continue
        opt = dp_recursive(x).objective
        mean = np.mean([double_greedy(x, s).objective for s in range(1000)])
        assert mean >= 0.45 * opt - 1e-9


def test_double_greedy_keeps_forced():
    for x in random_pricing_inputs(40, 5, n_min=2, forced_prob=0.3):
        forced = {f.id for f in x.flights if f.status == FORCED}
        r = double_greedy(x, 1)
        assert forced <= set(r.accepted)
        assert r.objective == pytest.approx(eval_f(x, r.accepted))


# -- exact dynamic programs -------------------------------------------------------

def test_dp_examples():
    r = dp_recursive(inp([(10, 5, 40)]))
    assert r.objective == pytest.approx(5) and r.park_times == (10,)
    r = dp_recursive(inp(TWO))
    assert r.accepted == (2,) and r.objective == pytest.approx(4)
    r = dp_tabular(inp([(10, 5, 40)]), c=15)
    assert r.objective == pytest.approx(5)
    r = dp_tabular(inp(TWO), c=9)
    assert r.accepted == (2,) and r.objective == pytest.approx(4)


def test_dp_tabular_small_c_rejected():
    with pytest.raises(ValueError):
        dp_tabular(inp(THREE), c=50)


def test_forced_flight():
    # flight 1 forced: accepting it pushes flight 2 back, so 3 beats 2
    x = inp(TWO, forced=(1,))
    for solve in (dp_recursive, dp_tabular):
        r = solve(x)
        assert r.accepted == (1,) and r.objective == pytest.approx(3)
    assert brute_force_pricing(x).optimum == pytest.approx(3)


def test_dp_matches_oracle():
    for x in random_pricing_inputs(150, 11, n_max=12):
        ref = brute_force_pricing(x).optimum
        r = dp_recursive(x)
        assert r.objective == pytest.approx(ref, abs=1e-9)
        assert r.objective == pytest.approx(eval_f(x, r.accepted), abs=1e-9)


def test_dp_matches_oracle_forced():
    for x in random_pricing_inputs(100, 12, n_max=10, forced_prob=0.25):
        ref = brute_force_pricing(x).optimum
        assert dp_recursive(x).objective == pytest.approx(ref, abs=1e-9)
        assert dp_tabular(x).objective == pytest.approx(ref, abs=1e-9)


def test_tabular_equals_recursive():
    for x in random_pricing_inputs(200, 13, n_max=25):
        rec = dp_recursive(x)
        tab = dp_tabular(x)
        assert tab.objective == pytest.approx(rec.objective, abs=1e-9)
        assert tab.objective == pytest.approx(eval_f(x, tab.accepted), abs=1e-9)
        assert all(float(t).is_integer() for t in tab.park_times)


@seeds()
def test_acceptance_window(seed):
    rng = np.random.default_rng(seed)
    x = random_pricing_input(rng, n_max=15, spread=8)
    by_id = {f.id: f for f in x.flights}
    for r in (dp_recursive(x), dp_tabular(x), double_greedy(x, seed),
              block_decomposition(x, improve=True), rolling_horizon(x, 3)):
        for fid, t in zip(r.accepted, r.park_times):
            assert t <= by_id[fid].arrival + by_id[fid].benefit + 1e-9


@seeds(60)
def test_slopes(seed):
    rng = np.random.default_rng(seed)
    x = random_pricing_input(rng, n_min=1, n_max=8, integral_pi=True, spread=10)
    G = dp_table(x)
    n = len(x)
    for k in range(n + 1):
        diffs = np.round(np.diff(G[k]), 9)
        allowed = set(range(-(n - k), 1))
        assert set(diffs.tolist()) <= allowed


# -- horizon and sigma --------------------------------------------------------------

def test_horizon_c():
    assert horizon_c(inp(THREE)) == 104
    assert horizon_c(inp([(10, 5, 40)])) == 15
    assert horizon_c(inp([])) == 0


def test_adjacency_parameter():
    assert adjacency_parameter(inp(THREE)) == 2
    assert adjacency_parameter(inp([(10, 5, 40)])) == 0
    assert adjacency_parameter(inp([(0, 1, 1), (1000, 1, 1)])) == 1
    assert adjacency_parameter(inp([])) == 0


# -- heuristics -----------------------------------------------------------------------

def test_block_examples():
    x = inp(THREE)
    assert brute_force_pricing(x).optimum == pytest.approx(6)
    r = block_decomposition(x)
    assert r.accepted == (2,) and r.objective == pytest.approx(4)
    r = block_decomposition(x, improve=True)
    assert r.accepted == (2, 3) and r.objective == pytest.approx(6)
    assert block_decomposition(inp([])).objective == 0


def test_block_single_block_exact():
    x = inp([(0, 3, 10), (2, 9, 10), (4, 8, 10)])
    assert adjacency_parameter(x) >= len(x) - 1
    assert block_decomposition(x).objective == pytest.approx(dp_recursive(x).objective)


def test_block_half_ratio():
    for x in random_pricing_inputs(300, 21, n_max=30, spread=12):
        opt = dp_recursive(x).objective
        for improve in (False, True):
            r = block_decomposition(x, improve=improve)
            assert r.objective >= opt / 2 - 1e-9
            assert r.objective == pytest.approx(eval_f(x, r.accepted), abs=1e-9)
        assert block_decomposition(x, True).objective >= block_decomposition(x).objective - 1e-9


def test_rolling_examples():
    x = inp(THREE)
    r = rolling_horizon(x, 2, 1)
    assert r.accepted == (2, 3) and r.park_times == (5, 100)
    assert r.objective == pytest.approx(6)
    assert rolling_horizon(inp([]), 2).objective == 0
    with pytest.raises(ValueError):
        rolling_horizon(x, 1, 2)


def test_rolling_long_horizon_is_exact():
    for x in random_pricing_inputs(50, 31, n_max=14):
        r = rolling_horizon(x, max(len(x), 1))
        assert r.objective == pytest.approx(dp_recursive(x).objective, abs=1e-9)


def test_heuristics_feasible_with_forced():
    for x in random_pricing_inputs(80, 41, n_min=1, n_max=20, forced_prob=0.2):
        forced = {f.id for f in x.flights if f.status == FORCED}
        opt = dp_recursive(x).objective
        for r in (block_decomposition(x), block_decomposition(x, True),
                  rolling_horizon(x, 4, 2), double_greedy(x, 3)):
            assert forced <= set(r.accepted)
            assert r.objective <= opt + 1e-9
            assert r.objective == pytest.approx(eval_f(x, r.accepted), abs=1e-9)


# -- reduced costs ------------------------------------------------------------------------

def test_reduced_cost_formula():
    inst = Instance((Flight(0, 0, 30, "DL"), Flight(1, 5, 30, "DL")), (Gate(0, 10),))
    p = make_pattern(inst, 0, [0, 1])
    assert p.cost == 35
    d = Duals(pi=np.array([20.0, 30.0]), mu=np.array([1.0]))
    assert reduced_cost_of_pattern(p, d) == pytest.approx(-16)
    empty = make_pattern(inst, 0, [])
    assert reduced_cost_of_pattern(empty, Duals(np.zeros(2), np.zeros(1))) == 0


@seeds(100)
def test_reduced_cost_identity(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 8))
    arr = np.sort(rng.integers(0, 100, n))
    flights = tuple(Flight(i, int(arr[i]), int(rng.integers(20, 50)), "DL") for i in range(n))
    inst = Instance(flights, (Gate(0, int(rng.integers(0, 15))),))
    d = Duals(pi=rng.uniform(0, 40, n), mu=rng.uniform(-10, 10, 1))
    x = preprocess(inst, 0, d)
    for r in (dp_recursive(x), double_greedy(x, seed)):
        p = make_pattern(inst, 0, r.accepted)
        assert reduced_cost_of_pattern(p, d) == pytest.approx(reduced_cost_of_result(r, x), abs=1e-9)
