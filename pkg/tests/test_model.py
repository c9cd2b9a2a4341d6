import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gateassign.model import (
    AircraftClass,
    Flight,
    Gate,
    InfeasibleInstanceError,
    Instance,
    InstanceError,
    ScheduleError,
    evaluate_sequence,
    export_csv,
    generate_instance,
    instance_to_dict,
    is_compatible,
    load_instance,
    save_instance,
    schedule_for,
)

HEAVY = AircraftClass.HEAVY


def flights_of(rows, airline="DL"):
    return [Flight(i, a, t, airline) for i, (a, t) in enumerate(rows)]


class TestCompatibility:
    def test_heavy_needs_heavy_gate(self):
        assert not is_compatible(Flight(0, 0, 30, "DL", HEAVY), Gate(0, 10))

    def test_empty_airline_set_means_all(self):
        assert is_compatible(Flight(0, 0, 30, "DL"), Gate(0, 10))

    def test_airline_membership(self):
        assert not is_compatible(Flight(0, 0, 30, "UA"), Gate(0, 10, eligible_airlines=frozenset({"DL"})))
        assert is_compatible(Flight(0, 0, 30, "DL"), Gate(0, 10, eligible_airlines=frozenset({"DL"})))


class TestEvaluateSequence:
    def test_two_flights(self):
        s = evaluate_sequence(Gate(0, 10), flights_of([(0, 30), (5, 30)]))
        assert s.park_times == (0, 40)
        assert s.pushback_times == (30, 70)
        assert s.total_delay == 35

    def test_empty(self):
        s = evaluate_sequence(Gate(0, 10), [])
        assert s.total_delay == 0 and s.accepted == ()

    def test_three_flights(self):
        s = evaluate_sequence(Gate(0, 5), flights_of([(0, 20), (15, 20), (80, 20)]))
        assert s.park_times == (0, 25, 80)
        assert s.total_delay == 10

    def test_incompatible_rejected(self):
        with pytest.raises(ScheduleError):
            evaluate_sequence(Gate(0, 10), [Flight(0, 0, 30, "DL", HEAVY)])

    def test_order_enforced(self):
        fl = flights_of([(0, 30), (5, 30)])
        with pytest.raises(ScheduleError):
            evaluate_sequence(Gate(0, 10), fl[::-1])


@st.composite
def gate_and_flights(draw):
    n = draw(st.integers(0, 9))
    arrivals = sorted(draw(st.lists(st.integers(0, 300), min_size=n, max_size=n)))
    turns = draw(st.lists(st.integers(1, 60), min_size=n, max_size=n))
    buffer = draw(st.integers(0, 20))
    inst = Instance(tuple(flights_of(list(zip(arrivals, turns)))), (Gate(0, buffer),))
    mask_b = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    mask_a = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    B = [i for i in range(n) if mask_b[i]]
    A = [i for i in B if mask_a[i]]
    return inst, A, B


@given(gate_and_flights())
def test_delay_monotone_under_inclusion(case):
    inst, A, B = case
    sa, sb = schedule_for(inst, 0, A), schedule_for(inst, 0, B)
    assert sb.total_delay >= sa.total_delay
    park_b = dict(zip(sb.accepted, sb.park_times))
    for f, t in zip(sa.accepted, sa.park_times):
        assert park_b[f] >= t
    sb.validate(inst)
    assert all(isinstance(t, int) for t in sb.park_times + sb.pushback_times)


@given(gate_and_flights())
def test_removing_a_flight_never_adds_delay(case):
    inst, _, B = case
    base = schedule_for(inst, 0, B).total_delay
    for f in B:
        assert schedule_for(inst, 0, [g for g in B if g != f]).total_delay <= base


class TestValidation:
    def test_schedule_validate_catches_buffer(self):
        inst = Instance(tuple(flights_of([(0, 30), (5, 30)])), (Gate(0, 10),))
        good = schedule_for(inst, 0, [0, 1])
        bad = type(good)(0, (0, 1), (0, 35), (30, 65), 30)
        good.validate(inst)
        with pytest.raises(ScheduleError):
            bad.validate(inst)

    def test_zero_turn_rejected(self):
        with pytest.raises(InstanceError, match="min_turn"):
            Instance((Flight(0, 0, 0, "DL"),), (Gate(0, 10),))

    def test_unsorted_rejected(self):
        with pytest.raises(InstanceError, match="arrival"):
            Instance((Flight(0, 10, 30, "DL"), Flight(1, 5, 30, "DL")), (Gate(0, 10),))

    def test_uncoverable_flight(self):
        with pytest.raises(InfeasibleInstanceError):
            Instance((Flight(0, 0, 30, "DL", HEAVY),), (Gate(0, 10),))


class TestGeneration:
    def test_deterministic(self):
        a = generate_instance(2, 1, seed=7)
        b = generate_instance(2, 1, seed=7)
        assert a == b
        assert json.dumps(instance_to_dict(a)) == json.dumps(instance_to_dict(b))

    @pytest.mark.parametrize("n,g,ratio", [(30, 5, 6.00), (100, 35, 2.86)])
    def test_ratio(self, n, g, ratio):
        inst = generate_instance(n, g, seed=0)
        assert round(inst.n_flights / inst.n_gates, 2) == ratio

    def test_every_flight_has_a_gate(self):
        for seed in range(20):
            inst = generate_instance(40, 3, seed=seed)
            assert all(inst.compatible_gates)
            arr = [f.arrival for f in inst.flights]
            assert arr == sorted(arr)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            generate_instance(0, 3)
        with pytest.raises(ValueError):
            generate_instance(3, 3, mean_interarrival=0)

    def test_turn_times_and_buffer(self):
        inst = generate_instance(50, 5, seed=3, buffer=7)
        assert {g.buffer for g in inst.gates} == {7}
        for f in inst.flights:
            assert f.min_turn == (45 if f.is_heavy else 30)


class TestFiles:
    def test_round_trip(self, tmp_path):
        inst = generate_instance(25, 4, seed=11)
        save_instance(inst, tmp_path / "i.json")
        assert load_instance(tmp_path / "i.json") == inst

    def _write(self, tmp_path, data):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps(data))
        return p

    def test_zero_turn_in_file(self, tmp_path):
        data = instance_to_dict(generate_instance(3, 2, seed=1))
        data["flights"][1]["min_turn"] = 0
        with pytest.raises(InstanceError, match=r"flights\[1\]\.min_turn"):
            load_instance(self._write(tmp_path, data))

    def test_duplicate_id(self, tmp_path):
        data = instance_to_dict(generate_instance(3, 2, seed=1))
        data["flights"][2]["id"] = 1
        with pytest.raises(InstanceError, match="duplicate"):
            load_instance(self._write(tmp_path, data))

    def test_no_compatible_gate_in_file(self, tmp_path):
        data = instance_to_dict(generate_instance(3, 1, seed=1))
        data["flights"][0]["class"] = "heavy"
        data["gates"][0]["heavy_capable"] = False
        with pytest.raises(InfeasibleInstanceError):
            load_instance(self._write(tmp_path, data))

    def test_non_integer_time(self, tmp_path):
        data = instance_to_dict(generate_instance(3, 2, seed=1))
        data["flights"][0]["arrival"] = 1.5
        with pytest.raises(InstanceError, match="arrival"):
            load_instance(self._write(tmp_path, data))

    def test_csv(self, tmp_path):
        inst = generate_instance(5, 2, seed=1)
        export_csv(inst, tmp_path / "f.csv", tmp_path / "g.csv")
        rows = (tmp_path / "f.csv").read_text().strip().splitlines()
        assert rows[0] == "id,arrival,min_turn,airline,class"
        assert len(rows) == 6
