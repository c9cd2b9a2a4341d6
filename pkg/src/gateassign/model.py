"""Flights, gates, instances and the sequential park-time rule.

All times are integer minutes. A gate serves its flights in ascending
index (= arrival) order: each flight parks at the later of its arrival and
the moment the gate is free again, stays ``min_turn`` minutes, and the gate
then needs ``buffer`` idle minutes before the next flight can park.
"""
from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

DEFAULT_TURN_TIMES = {"heavy": 45, "regular": 30}
DEFAULT_AIRLINES = ("DL", "AA", "UA", "WN")


class InstanceError(ValueError):
    """Raised for malformed or inconsistent instance data."""


class InfeasibleInstanceError(InstanceError):
    """Some flight has no compatible gate, so no assignment exists."""


class ScheduleError(ValueError):
    """Raised when a gate schedule violates the park-time rule."""


class AircraftClass(str, Enum):
    HEAVY = "heavy"
    REGULAR = "regular"


@dataclass(frozen=True)
class Flight:
    id: int
    arrival: int
    min_turn: int
    airline: str
    aircraft_class: AircraftClass = AircraftClass.REGULAR

    @property
    def is_heavy(self) -> bool:
        return self.aircraft_class is AircraftClass.HEAVY


@dataclass(frozen=True)
class Gate:
    id: int
    buffer: int
    heavy_capable: bool = False
    # empty means every airline may use the gate
    eligible_airlines: frozenset = field(default_factory=frozenset)


def is_compatible(flight: Flight, gate: Gate) -> bool:
    if flight.is_heavy and not gate.heavy_capable:
        return False
    return not gate.eligible_airlines or flight.airline in gate.eligible_airlines


@dataclass(frozen=True)
class Instance:
    flights: tuple
    gates: tuple
    name: str = "instance"

    def __post_init__(self):
        object.__setattr__(self, "flights", tuple(self.flights))
        object.__setattr__(self, "gates", tuple(self.gates))
        _validate_instance(self)

    @property
    def n_flights(self) -> int:
        return len(self.flights)

    @property
    def n_gates(self) -> int:
        return len(self.gates)

    @cached_property
    def compatible_gates(self) -> tuple:
        """Per flight, the ids of the gates it may use (ascending)."""
        return tuple(
            tuple(g.id for g in self.gates if is_compatible(f, g)) for f in self.flights
        )

    @cached_property
    def compatible_flights(self) -> tuple:
        """Per gate, the ids of the flights it may serve (ascending)."""
        return tuple(
            tuple(f.id for f in self.flights if is_compatible(f, g)) for g in self.gates
        )


def _validate_instance(inst: Instance) -> None:
    for pos, f in enumerate(inst.flights):
        if f.id != pos:
            raise InstanceError(f"flights[{pos}].id: expected {pos}, got {f.id}")
        if f.arrival < 0:
            raise InstanceError(f"flights[{pos}].arrival: must be >= 0, got {f.arrival}")
        if f.min_turn <= 0:
            raise InstanceError(f"flights[{pos}].min_turn: must be > 0, got {f.min_turn}")
        if pos and f.arrival < inst.flights[pos - 1].arrival:
            raise InstanceError(f"flights[{pos}].arrival: arrivals must be nondecreasing")
    for pos, g in enumerate(inst.gates):
        if g.id != pos:
            raise InstanceError(f"gates[{pos}].id: expected {pos}, got {g.id}")
        if g.buffer < 0:
            raise InstanceError(f"gates[{pos}].buffer: must be >= 0, got {g.buffer}")
    for f in inst.flights:
        if not any(is_compatible(f, g) for g in inst.gates):
            raise InfeasibleInstanceError(f"flights[{f.id}]: no compatible gate")


@dataclass(frozen=True)
class GateSchedule:
    gate_id: int
    accepted: tuple
    park_times: tuple
    pushback_times: tuple
    total_delay: int

    def validate(self, instance: Instance) -> None:
        """Raise ScheduleError unless this schedule obeys the park-time rule."""
        gate = instance.gates[self.gate_id]
        n = len(self.accepted)
        if not (len(self.park_times) == len(self.pushback_times) == n):
            raise ScheduleError("schedule arrays have mismatched lengths")
        if list(self.accepted) != sorted(set(self.accepted)):
            raise ScheduleError("accepted flights must be strictly ascending")
        delay = 0
        for j, fid in enumerate(self.accepted):
            flight = instance.flights[fid]
            if not is_compatible(flight, gate):
                raise ScheduleError(f"flight {fid} is incompatible with gate {gate.id}")
            park, push = self.park_times[j], self.pushback_times[j]
            if park < flight.arrival:
                raise ScheduleError(f"flight {fid} parks before it arrives")
            if push < park + flight.min_turn:
                raise ScheduleError(f"flight {fid} pushes back before its turn time")
            if j and park < self.pushback_times[j - 1] + gate.buffer:
                raise ScheduleError(f"flight {fid} parks before the buffer has elapsed")
            delay += park - flight.arrival
        if delay != self.total_delay:
            raise ScheduleError(f"total_delay {self.total_delay} != recomputed {delay}")


def simulate(arrivals: Sequence, procs: Sequence, start=0):
    """Park times for jobs served in the given order.

    ``procs[j]`` is the time the gate stays blocked after job ``j`` parks
    (turn time plus buffer). Returns (park_times, gate_free_time).
    """
    parks = []
    free = start
    for a, p in zip(arrivals, procs):
        t = a if a > free else free
        parks.append(t)
        free = t + p
    return parks, free


def evaluate_sequence(gate: Gate, flights: Iterable[Flight]) -> GateSchedule:
    flights = list(flights)
    for prev, cur in zip(flights, flights[1:]):
        if cur.id <= prev.id:
            raise ScheduleError("flights must be given in ascending id order")
    for f in flights:
        if not is_compatible(f, gate):
            raise ScheduleError(f"flight {f.id} is incompatible with gate {gate.id}")
    parks, _ = simulate(
        [f.arrival for f in flights], [f.min_turn + gate.buffer for f in flights]
    )
    return GateSchedule(
        gate_id=gate.id,
        accepted=tuple(f.id for f in flights),
        park_times=tuple(parks),
        pushback_times=tuple(t + f.min_turn for t, f in zip(parks, flights)),
        total_delay=sum(t - f.arrival for t, f in zip(parks, flights)),
    )


def schedule_for(instance: Instance, gate_id: int, flight_ids: Iterable[int]) -> GateSchedule:
    ids = sorted(flight_ids)
    return evaluate_sequence(instance.gates[gate_id], [instance.flights[i] for i in ids])


# -- generation ---------------------------------------------------------------

def generate_instance(
    n_flights: int,
    n_gates: int,
    mean_interarrival: float = 10.0,
    heavy_fraction: float = 0.2,
    airline_pool: Sequence[str] = DEFAULT_AIRLINES,
    seed: int = 0,
    *,
    buffer: int = 10,
    turn_times: Mapping[str, int] | None = None,
    heavy_gate_fraction: float = 0.3,
    open_gate_fraction: float = 0.5,
    max_retries: int = 1000,
    name: str | None = None,
) -> Instance:
    """Random instance with uniformly distributed inter-arrival times.

    Inter-arrival gaps are drawn from U(0, 2 * mean_interarrival) and the
    running sum is rounded to whole minutes. Gate eligibility is redrawn
    until every flight has at least one compatible gate.
    """
    if n_flights < 1 or n_gates < 1:
        raise ValueError("n_flights and n_gates must be >= 1")
    if mean_interarrival <= 0:
        raise ValueError("mean_interarrival must be > 0")
    if not airline_pool:
        raise ValueError("airline_pool must not be empty")
    turns = dict(DEFAULT_TURN_TIMES)
    if turn_times:
        turns.update(turn_times)

    rng = random.Random(seed)
    clock = 0.0
    flights = []
    for i in range(n_flights):
        if i:
            clock += rng.uniform(0.0, 2.0 * mean_interarrival)
        cls = AircraftClass.HEAVY if rng.random() < heavy_fraction else AircraftClass.REGULAR
        flights.append(
            Flight(i, int(round(clock)), int(turns[cls.value]), rng.choice(list(airline_pool)), cls)
        )

    pool = list(airline_pool)
    for _ in range(max_retries):
        gates = []
        for k in range(n_gates):
            heavy = rng.random() < heavy_gate_fraction
            if rng.random() < open_gate_fraction:
                eligible = frozenset()
            else:
                eligible = frozenset(rng.sample(pool, rng.randint(1, len(pool))))
            gates.append(Gate(k, buffer, heavy, eligible))
        if all(any(is_compatible(f, g) for g in gates) for f in flights):
            break
    else:
        raise InstanceError(
            f"could not draw gates covering every flight after {max_retries} attempts"
        )
    return Instance(tuple(flights), tuple(gates), name or f"f{n_flights}g{n_gates}s{seed}")


def mean_interarrival_of(instance: Instance) -> float:
    """Average minutes between consecutive arrivals (0 for a single flight)."""
    if instance.n_flights < 2:
        return 0.0
    return (instance.flights[-1].arrival - instance.flights[0].arrival) / (instance.n_flights - 1)


# -- file I/O -----------------------------------------------------------------

def instance_to_dict(instance: Instance) -> dict:
    return {
        "name": instance.name,
        "flights": [
            {
                "id": f.id,
                "arrival": f.arrival,
                "min_turn": f.min_turn,
                "airline": f.airline,
                "class": f.aircraft_class.value,
            }
            for f in instance.flights
        ],
        "gates": [
            {
                "id": g.id,
                "buffer": g.buffer,
                "heavy_capable": g.heavy_capable,
                "eligible_airlines": sorted(g.eligible_airlines),
            }
            for g in instance.gates
        ],
    }


def _int_field(record: Mapping, key: str, where: str) -> int:
    if key not in record:
        raise InstanceError(f"{where}.{key}: missing")
    value = record[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise InstanceError(f"{where}.{key}: expected integer, got {value!r}")
    return value


def instance_from_dict(data: Mapping) -> Instance:
    if not isinstance(data, Mapping):
        raise InstanceError("instance: expected a JSON object")
    for key in ("flights", "gates"):
        if not isinstance(data.get(key), list):
            raise InstanceError(f"{key}: expected a list")

    flights = []
    seen = set()
    for pos, rec in enumerate(data["flights"]):
        where = f"flights[{pos}]"
        if not isinstance(rec, Mapping):
            raise InstanceError(f"{where}: expected an object")
        fid = _int_field(rec, "id", where)
        if fid in seen:
            raise InstanceError(f"{where}.id: duplicate id {fid}")
        seen.add(fid)
        try:
            cls = AircraftClass(rec.get("class", "regular"))
        except ValueError:
            raise InstanceError(f"{where}.class: unknown aircraft class {rec.get('class')!r}")
        airline = rec.get("airline")
        if not isinstance(airline, str) or not airline:
            raise InstanceError(f"{where}.airline: expected a non-empty string")
        flights.append(
            Flight(fid, _int_field(rec, "arrival", where), _int_field(rec, "min_turn", where), airline, cls)
        )

    gates = []
    seen = set()
    for pos, rec in enumerate(data["gates"]):
        where = f"gates[{pos}]"
        if not isinstance(rec, Mapping):
            raise InstanceError(f"{where}: expected an object")
        gid = _int_field(rec, "id", where)
        if gid in seen:
            raise InstanceError(f"{where}.id: duplicate id {gid}")
        seen.add(gid)
        heavy = rec.get("heavy_capable", False)
        if not isinstance(heavy, bool):
            raise InstanceError(f"{where}.heavy_capable: expected boolean")
        airlines = rec.get("eligible_airlines", [])
        if not isinstance(airlines, list) or not all(isinstance(a, str) for a in airlines):
            raise InstanceError(f"{where}.eligible_airlines: expected a list of strings")
        gates.append(Gate(gid, _int_field(rec, "buffer", where), heavy, frozenset(airlines)))

    flights.sort(key=lambda f: f.id)
    gates.sort(key=lambda g: g.id)
    return Instance(tuple(flights), tuple(gates), str(data.get("name", "instance")))


def save_instance(instance: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=2) + "\n", encoding="utf-8")


def load_instance(path) -> Instance:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: invalid JSON ({exc})") from exc
    return instance_from_dict(data)


def export_csv(instance: Instance, flights_path, gates_path) -> None:
    """Write the flight and gate tables as two CSV files."""
    with open(flights_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "arrival", "min_turn", "airline", "class"])
        for f in instance.flights:
            w.writerow([f.id, f.arrival, f.min_turn, f.airline, f.aircraft_class.value])
    with open(gates_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "buffer", "heavy_capable", "eligible_airlines"])
        for g in instance.gates:
            w.writerow([g.id, g.buffer, int(g.heavy_capable), ";".join(sorted(g.eligible_airlines))])
