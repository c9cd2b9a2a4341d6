"""Airport gate assignment by branch-and-price."""
from .model import (
    AircraftClass,
    Flight,
    Gate,
    GateSchedule,
    Instance,
    InstanceError,
    ScheduleError,
    evaluate_sequence,
    generate_instance,
    load_instance,
    save_instance,
)

__version__ = "0.1.0"
