import pytest

from softrt.taskmodel import (
    Deterministic,
    ReservationSpec,
    Scripted,
    TaskSpec,
)


def make_overload_tasks():
    """Three periodic tasks whose first task overruns its 1-tick WCET three
    times before settling down.  Total nominal utilization is 59/60 but the
    overruns push the system into transient overload."""
    t1 = TaskSpec(id=1, wcet=1, rel_deadline=4, period=4,
                  exec_model=Scripted((2, 2, 2), fallback=Deterministic(1)))
    t2 = TaskSpec(id=2, wcet=2, rel_deadline=5, period=5)
    t3 = TaskSpec(id=3, wcet=2, rel_deadline=6, period=6)
    return [t1, t2, t3]


def make_overload_reservations():
    return {
        1: ReservationSpec(budget=1, period=4),
        2: ReservationSpec(budget=2, period=5),
        3: ReservationSpec(budget=2, period=6),
    }


@pytest.fixture
def overload_tasks():
    return make_overload_tasks()


@pytest.fixture
def overload_reservations():
    return make_overload_reservations()
