"""Tick-driven single-processor scheduling engine.

Supports plain EDF, fixed priorities, and constant-bandwidth reservations
(soft deadline-postponing and hard suspending variants) layered on EDF, with
optional bandwidth reclaiming.  The processor is re-dispatched at every tick
boundary; all quantities are integers except reclaimed budgets, which use
exact rationals.

Tie-breaking is documented and total: EDF orders ready jobs by
(absolute deadline, arrival tick, task id); reservation scheduling orders
servers by (server deadline, task id); fixed priority orders by
(priority value, task id) with smaller values running first.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

from .errors import ConfigError
from .taskmodel import JobRecord, ReservationSpec, TaskSpec

EVENT_KINDS = (
    "arrival",
    "job_start",
    "preemption",
    "completion",
    "deadline_miss",
    "budget_exhausted",
    "deadline_postponed",
    "server_recharge",
    "job_aborted",
    "job_skipped",
)

# Within one tick, everything that ends or accounts for the previous tick's
# execution sorts before the job_start of the next dispatch, so a stop and a
# restart of the same task in one tick read in causal order.
_SORT_RANK = {
    "arrival": 0,
    "preemption": 1,
    "completion": 2,
    "deadline_miss": 3,
    "budget_exhausted": 4,
    "deadline_postponed": 5,
    "server_recharge": 6,
    "job_aborted": 7,
    "job_skipped": 8,
    "job_start": 9,
}

# kinds that terminate an execution segment of the running job
STOP_KINDS = ("preemption", "completion", "job_aborted", "budget_exhausted")


@dataclass(frozen=True)
class Event:
    tick: int
    kind: str
    task: int
    payload: dict

    def sort_key(self):
        return (self.tick, _SORT_RANK[self.kind], self.task)


@dataclass
class Trace:
    """Ordered event log of one simulation run."""

    events: List[Event]
    horizon: int
    task_ids: List[int]

    def __iter__(self):
        return iter(self.events)

    def of_kind(self, kind: str, task: Optional[int] = None) -> List[Event]:
        return [e for e in self.events
                if e.kind == kind and (task is None or e.task == task)]

    def miss_count(self, task: Optional[int] = None) -> int:
        return len(self.of_kind("deadline_miss", task))

    def job_records(self) -> Dict[int, List[JobRecord]]:
        """Rebuild per-task job records from arrival/completion/outcome events."""
        records: Dict[int, Dict[int, JobRecord]] = {t: {} for t in self.task_ids}
        for e in self.events:
            jobs = records.setdefault(e.task, {})
            j = e.payload.get("job")
            if e.kind == "arrival":
                jobs[j] = JobRecord(e.task, j, e.tick, e.payload["deadline"],
                                    e.payload["demand"])
            elif e.kind == "completion":
                jobs[j].completion = e.tick
                jobs[j].outcome = "late" if e.payload["late"] else "met"
            elif e.kind == "job_aborted":
                jobs[j].outcome = "aborted"
            elif e.kind == "job_skipped":
                jobs[j].outcome = "skipped"
        return {t: [jobs[k] for k in sorted(jobs)] for t, jobs in records.items()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tick", "kind", "task", "payload"])
        for e in self.events:
            w.writerow([e.tick, e.kind, e.task,
                        json.dumps(e.payload, sort_keys=True, separators=(",", ":"))])
        return buf.getvalue()

    def to_jsonl(self) -> str:
        lines = []
        for e in self.events:
            lines.append(json.dumps(
                {"tick": e.tick, "kind": e.kind, "task": e.task, "payload": e.payload},
                sort_keys=True, separators=(",", ":")))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, horizon: Optional[int] = None) -> "Trace":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["tick", "kind", "task", "payload"]:
            raise ConfigError("trace: expected header tick,kind,task,payload")
        events = [Event(int(r[0]), r[1], int(r[2]), json.loads(r[3])) for r in rows[1:]]
        return cls._from_events(events, horizon)

    @classmethod
    def from_jsonl(cls, text: str, horizon: Optional[int] = None) -> "Trace":
        events = []
        for line in text.splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            events.append(Event(d["tick"], d["kind"], d["task"], d["payload"]))
        return cls._from_events(events, horizon)

    @classmethod
    def _from_events(cls, events, horizon):
        if horizon is None:
            horizon = max((e.tick for e in events), default=0)
        return cls(events, horizon, sorted({e.task for e in events}))


# ---------------------------------------------------------------------------
# reservation state machine


@dataclass(frozen=True)
class ServerState:
    task_id: int
    remaining_budget: object  # int, or Fraction under reclaiming
    current_deadline: int
    status: str = "idle"  # idle | active | suspended
    suspended_until: Optional[int] = None


def cbs_on_arrival(server: ServerState, now: int, spec: ReservationSpec) -> ServerState:
    """Admission test when a job reaches an idle server.

    The pair (budget, deadline) is kept only if serving the leftover budget by
    the current deadline stays within the reserved bandwidth, i.e. if
    q * P < (d - now) * Q evaluated exactly; otherwise the server is reset to
    a full budget with deadline now + P.  A stale deadline (d <= now) always
    fails the test and resets.
    """
    q, d = server.remaining_budget, server.current_deadline
    if q * spec.period >= (d - now) * spec.budget:
        return replace(server, remaining_budget=spec.budget,
                       current_deadline=now + spec.period, status="active")
    return replace(server, status="active")


def cbs_on_exhaustion(server: ServerState, now: int, spec: ReservationSpec) -> ServerState:
    """Budget ran out with work still pending.

    Soft servers immediately recharge and postpone the deadline by one server
    period, staying ready (at lower EDF priority).  Hard servers suspend until
    the current deadline; the recharge happens at wake-up via cbs_wake.
    """
    if spec.variant == "soft_postpone":
        return replace(server, remaining_budget=spec.budget,
                       current_deadline=server.current_deadline + spec.period,
                       status="active")
    return replace(server, status="suspended",
                   suspended_until=server.current_deadline)


def cbs_wake(server: ServerState, spec: ReservationSpec) -> ServerState:
    """End of a hard suspension: full budget, deadline moved one period on."""
    return replace(server, remaining_budget=spec.budget,
                   current_deadline=server.current_deadline + spec.period,
                   status="active", suspended_until=None)


def grub_tick(active: Sequence[ReservationSpec], executing: ReservationSpec) -> Fraction:
    """Budget drain for one executing tick under bandwidth reclaiming.

    The executing server pays only the total bandwidth of currently active
    servers (a server is active while it has pending work), so spare
    bandwidth stretches the budget.  Without reclaiming the drain is 1.
    """
    if executing.reclaiming != "grub":
        return Fraction(1)
    u_act = sum((s.bandwidth for s in active), Fraction(0))
    return min(u_act, Fraction(1)) if u_act > 0 else Fraction(1)


# ---------------------------------------------------------------------------
# simulation


@dataclass(frozen=True)
class SchedulerConfig:
    kind: str  # edf | fixed_priority | cbs_edf
    horizon: int
    priorities: Optional[Dict[int, int]] = None  # fixed_priority: lower runs first
    reservations: Optional[Dict[int, ReservationSpec]] = None  # cbs_edf: per task id
    miss_detection: str = "deadline"  # deadline | completion
    collect: Optional[frozenset] = None  # record only these kinds when set

    def __post_init__(self):
        if self.kind not in ("edf", "fixed_priority", "cbs_edf"):
            raise ConfigError("scheduler.kind: must be edf, fixed_priority or cbs_edf")
        if not isinstance(self.horizon, int) or self.horizon < 1:
            raise ConfigError("scheduler.horizon: must be a positive integer")
        if self.kind == "fixed_priority" and not self.priorities:
            raise ConfigError("scheduler.priorities: required for fixed_priority")
        if self.kind == "cbs_edf" and not self.reservations:
            raise ConfigError("scheduler.reservations: required for cbs_edf")
        if self.miss_detection not in ("deadline", "completion"):
            raise ConfigError("scheduler.miss_detection: must be deadline or completion")


class _Job:
    __slots__ = ("task", "index", "arrival", "deadline", "demand", "executed",
                 "completion", "outcome", "miss_logged")

    def __init__(self, task_id, index, arrival, deadline, demand):
        self.task = task_id
        self.index = index
        self.arrival = arrival
        self.deadline = deadline
        self.demand = demand
        self.executed = 0
        self.completion = None
        self.outcome = None
        self.miss_logged = False

    @property
    def open(self):
        return self.completion is None and self.outcome is None


def simulate(tasks: Sequence[TaskSpec], scheduler: SchedulerConfig, seed=0) -> Trace:
    """Run the task set to the horizon and return the sorted event trace.

    Deterministic: the same (tasks, scheduler, seed) triple always yields a
    byte-identical trace.  Per-job demand and arrival-gap draws are keyed by
    (seed, task id, job index), so one task's stochastic model never perturbs
    another task's samples.
    """
    ids = [t.id for t in tasks]
    if len(set(ids)) != len(ids):
        raise ConfigError("tasks: duplicate task id")
    tasks = sorted(tasks, key=lambda t: t.id)
    if scheduler.kind == "fixed_priority":
        missing = [t.id for t in tasks if t.id not in scheduler.priorities]
        if missing:
            raise ConfigError("scheduler.priorities: missing task id %s" % missing[0])
    if scheduler.kind == "cbs_edf":
        missing = [t.id for t in tasks if t.id not in scheduler.reservations]
        if missing:
            raise ConfigError("scheduler.reservations: missing task id %s" % missing[0])

    horizon = scheduler.horizon
    events: List[Event] = []
    collect = scheduler.collect

    def emit(tick, kind, task, payload):
        if collect is None or kind in collect:
            events.append(Event(tick, kind, task, payload))

    # precomputed arrivals and demands, keyed independently per (task, job)
    schedule = {}
    for t in tasks:
        arr = t.arrivals(horizon, seed)
        schedule[t.id] = [(a, j, t.demand(j, seed)) for j, a in enumerate(arr)]

    by_id = {t.id: t for t in tasks}
    queues: Dict[int, List[_Job]] = {t.id: [] for t in tasks}
    open_jobs: Dict[int, List[_Job]] = {t.id: [] for t in tasks}
    next_arrival = {t.id: 0 for t in tasks}

    servers: Dict[int, ServerState] = {}
    if scheduler.kind == "cbs_edf":
        for t in tasks:
            servers[t.id] = ServerState(t.id, 0, 0, "idle")

    last_runner: Optional[_Job] = None
    stopped_now: set = set()

    def resolve_completion(job, t):
        job.completion = t
        late = t > job.deadline
        job.outcome = "late" if late else "met"
        if late and scheduler.miss_detection == "completion":
            emit(t, "deadline_miss", job.task, {"job": job.index})
        emit(t, "completion", job.task, {"job": job.index, "late": late})
        stopped_now.add(id(job))
        q = queues[job.task]
        q.remove(job)
        if late and by_id[job.task].miss_policy == "skip_late":
            for stale in [x for x in q if x.arrival < t]:
                stale.outcome = "skipped"
                emit(t, "job_skipped", job.task, {"job": stale.index})
                q.remove(stale)

    for t in range(horizon + 1):
        stopped_now = set()

        # 1. completion of work executed in [t-1, t)
        if last_runner is not None and last_runner.executed == last_runner.demand:
            resolve_completion(last_runner, t)
            last_runner = None

        # 2. hard-server wake-ups due now
        for tid in sorted(servers):
            s = servers[tid]
            if s.status == "suspended" and s.suspended_until <= t:
                s = cbs_wake(s, scheduler.reservations[tid])
                if not queues[tid]:
                    s = replace(s, status="idle")
                servers[tid] = s
                emit(t, "server_recharge", tid, {"budget": scheduler.reservations[tid].budget})
                emit(t, "deadline_postponed", tid, {"deadline": s.current_deadline})

        # 3. deadline checks and miss policies
        for tid in sorted(open_jobs):
            for job in list(open_jobs[tid]):
                if not job.open:
                    open_jobs[tid].remove(job)
                    continue
                if job.deadline != t or job.miss_logged:
                    continue
                job.miss_logged = True
                if scheduler.miss_detection == "deadline":
                    emit(t, "deadline_miss", tid, {"job": job.index})
                    if by_id[tid].miss_policy == "abort":
                        job.outcome = "aborted"
                        emit(t, "job_aborted", tid,
                             {"job": job.index, "remaining": job.demand - job.executed})
                        stopped_now.add(id(job))
                        if job in queues[tid]:
                            queues[tid].remove(job)

        if t == horizon:
            break

        # a server whose queue drained this tick goes idle, keeping (q, d)
        # for the admission test of any arrival later in the same tick
        if scheduler.kind == "cbs_edf":
            for tid in sorted(servers):
                if servers[tid].status == "active" and not queues[tid]:
                    servers[tid] = replace(servers[tid], status="idle")

        # 4. arrivals at t
        for task in tasks:
            sched = schedule[task.id]
            i = next_arrival[task.id]
            while i < len(sched) and sched[i][0] == t:
                a, j, demand = sched[i]
                job = _Job(task.id, j, a, a + task.rel_deadline, demand)
                emit(t, "arrival", task.id,
                     {"job": j, "deadline": job.deadline, "demand": demand})
                was_empty = not queues[task.id]
                queues[task.id].append(job)
                open_jobs[task.id].append(job)
                i += 1
                if scheduler.kind == "cbs_edf" and was_empty:
                    s = servers[task.id]
                    if s.status == "idle":
                        spec = scheduler.reservations[task.id]
                        new = cbs_on_arrival(s, t, spec)
                        if (new.remaining_budget, new.current_deadline) != \
                                (s.remaining_budget, s.current_deadline):
                            emit(t, "server_recharge", task.id,
                                 {"budget": spec.budget, "deadline": new.current_deadline})
                        servers[task.id] = new
            next_arrival[task.id] = i

        # 5. budget exhaustion sweep: pending work but no budget left
        if scheduler.kind == "cbs_edf":
            for tid in sorted(servers):
                s = servers[tid]
                if s.status != "active" or not queues[tid] or s.remaining_budget > 0:
                    continue
                spec = scheduler.reservations[tid]
                emit(t, "budget_exhausted", tid, {"job": queues[tid][0].index})
                stopped_now.add(id(queues[tid][0]))
                s = cbs_on_exhaustion(s, t, spec)
                if s.status == "suspended" and s.suspended_until <= t:
                    s = cbs_wake(s, spec)
                servers[tid] = s
                if s.status != "suspended":
                    emit(t, "server_recharge", tid, {"budget": spec.budget})
                    emit(t, "deadline_postponed", tid, {"deadline": s.current_deadline})

        # 6. dispatch for [t, t+1)
        ready = []
        if scheduler.kind == "cbs_edf":
            for tid in sorted(queues):
                if queues[tid] and servers[tid].status == "active":
                    ready.append(((servers[tid].current_deadline, tid), queues[tid][0]))
        elif scheduler.kind == "edf":
            for tid in sorted(queues):
                if queues[tid]:
                    head = queues[tid][0]
                    ready.append(((head.deadline, head.arrival, tid), head))
        else:
            for tid in sorted(queues):
                if queues[tid]:
                    ready.append(((scheduler.priorities[tid], tid), queues[tid][0]))

        pick = min(ready, key=lambda kv: kv[0])[1] if ready else None

        if last_runner is not None and last_runner is not pick and \
                last_runner.open and id(last_runner) not in stopped_now:
            emit(t, "preemption", last_runner.task, {"job": last_runner.index})
            stopped_now.add(id(last_runner))

        if pick is not None:
            if pick is not last_runner or id(pick) in stopped_now:
                emit(t, "job_start", pick.task,
                     {"job": pick.index, "resumed": pick.executed > 0})
            pick.executed += 1
            if scheduler.kind == "cbs_edf":
                spec = scheduler.reservations[pick.task]
                active = [scheduler.reservations[tid] for tid in sorted(queues)
                          if queues[tid]]
                drain = grub_tick(active, spec)
                s = servers[pick.task]
                servers[pick.task] = replace(
                    s, remaining_budget=s.remaining_budget - drain)
        last_runner = pick

    events.sort(key=Event.sort_key)
    return Trace(events, horizon, [t.id for t in tasks])
