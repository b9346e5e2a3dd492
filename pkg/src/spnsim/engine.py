"""Event-driven simulation of a stochastic processing network.

The engine tracks, per buffer, FIFO queues keyed by the per-job routing
counter, and per activity the job in service with its remaining requirement.
Time advances from event to event (external arrivals, service completions,
slot boundaries); in-service requirements deplete continuously and are
evaluated lazily from the scheduled completion time, so no fixed-step
integration is involved.

With a positive route pre-draw depth the engine runs the enlarged process in
which every entering job fixes its first `depth` buffers in advance; the
projection of that process is distributed exactly like the plain one, and
the extra information makes counted workloads and job weights measurable.

Everything is deterministic given the seed: randomness flows through four
named substreams (arrivals, services, routing, policy coin), derived from
the seed by a stable hash of the purpose label.
"""

from __future__ import annotations

import zlib
from collections import deque
from dataclasses import dataclass, field, replace
from heapq import heappop, heappush

import numpy as np

from . import scheduling
from .diagnostics import (
    inservice_continuation,
    job_type,
    scan_counted_counts,
    waiting_weight,
)
from .network import ValidatedNetwork
from .scheduling import EpsLrfs, Lrfs, Policy, StaticPriority

LEDGER_TOL = 1e-7


class HorizonNonPositive(ValueError):
    pass


class IncompatibleSynchronizedPolicyShape(ValueError):
    """Synchronized network simulated with non-slot-shaped ingredients."""


def substream(seed: int, label: str) -> np.random.Generator:
    """Named RNG substream: stream id is a stable hash of the purpose label."""
    sid = zlib.crc32(label.encode("ascii"))
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(sid,)))


@dataclass(frozen=True)
class SimOptions:
    horizon: float
    sample_interval: float = 0.0   # 0 -> horizon / 1000
    seed: int = 0
    predraw_depth: int = 0         # 0 -> plain process, routes drawn on the fly
    counter_cap: int = 0           # per-counter queue detail up to this counter
    replications: int = 1
    audit: bool = False
    random_ties: bool = False
    initial_backlog: tuple[tuple[int, int, int], ...] = ()  # (buffer, counter, count)

    def resolved_interval(self) -> float:
        return self.sample_interval if self.sample_interval > 0 else self.horizon / 1000.0


class Job:
    """One job: identity, routing counter, and its pre-drawn route remainder."""

    __slots__ = ("jid", "counter", "buffer", "future", "path_exits", "arrived", "seq")

    def __init__(self, jid, counter, buffer, future, path_exits, arrived):
        self.jid = jid
        self.counter = counter
        self.buffer = buffer
        self.future = future          # remaining pre-drawn hops after `buffer`
        self.path_exits = path_exits  # job leaves the network after its last hop
        self.arrived = arrived
        self.seq = 0                  # FIFO stamp, refreshed on every enqueue


class BufferQueue:
    """Waiting jobs of one buffer, FIFO within each counter class."""

    __slots__ = ("lanes", "size")

    def __init__(self):
        self.lanes: dict[int, deque] = {}
        self.size = 0

    def push(self, job: Job) -> None:
        lane = self.lanes.get(job.counter)
        if lane is None:
            lane = self.lanes[job.counter] = deque()
        lane.append(job)
        self.size += 1

    def min_counter(self) -> int:
        return min(self.lanes)

    def max_counter(self) -> int:
        return max(self.lanes)

    def pop_counter(self, counter: int) -> Job:
        lane = self.lanes[counter]
        job = lane.popleft()
        if not lane:
            del self.lanes[counter]
        self.size -= 1
        return job

    def pop_fifo(self) -> Job:
        counter = min(self.lanes, key=lambda c: self.lanes[c][0].seq)
        return self.pop_counter(counter)

    def iter_jobs(self):
        for lane in self.lanes.values():
            yield from lane

    def lane_sizes(self) -> dict[int, int]:
        return {c: len(lane) for c, lane in self.lanes.items()}


class BusyRecord:
    __slots__ = ("job", "requirement", "start", "finish", "continuation")

    def __init__(self, job, requirement, start, finish, continuation):
        self.job = job
        self.requirement = requirement
        self.start = start
        self.finish = finish
        self.continuation = continuation  # expected work beyond the drawn requirement


@dataclass
class AuditReport:
    """Violation counters and the routing-increment samples of a run."""

    feasibility: int = 0
    nonpreemption: int = 0
    counter_monotonic: int = 0
    workload_identity: int = 0
    norm_ledger: int = 0
    slot_alignment: int = 0
    tracker_mismatch: int = 0
    routing_increments: list = field(default_factory=list)
    events_checked: int = 0

    def total_violations(self) -> int:
        return (self.feasibility + self.nonpreemption + self.counter_monotonic
                + self.workload_identity + self.norm_ledger + self.slot_alignment
                + self.tracker_mismatch)

    def routing_martingale(self) -> tuple[float, float, bool]:
        """(mean, stderr, within three standard errors of zero)."""
        inc = self.routing_increments
        if not inc:
            return 0.0, 0.0, True
        arr = np.asarray(inc)
        mean = float(arr.mean())
        if len(arr) < 2 or float(arr.std(ddof=1)) == 0.0:
            return mean, 0.0, abs(mean) <= 1e-9
        stderr = float(arr.std(ddof=1)) / len(arr) ** 0.5
        return mean, stderr, abs(mean) <= 3.0 * stderr


class CountedTracker:
    """Incremental counted queues and high-counter weights for fast sampling.

    qle[c][i] counts waiting jobs with counter <= c in buffer i; qhat[c][i]
    additionally counts jobs elsewhere whose pre-drawn route passes through
    buffer i at a position <= c.  m1m2 aggregates the expected-future-work
    weights of all jobs that are past their pre-drawn route or on a
    full-depth route.
    """

    __slots__ = ("depth", "qle", "qhat", "m1m2_wait", "m1m2_busy")

    def __init__(self, depth: int, num_buffers: int):
        self.depth = depth
        self.qle = [[0] * num_buffers for _ in range(depth + 1)]
        self.qhat = [[0] * num_buffers for _ in range(depth + 1)]
        self.m1m2_wait = 0.0
        self.m1m2_busy = 0.0

    def _apply(self, job: Job, net: ValidatedNetwork, sign: int) -> None:
        depth = self.depth
        cc = job.counter
        if cc <= depth:
            for c in range(cc, depth + 1):
                self.qle[c][job.buffer] += sign
                self.qhat[c][job.buffer] += sign
            r = cc
            for f in job.future:
                r += 1
                if r > depth:
                    break
                for c in range(r, depth + 1):
                    self.qhat[c][f] += sign
        if job_type(job, depth) != 3:
            self.m1m2_wait += sign * waiting_weight(job, net, depth)

    def add_waiting(self, job, net):
        self._apply(job, net, +1)

    def remove_waiting(self, job, net):
        self._apply(job, net, -1)


class SimState:
    """Mutable simulation state; single-threaded per run."""

    def __init__(self, net: ValidatedNetwork, opts: SimOptions, tracker):
        self.net = net
        self.opts = opts
        self.clock = 0.0
        self.queues = [BufferQueue() for _ in range(net.num_buffers)]
        self.busy: list[BusyRecord | None] = [None] * net.num_activities
        self.proc_owner: list[int | None] = [None] * net.num_processors
        self.timer_set = [-np.inf] * net.num_components
        self.events: list = []
        self.waiting_total = 0
        self.visits = [0] * net.num_buffers   # enqueues per buffer, incl. routed
        self.events_processed = 0
        self.random_ties = opts.random_ties
        self.tracker: CountedTracker | None = tracker
        self._seq = 0
        self._jid = 0
        seed = opts.seed
        self.rng_arrivals = substream(seed, "arrivals")
        self.rng_services = substream(seed, "services")
        self.rng_routing = substream(seed, "routing")
        self.rng_policy = substream(seed, "policy")
        # audit bookkeeping
        self.audit: AuditReport | None = AuditReport() if opts.audit else None
        self._ledger = 0.0
        self._ledger_time = 0.0
        self._busy_rate = 0.0
        # routing rows as (targets, cumulative probabilities, total mass)
        self._rows = []
        for i in range(net.num_buffers):
            targets = np.nonzero(net.routing[i] > 0)[0]
            probs = net.routing[i][targets]
            self._rows.append((targets.tolist(), np.cumsum(probs).tolist(),
                               float(probs.sum())))

    # -- identifiers ------------------------------------------------------

    def next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def new_jid(self) -> int:
        self._jid += 1
        return self._jid

    # -- timers -----------------------------------------------------------

    def timer_value(self, comp: int) -> float:
        value = 1.0 - (self.clock - self.timer_set[comp])
        return value if value > 1e-12 else 0.0

    def set_timer(self, comp: int) -> None:
        self.timer_set[comp] = self.clock

    # -- queue/service transitions ---------------------------------------

    def enqueue(self, job: Job) -> None:
        job.seq = self.next_seq()
        self.queues[job.buffer].push(job)
        self.waiting_total += 1
        self.visits[job.buffer] += 1
        if self.tracker is not None:
            self.tracker.add_waiting(job, self.net)
        if self.audit is not None:
            self._ledger += 1.0

    def take_job(self, buffer: int, counter: int) -> Job:
        job = self.queues[buffer].pop_counter(counter)
        self._on_take(job)
        return job

    def take_fifo(self, buffer: int) -> Job:
        job = self.queues[buffer].pop_fifo()
        self._on_take(job)
        return job

    def _on_take(self, job: Job) -> None:
        self.waiting_total -= 1
        if self.tracker is not None:
            self.tracker.remove_waiting(job, self.net)
        if self.audit is not None:
            self._ledger -= 1.0

    def start_service(self, j: int, job: Job) -> None:
        act = self.net.activities[j]
        if self.busy[j] is not None:
            if self.audit is not None:
                self.audit.nonpreemption += 1
            raise AssertionError(f"activity {j} already busy")
        requirement = self.net.services[act.buffer].sample(self.rng_services)
        finish = self.clock + requirement / act.rate
        continuation = 0.0
        if self.tracker is not None and job_type(job, self.tracker.depth) != 3:
            continuation = inservice_continuation(job, self.net, self.tracker.depth)
            self.tracker.m1m2_busy += continuation
        rec = BusyRecord(job, requirement, self.clock, finish, continuation)
        self.busy[j] = rec
        for k in act.processors:
            self.proc_owner[k] = j
        heappush(self.events, (finish, 0, self.next_seq(), j))
        if self.audit is not None:
            self._busy_rate += act.rate
            # realized requirement: completion times quantize at the clock's
            # float resolution, and the ledger must follow what depletes
            self._ledger += (finish - self.clock) * act.rate

    def complete(self, j: int) -> Job:
        rec = self.busy[j]
        act = self.net.activities[j]
        self.busy[j] = None
        for k in act.processors:
            self.proc_owner[k] = None
        if self.tracker is not None:
            self.tracker.m1m2_busy -= rec.continuation
        if self.audit is not None:
            self._busy_rate -= act.rate
        return rec.job

    def sample_next_hop(self, buffer: int) -> int | None:
        targets, cum, total = self._rows[buffer]
        if total == 0.0:
            return None
        u = self.rng_routing.random()
        if u >= total:
            return None
        for t, c in zip(targets, cum):
            if u < c:
                return t
        return targets[-1]

    def predraw(self, start_buffer: int, hops: int) -> tuple[tuple[int, ...], bool]:
        """Draw up to `hops` route steps ahead; True when the route exits early."""
        future = []
        cur = start_buffer
        for _ in range(hops):
            nxt = self.sample_next_hop(cur)
            if nxt is None:
                return tuple(future), True
            future.append(nxt)
            cur = nxt
        return tuple(future), False

    # -- time-dependent views ----------------------------------------------

    def advance_clock(self, t: float) -> None:
        if self.audit is not None:
            self._ledger -= self._busy_rate * (t - self._ledger_time)
            self._ledger_time = t
        self.clock = t

    def remaining(self, j: int, at: float) -> float:
        rec = self.busy[j]
        return self.net.activities[j].rate * (rec.finish - at)

    def norm(self, at: float | None = None) -> float:
        """Waiting jobs plus total in-service remaining requirement."""
        t = self.clock if at is None else at
        total = float(self.waiting_total)
        for j, rec in enumerate(self.busy):
            if rec is not None:
                total += self.net.activities[j].rate * (rec.finish - t)
        return total

    def service_vector(self, at: float | None = None) -> list[float]:
        """Remaining in-service requirement summed per buffer."""
        t = self.clock if at is None else at
        out = [0.0] * self.net.num_buffers
        for j, rec in enumerate(self.busy):
            if rec is not None:
                out[rec.job.buffer] += self.net.activities[j].rate * (rec.finish - t)
        return out

    def iter_waiting(self):
        for q in self.queues:
            yield from q.iter_jobs()

    def busy_records(self):
        for j, rec in enumerate(self.busy):
            if rec is not None:
                yield j, rec


@dataclass
class Trajectory:
    """Sampled run: rows at strictly increasing times plus a summary."""

    times: np.ndarray
    norms: np.ndarray
    queue_lengths: np.ndarray           # (n, I)
    in_service: np.ndarray              # (n, I)
    lglo: np.ndarray | None
    counter_detail: np.ndarray | None   # (n, I, counter_cap)
    seed: int
    horizon: float
    events_processed: int
    audit: AuditReport | None = None
    visit_counts: tuple[int, ...] = ()  # enqueues per buffer over the run

    @property
    def time_avg_norm(self) -> float:
        return float(self.norms.mean())


class _Sampler:
    def __init__(self, state: SimState, interval: float, evaluator, counter_cap: int):
        self.state = state
        self.interval = interval
        self.evaluator = evaluator
        self.counter_cap = counter_cap
        self._k = 0   # next sample is at _k * interval, kept exact
        self.times: list[float] = []
        self.norms: list[float] = []
        self.queues: list[list[int]] = []
        self.service: list[list[float]] = []
        self.lglo: list[float] = []
        self.detail: list[list[list[int]]] = []

    @property
    def next_time(self) -> float:
        return self._k * self.interval

    def _emit(self, t: float) -> None:
        st = self.state
        self.times.append(t)
        self.norms.append(st.norm(at=t))
        self.queues.append([q.size for q in st.queues])
        self.service.append(st.service_vector(at=t))
        if self.evaluator is not None:
            self.lglo.append(self.evaluator(st, t))
        if self.counter_cap > 0:
            rows = []
            for q in st.queues:
                counts = [0] * self.counter_cap
                for c, n in q.lane_sizes().items():
                    if c <= self.counter_cap:
                        counts[c - 1] = n
                rows.append(counts)
            self.detail.append(rows)
        self._k += 1

    def flush_before(self, t: float) -> None:
        while self.next_time < t - 1e-12:
            self._emit(self.next_time)

    def emit_if_due(self, t: float) -> None:
        if abs(self.next_time - t) <= 1e-12:
            self._emit(t)

    def flush_through(self, horizon: float) -> None:
        while self.next_time <= horizon + 1e-12:
            self._emit(self.next_time)


def _audit_instant(state: SimState) -> None:
    audit = state.audit
    net = state.net
    audit.events_checked += 1
    # schedule feasibility: every processor owned by at most one busy activity,
    # and owners agree with the busy table
    owner = state.proc_owner
    feasible = True
    for j, rec in enumerate(state.busy):
        if rec is not None:
            for k in net.activities[j].processors:
                if owner[k] != j:
                    feasible = False
    for k, j in enumerate(owner):
        if j is not None and state.busy[j] is None:
            feasible = False
    if not feasible:
        audit.feasibility += 1
    # two accumulations of the queue sizes and the workload identity
    total = 0
    consistent = True
    for q in state.queues:
        n = 0
        for lane in q.lanes.values():
            n += len(lane)
        if n != q.size:
            consistent = False
        total += n
    if not consistent or total != state.waiting_total:
        audit.workload_identity += 1
    # norm ledger vs direct recomputation
    direct = state.norm()
    if abs(state._ledger - direct) > LEDGER_TOL * (1.0 + abs(direct)):
        audit.norm_ledger += 1
    if net.synchronized and state.clock != int(state.clock):
        audit.slot_alignment += 1


def simulate(
    net: ValidatedNetwork,
    policy: Policy,
    opts: SimOptions,
    evaluator=None,
) -> Trajectory:
    """Run one replication and return its sampled trajectory.

    `evaluator`, when given, is called as evaluator(state, t) at every sample
    instant and its value recorded in the trajectory (used for the global
    Lyapunov column).
    """
    if opts.horizon <= 0:
        raise HorizonNonPositive("horizon must be positive")
    if net.synchronized:
        bad_arrival = any(a.kind == "poisson" for a in net.arrivals)
        bad_service = any(s.kind != "deterministic" or s.mean != 1.0 for s in net.services)
        bad_rate = any(a.rate != 1.0 for a in net.activities)
        if bad_arrival or bad_service or bad_rate:
            raise IncompatibleSynchronizedPolicyShape(
                "synchronized run needs unit deterministic services, unit rates, "
                "and slotted arrivals")

    depth = opts.predraw_depth
    tracker = None
    if depth > 0:
        tracker = CountedTracker(depth, net.num_buffers)
    state = SimState(net, opts, tracker)

    if isinstance(policy, Lrfs):
        def run_pass(comp):
            scheduling.lrfs_pass(state, comp, net)
    elif isinstance(policy, EpsLrfs):
        eps = policy.epsilon

        def run_pass(comp):
            scheduling.eps_lrfs_pass(state, comp, net, eps)
    elif isinstance(policy, StaticPriority):
        rank = scheduling.priority_rank(policy, net.num_buffers)

        def run_pass(comp):
            scheduling.static_priority_pass(state, comp, net, rank)
    else:
        raise TypeError(f"unknown policy {policy!r}")

    # initial backlog, counters >= 1; routes pre-drawn in deterministic order
    affected0 = set()
    for buffer, counter, count in opts.initial_backlog:
        if counter < 1:
            raise ValueError("backlog counters start at 1")
        for _ in range(count):
            if depth > 0 and counter <= depth:
                future, exits = state.predraw(buffer, depth - counter)
            else:
                future, exits = (), False
            job = Job(state.new_jid(), counter, buffer, future, exits, 0.0)
            state.enqueue(job)
            affected0.add(net.component_of[buffer])

    # arrival bootstrap
    for i, arr in enumerate(net.arrivals):
        if arr.kind == "poisson" and arr.rate > 0:
            gap = state.rng_arrivals.exponential(1.0 / arr.rate)
            heappush(state.events, (gap, 1, state.next_seq(), ("p", i)))
    slotted = [i for i, a in enumerate(net.arrivals) if a.kind == "slotted" and a.rate > 0]
    if slotted:
        heappush(state.events, (0.0, 1, state.next_seq(), ("slot", None)))

    for comp in sorted(affected0):
        run_pass(comp)
    if state.audit is not None and affected0:
        _audit_instant(state)

    sampler = _Sampler(state, opts.resolved_interval(), evaluator, opts.counter_cap)
    horizon = opts.horizon
    events = state.events

    def arrive(buffer: int) -> None:
        if depth > 0:
            future, exits = state.predraw(buffer, depth - 1)
        else:
            future, exits = (), False
        job = Job(state.new_jid(), 1, buffer, future, exits, state.clock)
        state.enqueue(job)

    while events and events[0][0] <= horizon:
        t = events[0][0]
        sampler.flush_before(t)
        state.advance_clock(t)
        affected = set()
        while events and events[0][0] == t:
            _, kind, _, data = heappop(events)
            state.events_processed += 1
            if kind == 0:  # completion
                j = data
                job = state.complete(j)
                affected.add(net.component_of[job.buffer])
                old_counter = job.counter
                if job.future:
                    nxt = job.future[0]
                    job.future = job.future[1:]
                elif job.path_exits:
                    nxt = None
                else:
                    nxt = state.sample_next_hop(job.buffer)
                    if state.audit is not None:
                        before = net.onward_work[job.buffer]
                        after = net.visit_work[nxt] if nxt is not None else 0.0
                        state.audit.routing_increments.append(after - before)
                if nxt is not None:
                    job.counter += 1
                    job.buffer = nxt
                    if state.audit is not None and job.counter != old_counter + 1:
                        state.audit.counter_monotonic += 1
                    state.enqueue(job)
                    affected.add(net.component_of[nxt])
            elif data[0] == "p":  # Poisson arrival
                i = data[1]
                arrive(i)
                affected.add(net.component_of[i])
                gap = state.rng_arrivals.exponential(1.0 / net.arrivals[i].rate)
                heappush(events, (t + gap, 1, state.next_seq(), ("p", i)))
            else:  # slot boundary: batch arrivals for every slotted buffer
                for i in slotted:
                    rate = net.arrivals[i].rate
                    n = int(rate)
                    frac = rate - n
                    if frac > 0 and state.rng_arrivals.random() < frac:
                        n += 1
                    for _ in range(n):
                        arrive(i)
                    if n:
                        affected.add(net.component_of[i])
                if t + 1.0 < horizon:
                    heappush(events, (t + 1.0, 1, state.next_seq(), ("slot", None)))
        for comp in sorted(affected):
            run_pass(comp)
        if state.audit is not None:
            _audit_instant(state)
        sampler.emit_if_due(t)
    sampler.flush_through(horizon)

    if state.audit is not None and tracker is not None:
        _check_tracker(state)

    lglo = np.asarray(sampler.lglo) if evaluator is not None else None
    detail = np.asarray(sampler.detail) if opts.counter_cap > 0 else None
    return Trajectory(
        times=np.asarray(sampler.times),
        norms=np.asarray(sampler.norms),
        queue_lengths=np.asarray(sampler.queues, dtype=np.int64),
        in_service=np.asarray(sampler.service),
        lglo=lglo,
        counter_detail=detail,
        seed=opts.seed,
        horizon=horizon,
        events_processed=state.events_processed,
        audit=state.audit,
        visit_counts=tuple(state.visits),
    )


def _check_tracker(state: SimState) -> None:
    """Recompute the incremental counted aggregates by full scan."""
    tracker = state.tracker
    net = state.net
    depth = tracker.depth
    qle, qhat = scan_counted_counts(state.iter_waiting(), depth, net.num_buffers)
    m_wait = sum(
        waiting_weight(job, net, depth)
        for job in state.iter_waiting() if job_type(job, depth) != 3
    )
    ok = qle == tracker.qle and qhat == tracker.qhat
    ok = ok and abs(m_wait - tracker.m1m2_wait) <= 1e-6 * (1.0 + abs(m_wait))
    if not ok:
        state.audit.tracker_mismatch += 1


def run_replications(
    net: ValidatedNetwork,
    policy: Policy,
    opts: SimOptions,
    evaluator=None,
) -> list[Trajectory]:
    """Independent replications with seeds seed, seed+1, ...; deterministic."""
    if opts.replications < 1:
        raise ValueError("replication count must be >= 1")
    out = []
    for r in range(opts.replications):
        run_opts = replace(opts, seed=opts.seed + r, replications=1)
        out.append(simulate(net, policy, run_opts, evaluator=evaluator))
    return out


# ---------------------------------------------------------------------------
# artifact export


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def read_trajectory_csv(path, delimiter: str = ",") -> Trajectory:
    """Parse a trajectory written by write_trajectory_csv."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if "\t" in lines[0]:
        delimiter = "\t"
    header = lines[0].split(delimiter)
    has_lglo = header[-1] == "Lglo"
    I = (len(header) - 2 - (1 if has_lglo else 0)) // 2
    times, norms, queues, service, lglo = [], [], [], [], []
    for line in lines[1:]:
        parts = line.split(delimiter)
        times.append(float(parts[0]))
        norms.append(float(parts[1]))
        queues.append([int(x) for x in parts[2:2 + I]])
        service.append([float(x) for x in parts[2 + I:2 + 2 * I]])
        if has_lglo:
            lglo.append(float(parts[-1]))
    return Trajectory(
        times=np.asarray(times),
        norms=np.asarray(norms),
        queue_lengths=np.asarray(queues, dtype=np.int64),
        in_service=np.asarray(service),
        lglo=np.asarray(lglo) if has_lglo else None,
        counter_detail=None,
        seed=-1,
        horizon=float(times[-1]) if times else 0.0,
        events_processed=-1,
    )


def write_trajectory_csv(traj: Trajectory, path, delimiter: str = ",") -> None:
    """Rows `t,norm,Q_1..Q_I,V_1..V_I[,Lglo]`, floats at 17 significant digits."""
    I = traj.queue_lengths.shape[1]
    header = ["t", "norm"]
    header += [f"Q_{i + 1}" for i in range(I)]
    header += [f"V_{i + 1}" for i in range(I)]
    if traj.lglo is not None:
        header.append("Lglo")
    lines = [delimiter.join(header)]
    for r in range(len(traj.times)):
        row = [_fmt(traj.times[r]), _fmt(traj.norms[r])]
        row += [str(int(v)) for v in traj.queue_lengths[r]]
        row += [_fmt(v) for v in traj.in_service[r]]
        if traj.lglo is not None:
            row.append(_fmt(traj.lglo[r]))
        lines.append(delimiter.join(row))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
