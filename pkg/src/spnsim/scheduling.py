"""Maximal-schedule machinery and the scheduling policies.

A schedule is a binary vector over activities.  It is feasible when no
processor is claimed twice.  An activity is maximal in a schedule when one of
its processors is saturated; a schedule is maximal with respect to a buffer
vector w when every activity either serves a w-zero buffer or is maximal.
The policies below always leave the realized schedule maximal with respect
to the waiting-queue vector of the component they act on.

Tie-breaking is deterministic throughout (lowest buffer index, then lowest
activity index, then FIFO within a counter class) unless the simulation
options ask for seeded random tie-breaking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .engine import SimState
    from .network import ValidatedNetwork

ENUMERATION_CAP = 2 ** 24


class EnumerationTooLarge(ValueError):
    """2^J candidate schedules exceed the configured cap."""


# ---------------------------------------------------------------------------
# policies


@dataclass(frozen=True)
class Lrfs:
    """Serve jobs that have been routed the least, per component."""

    name = "lrfs"


@dataclass(frozen=True)
class EpsLrfs:
    """Least-routed-first, but at timer expiries serve a most-routed job
    with probability epsilon."""

    epsilon: float
    name = "eps-lrfs"

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")


@dataclass(frozen=True)
class StaticPriority:
    """Work-conserving fixed buffer priorities (highest first, 0-based ids).

    Buffers missing from the order rank below all listed ones, by index.
    """

    order: tuple[int, ...]
    name = "static-priority"


Policy = Lrfs | EpsLrfs | StaticPriority


# ---------------------------------------------------------------------------
# maximality predicates on explicit schedule vectors


def is_feasible(u: Sequence[int], net: ValidatedNetwork) -> bool:
    """Per-processor unit capacity: no processor claimed by two employed activities."""
    load = [0] * net.num_processors
    for j, uj in enumerate(u):
        if uj:
            for k in net.activities[j].processors:
                load[k] += 1
                if load[k] > 1:
                    return False
    return True


def is_maximal_activity(j: int, u: Sequence[int], net: ValidatedNetwork) -> bool:
    """True iff some processor of activity j is saturated under u."""
    for k in net.activities[j].processors:
        total = 0
        for ell, uell in enumerate(u):
            if uell and k in net.activities[ell].processors:
                total += uell
        if total == 1:
            return True
    return False


def is_maximal_wrt(u: Sequence[int], w: Sequence[float], net: ValidatedNetwork) -> bool:
    """True iff every activity serves a zero-w buffer or is maximal in u."""
    for j, act in enumerate(net.activities):
        if w[act.buffer] > 0 and not is_maximal_activity(j, u, net):
            return False
    return True


def support_pattern(w: Sequence[float]) -> tuple[int, ...]:
    return tuple(1 if x > 0 else 0 for x in w)


def _schedule_tables(net: ValidatedNetwork, cap: int):
    """All feasible schedules with per-activity maximality flags.

    Returns (schedules, maximal) as two boolean arrays of shape (U, J).
    """
    J = net.num_activities
    if 2 ** J > cap:
        raise EnumerationTooLarge(f"2^{J} schedules exceed cap {cap}")
    idx = np.arange(2 ** J, dtype=np.int64)
    u_all = ((idx[:, None] >> np.arange(J)) & 1).astype(np.int8)
    proc = np.zeros((J, net.num_processors), dtype=np.int8)
    for j, act in enumerate(net.activities):
        for k in act.processors:
            proc[j, k] = 1
    load = u_all @ proc                       # (U, K)
    feasible = (load <= 1).all(axis=1)
    u_all = u_all[feasible]
    load = load[feasible]
    saturated = load == 1                     # (U', K)
    maximal = np.zeros(u_all.shape, dtype=bool)
    for j, act in enumerate(net.activities):
        cols = sorted(act.processors)
        maximal[:, j] = saturated[:, cols].any(axis=1)
    return u_all, maximal


def enumerate_maximal(
    net: ValidatedNetwork,
    pattern: Sequence[float],
    cap: int = ENUMERATION_CAP,
) -> list[tuple[int, ...]]:
    """Every feasible schedule that is maximal with respect to the pattern.

    Exhaustive over 2^J candidates; intended for small activity counts.
    """
    u_all, maximal = _schedule_tables(net, cap)
    keep = np.ones(len(u_all), dtype=bool)
    for j, act in enumerate(net.activities):
        if pattern[act.buffer] > 0:
            keep &= maximal[:, j]
    return [tuple(int(x) for x in row) for row in u_all[keep]]


# ---------------------------------------------------------------------------
# policy passes driving a live simulation state
#
# The passes read queue sizes/counters and processor occupancy from the
# state and start services through it; they never stop an in-service
# activity (the network is non-preemptive).


def _startable(state: SimState, net: ValidatedNetwork, j: int) -> bool:
    """Activity j could start right now: nonempty buffer, all processors idle."""
    act = net.activities[j]
    if state.queues[act.buffer].size == 0:
        return False
    owner = state.proc_owner
    for k in act.processors:
        if owner[k] is not None:
            return False
    return True


def lrfs_pass(state: SimState, comp: int, net: ValidatedNetwork) -> None:
    """Repeatedly start the waiting job with the smallest counter until the
    component schedule is maximal with respect to its waiting queues."""
    activities = net.component_activities[comp]
    while True:
        startable = [j for j in activities if _startable(state, net, j)]
        if not startable:
            return
        buffers = sorted({net.activities[j].buffer for j in startable})
        if state.random_ties:
            best_counter = min(state.queues[i].min_counter() for i in buffers)
            pool = [i for i in buffers if state.queues[i].min_counter() == best_counter]
            buffer = pool[int(state.rng_policy.integers(len(pool)))]
        else:
            buffer = min(buffers, key=lambda i: (state.queues[i].min_counter(), i))
            best_counter = state.queues[buffer].min_counter()
        candidates = [j for j in startable if net.activities[j].buffer == buffer]
        if state.random_ties:
            j = candidates[int(state.rng_policy.integers(len(candidates)))]
        else:
            j = candidates[0]
        job = state.take_job(buffer, best_counter)
        state.start_service(j, job)


def eps_lrfs_pass(
    state: SimState, comp: int, net: ValidatedNetwork, epsilon: float
) -> None:
    """Timer-gated largest-counter boost, then the plain least-routed pass."""
    if epsilon > 0.0 and state.timer_value(comp) == 0.0:
        buffers = [i for i in net.partition[comp] if state.queues[i].size > 0]
        if buffers:
            buffer = min(buffers, key=lambda i: (-state.queues[i].max_counter(), i))
            counter = state.queues[buffer].max_counter()
            startable = [j for j in net.buffer_activities[buffer]
                         if _startable(state, net, j)]
            if startable:
                if state.rng_policy.random() < epsilon:
                    job = state.take_job(buffer, counter)
                    state.start_service(startable[0], job)
                state.set_timer(comp)   # armed whether or not the coin came up
    lrfs_pass(state, comp, net)


def static_priority_pass(
    state: SimState, comp: int, net: ValidatedNetwork, rank: dict[int, int]
) -> None:
    """Work-conserving pass serving the highest-priority startable buffer first."""
    activities = net.component_activities[comp]
    while True:
        startable = [j for j in activities if _startable(state, net, j)]
        if not startable:
            return
        j = min(startable, key=lambda jj: (rank[net.activities[jj].buffer], jj))
        job = state.take_fifo(net.activities[j].buffer)
        state.start_service(j, job)


def priority_rank(policy: StaticPriority, num_buffers: int) -> dict[int, int]:
    rank = {i: pos for pos, i in enumerate(policy.order)}
    for i in range(num_buffers):
        rank.setdefault(i, len(policy.order) + i)
    return rank


def parse_policy(name: str, epsilon: float = 0.0,
                 order: Iterable[int] = ()) -> Policy:
    """Build a policy from CLI-style arguments (0-based buffer order)."""
    if name == "lrfs":
        return Lrfs()
    if name == "eps-lrfs":
        return EpsLrfs(epsilon)
    if name == "static-priority":
        order = tuple(order)
        if not order:
            raise ValueError("static-priority needs a buffer order")
        return StaticPriority(order)
    raise ValueError(f"unknown policy {name!r}")
