"""Builtin example networks, fully parameterized with documented loads.

Each builder returns an unvalidated spec plus a short description that ends
up as the header comment of the written file.  Default parameters satisfy
the relevant stability condition for the least-routed policies.
"""

from __future__ import annotations

import numpy as np

from .network import (
    NO_ARRIVALS,
    NetworkSpec,
    activity,
    deterministic_service,
    exponential_service,
    poisson_arrivals,
    slotted_arrivals,
)


class UnknownExample(ValueError):
    pass


def rybko_stolyar(unstable: bool = False) -> tuple[NetworkSpec, str]:
    """Two stations, four buffers, deterministic 1->2 and 3->4 routes.

    Station loads are 0.7 each while the second-stage means sum to 1.2, so a
    static priority favoring the exit buffers (4 over 1, 2 over 3) destabilizes
    the network even though every processor is nominally underloaded.
    """
    routing = np.zeros((4, 4))
    routing[0, 1] = 1.0
    routing[2, 3] = 1.0
    spec = NetworkSpec(
        arrivals=(poisson_arrivals(1.0), NO_ARRIVALS, poisson_arrivals(1.0), NO_ARRIVALS),
        services=tuple(deterministic_service(m) for m in (0.1, 0.6, 0.1, 0.6)),
        activities=(activity(0, [0]), activity(1, [1]), activity(2, [1]), activity(3, [0])),
        num_processors=2,
        routing=routing,
        partition=((0, 3), (1, 2)),
    )
    desc = (
        "Two-station network with deterministic routes 1->2 and 3->4.\n"
        "Poisson rate 1 at buffers 1 and 3; deterministic services\n"
        "m = (0.1, 0.6, 0.1, 0.6): both station loads are 0.7 < 1, while\n"
        "m_2 + m_4 = 1.2 > 1."
    )
    if unstable:
        desc += (
            "\nPriority-instability parametrization: run with\n"
            "  simulate --policy static-priority --priority-order 4,1,2,3\n"
            "to reproduce unbounded growth; least-routed-first service\n"
            "keeps the same network stable."
        )
    return spec, desc


def tandem() -> tuple[NetworkSpec, str]:
    routing = np.zeros((2, 2))
    routing[0, 1] = 1.0
    spec = NetworkSpec(
        arrivals=(poisson_arrivals(0.5), NO_ARRIVALS),
        services=(exponential_service(0.8), exponential_service(0.8)),
        activities=(activity(0, [0]), activity(1, [1])),
        num_processors=2,
        routing=routing,
        partition=((0,), (1,)),
    )
    return spec, "Two exponential single-server stations in series, load 0.4 each."


def single_server_2buf() -> tuple[NetworkSpec, str]:
    spec = NetworkSpec(
        arrivals=(poisson_arrivals(1.0), poisson_arrivals(1.0)),
        services=(deterministic_service(0.3), deterministic_service(0.3)),
        activities=(activity(0, [0]), activity(1, [0])),
        num_processors=1,
        routing=np.zeros((2, 2)),
        partition=((0, 1),),
    )
    return spec, ("One processor shared by two buffers, Poisson rate 1 each,\n"
                  "deterministic services 0.3 + 0.3 < 1.")


def psn_a2() -> tuple[NetworkSpec, str]:
    """Two complete buffer-processor bicliques with a routing self-loop.

    The loop makes route lengths unbounded, exercising the timer-boosted
    policy and the high-counter machinery.
    """
    routing = np.zeros((3, 3))
    routing[0, 2] = 0.5
    routing[1, 2] = 0.3
    routing[2, 2] = 0.2
    spec = NetworkSpec(
        arrivals=(poisson_arrivals(0.6), poisson_arrivals(0.6), poisson_arrivals(0.2)),
        services=(exponential_service(0.5), exponential_service(0.7),
                  exponential_service(0.4)),
        activities=(
            activity(0, [0]), activity(0, [1]), activity(1, [0]), activity(1, [1]),
            activity(2, [2]),
        ),
        num_processors=3,
        routing=routing,
        partition=((0, 1), (2,)),
    )
    return spec, ("Parallel-server network: buffers {1,2} fully connected to\n"
                  "processors {1,2}, buffer 3 on its own processor, with a\n"
                  "feedback loop 3->3 (probability 0.2) making routes unbounded.")


def reentrant_line() -> tuple[NetworkSpec, str]:
    routing = np.zeros((3, 3))
    routing[0, 1] = 1.0
    routing[1, 2] = 1.0
    spec = NetworkSpec(
        arrivals=(poisson_arrivals(0.9), NO_ARRIVALS, NO_ARRIVALS),
        services=(exponential_service(0.3), exponential_service(0.5),
                  exponential_service(0.3)),
        activities=(activity(0, [0]), activity(1, [1]), activity(2, [0])),
        num_processors=2,
        routing=routing,
        partition=((0, 2), (1,)),
    )
    return spec, ("Reentrant line 1->2->3 with stations {1,3} and {2};\n"
                  "least-routed-first service reduces to first-buffer-first-served.")


def switch_2x2() -> tuple[NetworkSpec, str]:
    """2x2 input-queued switch: one virtual output queue per port pair."""
    spec = NetworkSpec(
        arrivals=tuple(slotted_arrivals(0.2) for _ in range(4)),
        services=tuple(deterministic_service(1.0) for _ in range(4)),
        activities=(
            activity(0, [0, 2]), activity(1, [0, 3]),
            activity(2, [1, 2]), activity(3, [1, 3]),
        ),
        num_processors=4,
        routing=np.zeros((4, 4)),
        partition=((0, 1, 2, 3),),
        synchronized=True,
    )
    return spec, ("Synchronized 2x2 input-queued switch; buffers are virtual\n"
                  "output queues (in,out), each claiming one input and one\n"
                  "output port per slot.  Per-port load 0.4 < 1/2.")


def wireless_fig4() -> tuple[NetworkSpec, str]:
    """Four radio nodes, five paths, primary interference constraints.

    Buffers sit on the directed edges 1->2, 2->1, 1->3, 3->1, 2->4, 4->3;
    the two-hop path 2->4->3 routes its packets from buffer 5 to buffer 6.
    Each transmission claims both endpoint nodes for the slot.
    """
    routing = np.zeros((6, 6))
    routing[4, 5] = 1.0
    arrivals = [slotted_arrivals(0.1)] * 5 + [NO_ARRIVALS]
    spec = NetworkSpec(
        arrivals=tuple(arrivals),
        services=tuple(deterministic_service(1.0) for _ in range(6)),
        activities=(
            activity(0, [0, 1]), activity(1, [1, 0]), activity(2, [0, 2]),
            activity(3, [2, 0]), activity(4, [1, 3]), activity(5, [3, 2]),
        ),
        num_processors=4,
        routing=routing,
        partition=((0, 1, 2, 3, 4, 5),),
        synchronized=True,
    )
    return spec, ("Synchronized wireless network: 4 nodes, 5 paths, 6 link\n"
                  "buffers; every transmission occupies its two endpoint nodes\n"
                  "(primary interference).  Busiest node carries load 0.4 < 1/2.")


_BUILDERS = {
    "rybko-stolyar": rybko_stolyar,
    "tandem": tandem,
    "single-server-2buf": single_server_2buf,
    "psn-a2": psn_a2,
    "reentrant-line": reentrant_line,
    "switch-2x2": switch_2x2,
    "wireless-fig4": wireless_fig4,
}


def example_names() -> tuple[str, ...]:
    return tuple(_BUILDERS)


def build_example(name: str, unstable: bool = False) -> tuple[NetworkSpec, str]:
    builder = _BUILDERS.get(name)
    if builder is None:
        raise UnknownExample(f"unknown example {name!r}; choose from {', '.join(_BUILDERS)}")
    if name == "rybko-stolyar":
        return builder(unstable=unstable)
    if unstable:
        raise UnknownExample(f"example {name!r} has no --unstable variant")
    return builder()
