"""Shared fixtures: reference networks and a random small-network generator."""

from __future__ import annotations

import numpy as np
import pytest

from spnsim import examples, network
from spnsim.network import (
    NO_ARRIVALS,
    Activity,
    NetworkSpec,
    deterministic_service,
    discrete_service,
    exponential_service,
    finest_partition,
    poisson_arrivals,
    uniform_service,
)

RS_COUPLING = np.array(
    [[1, 0, 0, 1], [0, 1, 1, 0], [0, 1, 1, 0], [1, 0, 0, 1]], dtype=float)


@pytest.fixture(scope="session")
def rs_net():
    spec, _ = examples.build_example("rybko-stolyar")
    return network.validate(spec)


@pytest.fixture(scope="session")
def two_buffer_net():
    spec, _ = examples.build_example("single-server-2buf")
    return network.validate(spec)


@pytest.fixture(scope="session")
def wireless_net():
    spec, _ = examples.build_example("wireless-fig4")
    return network.validate(spec)


def random_spec(rng: np.random.Generator, dedicated: bool | None = None) -> NetworkSpec:
    """Small random network: <= 6 buffers, <= 8 activities, valid by construction.

    With dedicated=True every buffer gets its own processor (certificates with
    diagonal-ish couplings then tend to hold); with False processors are
    shared at random.  None picks one of the two shapes at random.
    """
    if dedicated is None:
        dedicated = bool(rng.integers(2))
    num_buffers = int(rng.integers(2, 7))
    if dedicated:
        num_procs = num_buffers
        acts = [Activity(i, frozenset([i]), float(rng.uniform(0.8, 1.5)))
                for i in range(num_buffers)]
    else:
        num_procs = int(rng.integers(1, 5))
        acts = [
            Activity(i, frozenset([int(rng.integers(num_procs))]),
                     float(rng.uniform(0.8, 1.5)))
            for i in range(num_buffers)
        ]
    extra = int(rng.integers(0, max(1, 9 - len(acts))))
    for _ in range(extra):
        size = 1 if dedicated else int(rng.integers(1, min(3, num_procs) + 1))
        procs = frozenset(int(k) for k in rng.choice(num_procs, size=size, replace=False))
        acts.append(Activity(int(rng.integers(num_buffers)), procs,
                             float(rng.uniform(0.8, 1.5))))

    routing = np.zeros((num_buffers, num_buffers))
    for i in range(num_buffers):
        if rng.random() < 0.5:
            targets = rng.choice(num_buffers, size=min(2, num_buffers), replace=False)
            mass = rng.uniform(0.1, 0.7)
            for t in targets:
                routing[i, int(t)] = mass / len(targets)

    arrivals = []
    services = []
    for i in range(num_buffers):
        rate = float(rng.uniform(0.05, 0.3)) if rng.random() < 0.8 else 0.0
        arrivals.append(poisson_arrivals(rate) if rate > 0 else NO_ARRIVALS)
        mean = float(rng.uniform(0.2, 0.9))
        kind = int(rng.integers(4))
        if kind == 0:
            services.append(deterministic_service(mean))
        elif kind == 1:
            services.append(exponential_service(mean))
        elif kind == 2:
            services.append(uniform_service(0.5 * mean, 1.5 * mean))
        else:
            services.append(discrete_service([0.5 * mean, 1.5 * mean], [0.5, 0.5]))
    if all(a.kind == "none" for a in arrivals):
        arrivals[0] = poisson_arrivals(0.2)

    spec = NetworkSpec(
        arrivals=tuple(arrivals),
        services=tuple(services),
        activities=tuple(acts),
        num_processors=num_procs,
        routing=routing,
    )
    spec.partition = finest_partition(spec)
    return spec
