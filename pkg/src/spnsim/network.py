"""Static description of a stochastic processing network and its derived loads.

A network is a set of buffers holding jobs, a set of activities (each serving
one buffer using a fixed set of processors simultaneously), and a routing
matrix describing where jobs go after service.  Buffers are grouped into
components that share no processors; scheduling decisions are made per
component.  Everything here is index-based: buffers, activities, processors
and components are 0-based integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPECTRAL_TOL = 1e-12


class InvalidNetwork(ValueError):
    """The network description violates a structural requirement."""


class NonConvergentRouting(InvalidNetwork):
    """Routing matrix has spectral radius >= 1, so traffic never drains."""


class PartitionNotProcessorIndependent(InvalidNetwork):
    """Two distinct components share a processor."""


class SynchronizedShapeViolation(InvalidNetwork):
    """Synchronized flag set but services/rates/arrivals are not slot-shaped."""


# ---------------------------------------------------------------------------
# arrival and service models


@dataclass(frozen=True)
class ArrivalModel:
    """External arrival stream for one buffer.

    kind is one of:
      poisson  -- Poisson process with the given rate (jobs per time unit)
      slotted  -- arrivals at integer epochs; rate is the mean batch size per
                  slot (integer part arrives surely, fractional part is a
                  Bernoulli coin)
      none     -- no external arrivals
    """

    kind: str
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in ("poisson", "slotted", "none"):
            raise InvalidNetwork(f"unknown arrival kind {self.kind!r}")
        if self.kind == "none" and self.rate:
            raise InvalidNetwork("arrival kind 'none' cannot carry a rate")
        if self.rate < 0:
            raise InvalidNetwork("arrival rate must be nonnegative")


def poisson_arrivals(rate: float) -> ArrivalModel:
    return ArrivalModel("poisson", rate)


def slotted_arrivals(rate: float) -> ArrivalModel:
    return ArrivalModel("slotted", rate)


NO_ARRIVALS = ArrivalModel("none", 0.0)


@dataclass(frozen=True)
class ServiceModel:
    """Service-time distribution for one buffer.

    Supported kinds: deterministic, exponential, uniform, discrete.  First
    and second moments are analytic, so the finite-second-moment requirement
    holds by construction.
    """

    kind: str
    mean: float
    low: float = 0.0
    high: float = 0.0
    values: tuple[float, ...] = ()
    probs: tuple[float, ...] = ()

    def __post_init__(self):
        if self.mean <= 0:
            raise InvalidNetwork("service mean must be positive")

    @property
    def second_moment(self) -> float:
        if self.kind == "deterministic":
            return self.mean * self.mean
        if self.kind == "exponential":
            return 2.0 * self.mean * self.mean
        if self.kind == "uniform":
            a, b = self.low, self.high
            return (a * a + a * b + b * b) / 3.0
        return sum(p * v * v for v, p in zip(self.values, self.probs))

    def sample(self, rng) -> float:
        if self.kind == "deterministic":
            return self.mean
        if self.kind == "exponential":
            return rng.exponential(self.mean)
        if self.kind == "uniform":
            return rng.uniform(self.low, self.high)
        u = rng.random()
        acc = 0.0
        for v, p in zip(self.values, self.probs):
            acc += p
            if u < acc:
                return v
        return self.values[-1]

    def excess_mean(self, cut: float) -> float:
        """E[(service - cut)_+], exact for every supported kind."""
        if cut <= 0:
            return self.mean - cut
        if self.kind == "deterministic":
            return max(0.0, self.mean - cut)
        if self.kind == "exponential":
            return self.mean * math.exp(-cut / self.mean)
        if self.kind == "uniform":
            a, b = self.low, self.high
            if cut >= b:
                return 0.0
            if cut <= a:
                return self.mean - cut
            return (b - cut) ** 2 / (2.0 * (b - a))
        return sum(p * max(0.0, v - cut) for v, p in zip(self.values, self.probs))


def deterministic_service(mean: float) -> ServiceModel:
    return ServiceModel("deterministic", mean)


def exponential_service(mean: float) -> ServiceModel:
    return ServiceModel("exponential", mean)


def uniform_service(low: float, high: float) -> ServiceModel:
    if not 0 <= low < high:
        raise InvalidNetwork("uniform service needs 0 <= low < high")
    return ServiceModel("uniform", (low + high) / 2.0, low=low, high=high)


def discrete_service(values, probs) -> ServiceModel:
    values = tuple(float(v) for v in values)
    probs = tuple(float(p) for p in probs)
    if len(values) != len(probs) or not values:
        raise InvalidNetwork("discrete service needs matching values/probs")
    if any(v < 0 for v in values) or any(p < 0 for p in probs):
        raise InvalidNetwork("discrete service entries must be nonnegative")
    if abs(sum(probs) - 1.0) > 1e-9:
        raise InvalidNetwork("discrete service probabilities must sum to 1")
    mean = sum(p * v for v, p in zip(values, probs))
    return ServiceModel("discrete", mean, values=values, probs=probs)


# ---------------------------------------------------------------------------
# network description


@dataclass(frozen=True)
class Activity:
    """A processing mode: serves `buffer` using all of `processors` at `rate`."""

    buffer: int
    processors: frozenset[int]
    rate: float = 1.0


def activity(buffer: int, processors, rate: float = 1.0) -> Activity:
    return Activity(buffer, frozenset(processors), rate)


@dataclass
class NetworkSpec:
    """Unvalidated network description; run validate() to use it."""

    arrivals: tuple[ArrivalModel, ...]
    services: tuple[ServiceModel, ...]
    activities: tuple[Activity, ...]
    num_processors: int
    routing: np.ndarray
    partition: tuple[tuple[int, ...], ...] | None = None
    synchronized: bool = False
    buffer_names: tuple[str, ...] | None = None

    @property
    def num_buffers(self) -> int:
        return len(self.services)


@dataclass(frozen=True)
class EffectiveLoad:
    """Effective per-buffer arrival rates and nominal loads.

    throughput[i] solves the flow-balance equations (external rate plus rate
    routed in from upstream); load[i] = throughput[i] * mean service time.
    """

    throughput: np.ndarray
    load: np.ndarray


def spectral_radius(routing: np.ndarray) -> float:
    if routing.size == 0:
        return 0.0
    return float(np.abs(np.linalg.eigvals(routing)).max())


def effective_rates(alpha, routing: np.ndarray, mean_service) -> EffectiveLoad:
    """Solve the traffic equations for the effective arrival rate vector."""
    alpha = np.asarray(alpha, dtype=float)
    mean_service = np.asarray(mean_service, dtype=float)
    if spectral_radius(routing) >= 1.0 - SPECTRAL_TOL:
        raise NonConvergentRouting(
            f"routing spectral radius {spectral_radius(routing):.6g} is not < 1"
        )
    eye = np.eye(routing.shape[0])
    throughput = np.linalg.solve(eye - routing.T, alpha)
    return EffectiveLoad(throughput, throughput * mean_service)


@dataclass(frozen=True)
class ValidatedNetwork:
    """Immutable network with all derived quantities precomputed.

    Safe to share across concurrent simulation replications.
    """

    arrivals: tuple[ArrivalModel, ...]
    services: tuple[ServiceModel, ...]
    activities: tuple[Activity, ...]
    num_processors: int
    routing: np.ndarray
    partition: tuple[tuple[int, ...], ...]
    synchronized: bool
    buffer_names: tuple[str, ...]
    # derived
    throughput: np.ndarray          # effective arrival rate per buffer
    load: np.ndarray                # nominal load per buffer
    mean_service: np.ndarray        # mean service time per buffer
    buffer_activities: tuple[tuple[int, ...], ...]   # activities serving each buffer
    component_of: tuple[int, ...]                    # buffer -> component
    component_activities: tuple[tuple[int, ...], ...]
    component_processors: tuple[frozenset[int], ...]
    visit_work: np.ndarray          # expected total service a fresh job in i generates
    onward_work: np.ndarray         # same, excluding the current buffer's own mean

    @property
    def num_buffers(self) -> int:
        return len(self.services)

    @property
    def num_activities(self) -> int:
        return len(self.activities)

    @property
    def num_components(self) -> int:
        return len(self.partition)

    def spec(self) -> NetworkSpec:
        return NetworkSpec(
            self.arrivals, self.services, self.activities, self.num_processors,
            self.routing, self.partition, self.synchronized, self.buffer_names,
        )


def _check_violations(spec: NetworkSpec) -> list[tuple[type, str]]:
    out: list[tuple[type, str]] = []
    I = spec.num_buffers
    if len(spec.arrivals) != I:
        out.append((InvalidNetwork, "arrivals and services must have equal length"))
        return out
    if spec.routing.shape != (I, I):
        out.append((InvalidNetwork, f"routing must be {I}x{I}"))
        return out
    if np.any(spec.routing < 0) or np.any(spec.routing > 1):
        out.append((InvalidNetwork, "routing entries must lie in [0, 1]"))
    row_sums = spec.routing.sum(axis=1)
    if np.any(row_sums > 1.0 + 1e-12):
        out.append((InvalidNetwork, "routing row sums must be <= 1"))
    if spectral_radius(spec.routing) >= 1.0 - SPECTRAL_TOL:
        out.append((NonConvergentRouting,
                    f"routing spectral radius {spectral_radius(spec.routing):.6g} is not < 1"))
    for j, act in enumerate(spec.activities):
        if not act.processors:
            out.append((InvalidNetwork, f"activity {j} has an empty processor set"))
        if act.rate <= 0:
            out.append((InvalidNetwork, f"activity {j} has nonpositive rate"))
        if not 0 <= act.buffer < I:
            out.append((InvalidNetwork, f"activity {j} serves unknown buffer {act.buffer}"))
        if any(not 0 <= k < spec.num_processors for k in act.processors):
            out.append((InvalidNetwork, f"activity {j} uses an unknown processor"))

    partition = spec.partition or (tuple(range(I)),)
    seen: set[int] = set()
    for comp in partition:
        for i in comp:
            if i in seen or not 0 <= i < I:
                out.append((InvalidNetwork, f"partition repeats or misses buffer {i}"))
            seen.add(i)
    if seen != set(range(I)):
        out.append((InvalidNetwork, "partition must cover every buffer exactly once"))
    else:
        comp_of = {}
        for h, comp in enumerate(partition):
            for i in comp:
                comp_of[i] = h
        proc_sets = [set() for _ in partition]
        for act in spec.activities:
            if 0 <= act.buffer < I:
                proc_sets[comp_of[act.buffer]].update(act.processors)
        for h1 in range(len(partition)):
            for h2 in range(h1 + 1, len(partition)):
                shared = proc_sets[h1] & proc_sets[h2]
                if shared:
                    out.append((PartitionNotProcessorIndependent,
                                f"components {h1} and {h2} share processors {sorted(shared)}"))

    if spec.synchronized:
        for i, svc in enumerate(spec.services):
            if svc.kind != "deterministic" or svc.mean != 1.0:
                out.append((SynchronizedShapeViolation,
                            f"synchronized network needs deterministic unit service (buffer {i})"))
        for j, act in enumerate(spec.activities):
            if act.rate != 1.0:
                out.append((SynchronizedShapeViolation,
                            f"synchronized network needs unit rates (activity {j})"))
        for i, arr in enumerate(spec.arrivals):
            if arr.kind == "poisson":
                out.append((SynchronizedShapeViolation,
                            f"synchronized network cannot take Poisson arrivals (buffer {i})"))

    if not any(a.kind != "none" and a.rate > 0 for a in spec.arrivals):
        out.append((InvalidNetwork, "at least one buffer needs external arrivals"))
    return out


def check_spec(spec: NetworkSpec) -> list[str]:
    """All invariant violations as human-readable strings (empty when valid)."""
    return [msg for _, msg in _check_violations(spec)]


def validate(spec: NetworkSpec | ValidatedNetwork) -> ValidatedNetwork:
    """Check every structural invariant and attach derived quantities.

    Raises the exception class of the first violation found; the message
    lists all of them.  Validating an already-validated network reproduces
    identical derived quantities.
    """
    if isinstance(spec, ValidatedNetwork):
        spec = spec.spec()
    violations = _check_violations(spec)
    if violations:
        cls = violations[0][0]
        raise cls("; ".join(msg for _, msg in violations))

    I = spec.num_buffers
    partition = spec.partition or (tuple(range(I)),)
    alpha = np.array([a.rate if a.kind != "none" else 0.0 for a in spec.arrivals])
    mean_service = np.array([s.mean for s in spec.services])
    eff = effective_rates(alpha, spec.routing, mean_service)

    buffer_activities = tuple(
        tuple(j for j, act in enumerate(spec.activities) if act.buffer == i)
        for i in range(I)
    )
    comp_of = [0] * I
    for h, comp in enumerate(partition):
        for i in comp:
            comp_of[i] = h
    component_activities = tuple(
        tuple(j for j, act in enumerate(spec.activities) if comp_of[act.buffer] == h)
        for h in range(len(partition))
    )
    component_processors = tuple(
        frozenset(k for j in component_activities[h] for k in spec.activities[j].processors)
        for h in range(len(partition))
    )
    visit_matrix = np.linalg.inv(np.eye(I) - spec.routing)
    visit_work = visit_matrix @ mean_service
    onward_work = visit_work - mean_service

    names = spec.buffer_names or tuple(f"b{i + 1}" for i in range(I))
    routing = spec.routing.copy()
    routing.setflags(write=False)
    return ValidatedNetwork(
        arrivals=tuple(spec.arrivals),
        services=tuple(spec.services),
        activities=tuple(spec.activities),
        num_processors=spec.num_processors,
        routing=routing,
        partition=tuple(tuple(c) for c in partition),
        synchronized=spec.synchronized,
        buffer_names=tuple(names),
        throughput=eff.throughput,
        load=eff.load,
        mean_service=mean_service,
        buffer_activities=buffer_activities,
        component_of=tuple(comp_of),
        component_activities=component_activities,
        component_processors=component_processors,
        visit_work=visit_work,
        onward_work=onward_work,
    )


def activity_interchangeable(net: ValidatedNetwork, i: int, ell: int) -> bool:
    """True iff buffers i and ell expose identical families of processor sets."""
    fam_i = {net.activities[j].processors for j in net.buffer_activities[i]}
    fam_l = {net.activities[j].processors for j in net.buffer_activities[ell]}
    return fam_i == fam_l


def routes_bounded(net: ValidatedNetwork | NetworkSpec) -> int | None:
    """Smallest d with routing^d == 0, or None when the support digraph has a cycle.

    Equals one plus the longest directed path (in edges) of the support
    digraph, confirmed by exact matrix powers.
    """
    P = net.routing
    I = P.shape[0]
    succ = [np.nonzero(P[i] > 0)[0].tolist() for i in range(I)]

    # longest path via DFS with memoization; None marks an in-progress node
    depth: dict[int, int | None] = {}

    def longest(i: int) -> int | None:
        if i in depth:
            return depth[i]
        depth[i] = None
        best = 0
        for nx in succ[i]:
            d = longest(nx)
            if d is None:
                return None
            best = max(best, d + 1)
        depth[i] = best
        return best

    longest_edges = 0
    for i in range(I):
        d = longest(i)
        if d is None:
            return None
        longest_edges = max(longest_edges, d)
    d = longest_edges + 1
    power = np.linalg.matrix_power(P, d)
    assert not power.any(), "support digraph is acyclic but routing power is nonzero"
    return d


def finest_partition(spec: NetworkSpec) -> tuple[tuple[int, ...], ...]:
    """Finest processor-independent grouping of buffers (union-find on shared processors)."""
    I = spec.num_buffers
    parent = list(range(I))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    proc_to_buffer: dict[int, int] = {}
    for act in spec.activities:
        for k in act.processors:
            if k in proc_to_buffer:
                union(proc_to_buffer[k], act.buffer)
            else:
                proc_to_buffer[k] = act.buffer
    groups: dict[int, list[int]] = {}
    for i in range(I):
        groups.setdefault(find(i), []).append(i)
    return tuple(tuple(sorted(g)) for _, g in sorted(groups.items()))


def split_capacity(spec: NetworkSpec, capacities: dict[int, int]) -> NetworkSpec:
    """Replace processors of capacity c by c unit-capacity copies.

    Every activity using a split processor is cloned once per copy, keeping
    the rest of its processor set fixed.
    """
    next_id = spec.num_processors
    copies: dict[int, list[int]] = {}
    for k, cap in capacities.items():
        if cap < 1:
            raise InvalidNetwork("capacity must be >= 1")
        ids = [k]
        for _ in range(cap - 1):
            ids.append(next_id)
            next_id += 1
        copies[k] = ids

    new_acts: list[Activity] = []
    for act in spec.activities:
        split = [k for k in sorted(act.processors) if k in copies]
        variants: list[frozenset[int]] = [frozenset(act.processors - set(split))]
        for k in split:
            variants = [v | {c} for v in variants for c in copies[k]]
        for procs in variants:
            new_acts.append(Activity(act.buffer, procs, act.rate))
    return NetworkSpec(
        spec.arrivals, spec.services, tuple(new_acts), next_id,
        spec.routing, spec.partition, spec.synchronized, spec.buffer_names,
    )
