"""Quadratic drift certificates: mechanical checking and closed-form builders.

A certificate is a symmetric nonnegative coupling matrix whose quadratic form
drops by a uniform margin when one service step of any maximal schedule is
weighed against nominal loads inflated by a slack times the mean service
times.  The check reduces to finitely many linear sign conditions: the drift
inequality holds for some margin and additive constant iff, for every buffer
i and every schedule that is maximal when only buffer i is backlogged, the
i-th coordinate of coupling @ (load + slack*mean - service) is strictly
negative.  The reduction is cross-validated by `sample_check`, which tests
the quadratic inequality directly on random states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import ValidatedNetwork, activity_interchangeable
from .scheduling import ENUMERATION_CAP, _schedule_tables

STRICTNESS_TOL = 1e-12
SAMPLE_TOL = 1e-7

CONDITIONS = ("C1", "C2", "C2p", "C3", "C3p")


class NonSymmetricCoupling(ValueError):
    pass


class NegativeCouplingEntry(ValueError):
    pass


class AssumptionA1Violated(ValueError):
    """Some activity uses more than one processor."""


class AssumptionA2Violated(ValueError):
    """Components are not disjoint complete buffer-processor bicliques."""


class AssumptionB1Violated(ValueError):
    """Some buffer has more or fewer than exactly one activity."""


class NotSynchronized(ValueError):
    pass


@dataclass(frozen=True)
class QuadraticCertificate:
    coupling: np.ndarray
    slack: float
    eta: float        # uniform drift margin per unit of backlog
    constant: float   # additive constant absorbing bounded second-order terms


@dataclass(frozen=True)
class Witness:
    """A (pattern, schedule, buffer) triple with nonnegative drift coordinate."""

    pattern: tuple[int, ...]
    schedule: tuple[int, ...]
    buffer: int
    margin: float


@dataclass(frozen=True)
class CheckResult:
    holds: bool
    eta: float | None
    constant: float | None
    witness: Witness | None


def _validated_coupling(coupling) -> np.ndarray:
    z = np.asarray(coupling, dtype=float)
    if z.ndim != 2 or z.shape[0] != z.shape[1]:
        raise NonSymmetricCoupling("coupling must be a square matrix")
    if np.abs(z - z.T).max(initial=0.0) > 1e-12:
        raise NonSymmetricCoupling("coupling must be symmetric")
    if z.min(initial=0.0) < 0:
        raise NegativeCouplingEntry("coupling entries must be nonnegative")
    return z


def _schedule_system(net: ValidatedNetwork, cap: int = ENUMERATION_CAP):
    """All feasible schedules with services and per-activity maximality flags."""
    u_all, maximal = _schedule_tables(net, cap)
    serve = np.zeros((net.num_activities, net.num_buffers))
    for j, act in enumerate(net.activities):
        serve[j, act.buffer] = act.rate
    service = u_all.astype(float) @ serve
    return u_all, maximal, service


def _single_buffer_masks(net: ValidatedNetwork, maximal: np.ndarray) -> list[np.ndarray]:
    """masks[i] selects schedules maximal when only buffer i is backlogged.

    Any schedule maximal for a pattern containing i is also in masks[i], so
    these singleton families carry every linear constraint of the check.
    """
    out = []
    for i in range(net.num_buffers):
        js = net.buffer_activities[i]
        if js:
            out.append(maximal[:, list(js)].all(axis=1))
        else:
            out.append(np.ones(maximal.shape[0], dtype=bool))
    return out


def check_local(coupling, net: ValidatedNetwork, slack: float,
                cap: int = ENUMERATION_CAP) -> CheckResult:
    """Decide whether the quadratic form certifies drift at the given slack.

    On success returns the drift margin (twice the worst coordinate gap) and
    an additive constant valid for every state; on failure returns the
    maximizing witness triple.
    """
    z = _validated_coupling(coupling)
    if z.shape[0] != net.num_buffers:
        raise ValueError("coupling size must match the buffer count")
    u_all, maximal, service = _schedule_system(net, cap)
    delta = net.load + slack * net.mean_service - service     # (U, I)
    zdelta = delta @ z                                        # (Z delta)_i per schedule
    masks = _single_buffer_masks(net, maximal)

    worst = -math.inf
    worst_i = 0
    worst_u = 0
    for i in range(net.num_buffers):
        vals = zdelta[masks[i], i]
        if not len(vals):
            continue
        pos = int(vals.argmax())
        if vals[pos] > worst:
            worst = float(vals[pos])
            worst_i = i
            worst_u = int(np.nonzero(masks[i])[0][pos])

    quad = np.einsum("ui,ij,uj->u", delta, z, delta)
    constant = float(quad.max()) + 1.0
    pattern = tuple(1 if i == worst_i else 0 for i in range(net.num_buffers))
    witness = Witness(pattern, tuple(int(x) for x in u_all[worst_u]), worst_i, worst)
    if worst < -STRICTNESS_TOL:
        return CheckResult(True, -2.0 * worst, constant, witness)
    return CheckResult(False, None, None, witness)


def max_slack(coupling, net: ValidatedNetwork,
              cap: int = ENUMERATION_CAP) -> float | None:
    """Supremum of slacks at which the check holds, in closed form.

    Each constraint coordinate is affine in the slack with nonnegative
    coefficient, so per constraint the admissible slacks form a ray; the
    supremum is the smallest threshold.  None when already infeasible with
    zero slack.
    """
    z = _validated_coupling(coupling)
    if z.shape[0] != net.num_buffers:
        raise ValueError("coupling size must match the buffer count")
    _, maximal, service = _schedule_system(net, cap)
    base = (net.load - service) @ z                 # constraint value at slack 0
    grow = z @ net.mean_service                     # slack coefficient per buffer
    masks = _single_buffer_masks(net, maximal)

    best = math.inf
    for i in range(net.num_buffers):
        vals = base[masks[i], i]
        if not len(vals):
            continue
        if grow[i] == 0.0:
            if vals.max() >= 0.0:
                return None           # constant coordinate can never go negative
            continue
        best = min(best, float((-vals / grow[i]).min()))
    if best <= 0.0:
        return None
    return best


def sample_check(coupling, net: ValidatedNetwork, slack: float, eta: float,
                 constant: float, n: int, rng,
                 cap: int = ENUMERATION_CAP) -> int:
    """Independent oracle: test the drift inequality on random state/schedule pairs.

    Draws states with random support and log-uniform magnitudes, a uniformly
    random maximal schedule for each support, and evaluates both sides of the
    quadratic inequality directly.  Returns the violation count.
    """
    z = _validated_coupling(coupling)
    I = net.num_buffers
    _, maximal, service = _schedule_system(net, cap)
    delta = net.load + slack * net.mean_service - service

    support = rng.random((n, I)) < 0.5
    mags = 10.0 ** rng.uniform(-3.0, 4.0, size=(n, I))
    w = np.where(support, mags, 0.0)
    codes = support @ (1 << np.arange(I))

    violations = 0
    for code in np.unique(codes):
        rows = np.nonzero(codes == code)[0]
        mask = np.ones(maximal.shape[0], dtype=bool)
        for j, act in enumerate(net.activities):
            if (code >> act.buffer) & 1:
                mask &= maximal[:, j]
        members = np.nonzero(mask)[0]
        pick = members[rng.integers(len(members), size=len(rows))]
        ws = w[rows]
        shifted = ws + delta[pick]
        lhs = np.einsum("ni,ij,nj->n", shifted, z, shifted)
        rhs = (np.einsum("ni,ij,nj->n", ws, z, ws)
               - eta * ws.sum(axis=1) + constant)
        violations += int((lhs > rhs + SAMPLE_TOL * (1.0 + np.abs(rhs))).sum())
    return violations


def check_structural(coupling, net: ValidatedNetwork, condition: str) -> bool:
    """Evaluate one of the named coupling-shape conditions literally."""
    if condition not in CONDITIONS:
        raise ValueError(f"condition must be one of {CONDITIONS}")
    z = _validated_coupling(coupling)
    I = net.num_buffers
    coupled = [(i, l) for i in range(I) for l in range(I) if z[i, l] != 0.0]

    def has_single_processor_activity() -> bool:
        return all(
            any(len(net.activities[j].processors) == 1 for j in net.buffer_activities[i])
            for i in range(I)
        )

    def mutually_covered(i: int, l: int) -> bool:
        fam_i = [net.activities[j].processors for j in net.buffer_activities[i]]
        fam_l = [net.activities[j].processors for j in net.buffer_activities[l]]
        return (all(any(kl <= ki for kl in fam_l) for ki in fam_i)
                and all(any(ki <= kl for ki in fam_i) for kl in fam_l))

    if condition == "C1":
        return net.synchronized and all(
            net.component_of[i] == net.component_of[l] for i, l in coupled)
    if condition == "C2":
        return (all(activity_interchangeable(net, i, l) for i, l in coupled)
                and has_single_processor_activity())
    if condition == "C2p":
        return all(activity_interchangeable(net, i, l) for i, l in coupled)
    if condition == "C3":
        return (all(mutually_covered(i, l) for i, l in coupled)
                and has_single_processor_activity())
    return all(mutually_covered(i, l) for i, l in coupled)


# ---------------------------------------------------------------------------
# closed-form constructors


def construct_psn(net: ValidatedNetwork) -> tuple[np.ndarray, float | None]:
    """Per-component all-ones coupling for parallel-server shapes.

    Requires single-processor activities and each component to be a complete
    buffer-processor biclique.  The returned slack bound is the minimum over
    components of (guaranteed busy service rate - total load) / total mean,
    absent when some component is overloaded.
    """
    for j, act in enumerate(net.activities):
        if len(act.processors) != 1:
            raise AssumptionA1Violated(f"activity {j} uses {len(act.processors)} processors")
    I = net.num_buffers
    z = np.zeros((I, I))
    bound = math.inf
    for h, buffers in enumerate(net.partition):
        procs = sorted(net.component_processors[h])
        for i in buffers:
            pairs = {next(iter(net.activities[j].processors))
                     for j in net.buffer_activities[i]}
            if set(procs) - pairs:
                raise AssumptionA2Violated(
                    f"buffer {i} lacks an activity on every processor of component {h}")
        for i in buffers:
            for l in buffers:
                z[i, l] = 1.0
        # slowest activity per processor bounds the rate a busy component sustains
        min_rate = {k: math.inf for k in procs}
        for j in net.component_activities[h]:
            k = next(iter(net.activities[j].processors))
            min_rate[k] = min(min_rate[k], net.activities[j].rate)
        service_floor = sum(min_rate.values())
        total_load = float(net.load[list(buffers)].sum())
        total_mean = float(net.mean_service[list(buffers)].sum())
        if total_load >= service_floor:
            bound = None
        elif bound is not None:
            bound = min(bound, (service_floor - total_load) / total_mean)
    return z, bound


def construct_comm(net: ValidatedNetwork) -> tuple[np.ndarray, float | None]:
    """Shared-processor-count coupling for synchronized single-activity nets.

    The slack bound is the minimum over processors of
    (1/max interference degree - processor load) / processor mean mass,
    absent when a processor exceeds that capacity fraction.
    """
    if not net.synchronized:
        raise NotSynchronized("communication construction needs a synchronized network")
    procsets = []
    for i in range(net.num_buffers):
        js = net.buffer_activities[i]
        if len(js) != 1:
            raise AssumptionB1Violated(f"buffer {i} has {len(js)} activities, needs 1")
        procsets.append(net.activities[js[0]].processors)
    I = net.num_buffers
    z = np.zeros((I, I))
    for i in range(I):
        for l in range(I):
            z[i, l] = len(procsets[i] & procsets[l])
    degree = max(len(s) for s in procsets)
    fraction = 1.0 / degree
    bound = math.inf
    for k in range(net.num_processors):
        users = [i for i in range(I) if k in procsets[i]]
        if not users:
            continue
        load = float(net.load[users].sum())
        mean = float(net.mean_service[users].sum())
        if load >= fraction:
            bound = None
        elif bound is not None:
            bound = min(bound, (fraction - load) / mean)
    if bound is math.inf:
        bound = None
    return z, bound


def make_certificate(coupling, net: ValidatedNetwork, slack: float) -> QuadraticCertificate:
    """Check the coupling at the slack and package the result; raises on failure."""
    result = check_local(coupling, net, slack)
    if not result.holds:
        w = result.witness
        raise ValueError(
            f"coupling is not a certificate at slack {slack}: buffer {w.buffer} "
            f"keeps margin {w.margin:.3g} under schedule {w.schedule}")
    return QuadraticCertificate(_validated_coupling(coupling), slack,
                                result.eta, result.constant)
