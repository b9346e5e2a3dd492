"""Workload accounting, drift constants, and trajectory-level estimators.

Job weights are expected total remaining service requirements: what a job
will still ask of the network, summed over the buffers it is going to visit.
For jobs past their pre-drawn route the expectation runs through the routing
matrix; for jobs still on a pre-drawn route the remaining hops are known and
the weight is a plain sum of mean service times (plus the expected
continuation when the route has full depth).

The global Lyapunov value of a state combines quadratics of counted total
workloads, the squared in-service residuals, and (when routes are unbounded)
the squared total weight of high-counter jobs.  Constants tying the pieces
together are computed here from a verified quadratic certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import ValidatedNetwork, routes_bounded, spectral_radius


class PredrawDepthInsufficient(ValueError):
    """Counted quantities need a route pre-draw at least as deep as requested."""


class SlackNonPositive(ValueError):
    """Unbounded routes need a certificate with strictly positive slack."""


class TailSeriesDiverges(RuntimeError):
    """Routing tail series failed to converge (cannot happen below radius 1)."""


class TrajectoryTooShort(ValueError):
    pass


class InsufficientSamples(ValueError):
    pass


# ---------------------------------------------------------------------------
# job weights


def job_type(job, depth: int) -> int:
    """1 = past any pre-drawn route, 2 = on a full-depth route, 3 = exits early."""
    if depth <= 0 or job.counter > depth:
        return 1
    return 3 if job.path_exits else 2


def waiting_weight(job, net: ValidatedNetwork, depth: int) -> float:
    """Expected total remaining service of a waiting job, current buffer included."""
    kind = job_type(job, depth)
    if kind == 1:
        return float(net.visit_work[job.buffer])
    rest = net.mean_service[job.buffer] + sum(net.mean_service[f] for f in job.future)
    if kind == 3:
        return float(rest)
    last = job.future[-1] if job.future else job.buffer
    return float(net.onward_work[last] + rest)


def inservice_continuation(job, net: ValidatedNetwork, depth: int) -> float:
    """Expected work beyond the drawn requirement for an in-service job."""
    kind = job_type(job, depth)
    if kind == 1:
        return float(net.onward_work[job.buffer])
    rest = sum(net.mean_service[f] for f in job.future)
    if kind == 3:
        return float(rest)
    last = job.future[-1] if job.future else job.buffer
    return float(net.onward_work[last] + rest)


def job_weight(job, net: ValidatedNetwork, depth: int,
               remaining: float | None = None) -> float:
    """Weight of one job; pass the remaining requirement for in-service jobs."""
    if remaining is None:
        return waiting_weight(job, net, depth)
    return remaining + inservice_continuation(job, net, depth)


# ---------------------------------------------------------------------------
# state views


def immediate_workload(state, at: float | None = None) -> np.ndarray:
    """Per-buffer expected work physically present: mean * queue + residual."""
    net = state.net
    t = state.clock if at is None else at
    queue = np.array([q.size for q in state.queues], dtype=float)
    return net.mean_service * queue + np.asarray(state.service_vector(at=t))


def scan_counted_counts(jobs, depth: int, num_buffers: int):
    """(counts_upto, destined_upto) per counter level, by full scan.

    counts_upto[c][i]: waiting jobs with counter <= c in buffer i.
    destined_upto[c][i]: the same plus jobs elsewhere whose pre-drawn route
    passes through i at a position within c.
    """
    upto = [[0] * num_buffers for _ in range(depth + 1)]
    destined = [[0] * num_buffers for _ in range(depth + 1)]
    for job in jobs:
        if job.counter > depth:
            continue
        for c in range(job.counter, depth + 1):
            upto[c][job.buffer] += 1
            destined[c][job.buffer] += 1
        r = job.counter
        for f in job.future:
            r += 1
            if r > depth:
                break
            for c in range(r, depth + 1):
                destined[c][f] += 1
    return upto, destined


@dataclass
class WorkloadView:
    """Counted queue and workload vectors at one counter level."""

    level: int
    queue_upto: np.ndarray        # waiting jobs with counter <= level
    queue_below: np.ndarray       # ... with counter < level
    destined_upto: np.ndarray     # in or destined for the buffer within level
    immediate: np.ndarray         # mean * queue + residual (all counters)
    work_below: np.ndarray
    work_upto: np.ndarray
    total_upto: np.ndarray        # counted total workload


def counted_workloads(state, level: int, at: float | None = None) -> WorkloadView:
    """Counted queues/workloads at `level`; needs pre-draw depth >= level."""
    net = state.net
    depth = state.opts.predraw_depth
    if level > depth:
        raise PredrawDepthInsufficient(
            f"counter level {level} exceeds pre-draw depth {depth}")
    t = state.clock if at is None else at
    I = net.num_buffers
    upto, destined = scan_counted_counts(state.iter_waiting(), level, I)
    q_upto = np.array(upto[level], dtype=float)
    q_dest = np.array(destined[level], dtype=float)
    q_below = np.array(upto[level - 1], dtype=float) if level >= 1 else np.zeros(I)

    if net.synchronized:
        v_upto = np.zeros(I)
        v_below = np.zeros(I)
        for j, rec in state.busy_records():
            rem = net.activities[j].rate * (rec.finish - t)
            if rec.job.counter <= level:
                v_upto[rec.job.buffer] += rem
            if rec.job.counter < level:
                v_below[rec.job.buffer] += rem
    else:
        v_upto = np.asarray(state.service_vector(at=t))
        v_below = v_upto
    m = net.mean_service
    return WorkloadView(
        level=level,
        queue_upto=q_upto,
        queue_below=q_below,
        destined_upto=q_dest,
        immediate=immediate_workload(state, at=t),
        work_below=m * q_below + v_below,
        work_upto=m * q_upto + v_upto,
        total_upto=m * q_dest + v_upto,
    )


@dataclass
class WeightTable:
    """Total expected-future-work of the three job populations."""

    past_route: float        # jobs beyond any pre-drawn information
    full_route: float        # jobs on pre-drawn routes of exactly the run depth
    short_route: float       # jobs on pre-drawn routes that exit early

    @property
    def high_counter(self) -> float:
        return self.past_route + self.full_route

    @property
    def total(self) -> float:
        return self.past_route + self.full_route + self.short_route


def total_weights(state, depth: int | None = None,
                  at: float | None = None) -> WeightTable:
    """Sum job weights by population; matches summing job_weight job by job."""
    net = state.net
    if depth is None:
        depth = state.opts.predraw_depth
    t = state.clock if at is None else at
    sums = {1: 0.0, 2: 0.0, 3: 0.0}
    for job in state.iter_waiting():
        sums[job_type(job, depth)] += waiting_weight(job, net, depth)
    for j, rec in state.busy_records():
        rem = net.activities[j].rate * (rec.finish - t)
        sums[job_type(rec.job, depth)] += rem + inservice_continuation(rec.job, net, depth)
    return WeightTable(sums[1], sums[2], sums[3])


# ---------------------------------------------------------------------------
# drift constants


@dataclass(frozen=True)
class GlobalConstants:
    """Every constant needed to evaluate the global Lyapunov function.

    residual_bound     bound on the expected leftover requirement of an
                       activity that restarts within a unit interval
                       (max of second moment over mean across buffers)
    window             integer drift-evaluation window length
    service_margin     min over buffers of E[mean - (service - rate_min)_+]
    window_gain        guaranteed drift gained per window by the timer boost
    depth              route pre-draw depth (exact route bound when finite)
    busy_weight        weight of the in-service total inside the high-counter
                       aggregate
    high_counter_gain  drift coefficient on high-counter queue mass
    counted_drift      per-window drift of one counted-workload quadratic
    shared_constant    common additive constant across the drift inequalities
    depth_weight       weight of the high-counter term in the global function
    """

    residual_bound: float
    window: int
    service_margin: float
    window_gain: float
    depth: int
    busy_weight: float
    high_counter_gain: float
    counted_drift: float
    shared_constant: float
    depth_weight: float
    rate_min: float
    mean_min: float
    mean_max: float
    bounded_routes: bool


def _tail_depth(net: ValidatedNetwork, window: int, budget: float) -> int:
    """Smallest x with window * sum_{d>=x} d*mean_max*mass_d <= budget, where
    mass_d is the external arrival mass still routed after d hops."""
    alpha = np.array([a.rate if a.kind != "none" else 0.0 for a in net.arrivals])
    mean_max = float(net.mean_service.max())
    ratio_cap = min(spectral_radius(net.routing) + 1e-6, 1.0 - 1e-9)
    masses = [float(alpha.sum())]
    vec = alpha
    # extend until the geometric tail bound is negligible against the budget
    for _ in range(100_000):
        vec = net.routing.T @ vec
        masses.append(float(vec.sum()))
        n = len(masses) - 1
        if masses[n] == 0.0:
            break
        stable = n >= 5 and all(
            masses[d + 1] <= ratio_cap * masses[d] + 1e-300 for d in range(n - 5, n)
        )
        q = ratio_cap
        tail = masses[n] * (n * q / (1 - q) + q / (1 - q) ** 2)
        if stable and window * mean_max * tail <= budget * 1e-3:
            break
    else:
        raise TailSeriesDiverges("routing tail did not converge")
    n = len(masses) - 1
    q = ratio_cap
    tail_beyond = 0.0 if masses[n] == 0.0 else masses[n] * (
        n * q / (1 - q) + q / (1 - q) ** 2)
    suffix = tail_beyond
    sums = [0.0] * (n + 2)
    sums[n + 1] = tail_beyond
    for d in range(n, -1, -1):
        suffix += d * masses[d]
        sums[d] = suffix
    for x in range(1, n + 2):
        if window * mean_max * sums[x] <= budget:
            return x
    raise TailSeriesDiverges("no admissible depth below the scan horizon")


def global_constants(net: ValidatedNetwork, cert) -> GlobalConstants:
    """Derive all drift constants from a checked quadratic certificate.

    `cert` must have passed the local check: its slack, drift coefficient and
    additive constant are taken as given.
    """
    residual_bound = max(s.second_moment / s.mean for s in net.services)
    rate_min = min(a.rate for a in net.activities)
    mean_min = float(net.mean_service.min())
    mean_max = float(net.mean_service.max())
    service_margin = min(
        s.mean - s.excess_mean(rate_min) for s in net.services)
    J = net.num_activities
    K = net.num_processors
    t_renewal = math.ceil(2.0 * J * residual_bound / rate_min + 1.0)
    t_restart = math.floor(2.0 * mean_max + 2.0)
    window = max(t_renewal, t_restart) + 1
    window_gain = cert.slack * service_margin / 2.0 ** (K + 2)

    bound = routes_bounded(net)
    if bound is not None:
        depth = bound
    else:
        if cert.slack <= 0:
            raise SlackNonPositive(
                "unbounded routes need a certificate with positive slack")
        depth = _tail_depth(net, window, window_gain)

    busy_weight = 2.0 * window_gain / (J * residual_bound)
    high_counter_gain = mean_min * window_gain
    counted_drift = cert.eta * mean_min
    shared_constant = max(cert.constant, 1.0) + (cert.constant - 1.0)
    depth_weight = counted_drift * (counted_drift / (2.0 * shared_constant)) ** depth
    return GlobalConstants(
        residual_bound=residual_bound,
        window=window,
        service_margin=service_margin,
        window_gain=window_gain,
        depth=depth,
        busy_weight=busy_weight,
        high_counter_gain=high_counter_gain,
        counted_drift=counted_drift,
        shared_constant=shared_constant,
        depth_weight=depth_weight,
        rate_min=rate_min,
        mean_min=mean_min,
        mean_max=mean_max,
        bounded_routes=bound is not None,
    )


# ---------------------------------------------------------------------------
# global Lyapunov evaluation


def _quad(coupling: np.ndarray, x: np.ndarray) -> float:
    return float(x @ coupling @ x)


def eval_global(state, constants: GlobalConstants, cert,
                at: float | None = None) -> float:
    """Global Lyapunov value by full state scan (reference implementation)."""
    net = state.net
    depth = constants.depth
    if state.opts.predraw_depth < depth:
        raise PredrawDepthInsufficient(
            f"run pre-draw depth {state.opts.predraw_depth} < required {depth}")
    t = state.clock if at is None else at
    ratio = constants.counted_drift / (2.0 * constants.shared_constant)
    value = 0.0
    for c in range(1, depth + 1):
        view = counted_workloads(state, c, at=t)
        value += ratio ** c * _quad(cert.coupling, view.total_upto)
    v1 = 0.0
    v2 = 0.0
    for j, rec in state.busy_records():
        rem = net.activities[j].rate * (rec.finish - t)
        v1 += rem
        v2 += rem * rem
    value += (2.0 * constants.shared_constant / constants.rate_min) * v2
    if not constants.bounded_routes:
        weights = total_weights(state, depth, at=t)
        g = weights.high_counter + constants.busy_weight * v1
        value += constants.depth_weight / (2.0 * constants.shared_constant) * g * g
    return value


class GlobalEvaluator:
    """Fast global Lyapunov evaluation from the engine's counted tracker.

    Call as evaluator(state, t); agrees with eval_global to rounding.
    """

    def __init__(self, net: ValidatedNetwork, cert, constants: GlobalConstants):
        self.net = net
        self.cert = cert
        self.constants = constants
        ratio = constants.counted_drift / (2.0 * constants.shared_constant)
        self.level_coef = [ratio ** c for c in range(constants.depth + 1)]
        self.residual_coef = 2.0 * constants.shared_constant / constants.rate_min
        self.tail_coef = (0.0 if constants.bounded_routes
                          else constants.depth_weight / (2.0 * constants.shared_constant))

    def __call__(self, state, at: float | None = None) -> float:
        constants = self.constants
        net = self.net
        tracker = state.tracker
        if tracker is None or tracker.depth < constants.depth:
            raise PredrawDepthInsufficient(
                "simulation must pre-draw routes at least to the constants' depth")
        t = state.clock if at is None else at
        depth = constants.depth
        I = net.num_buffers
        m = net.mean_service

        v1 = 0.0
        v2 = 0.0
        v_buf = [0.0] * I
        busy12_res = 0.0
        sync = net.synchronized
        v_upto = [[0.0] * I for _ in range(depth + 1)] if sync else None
        for j, rec in state.busy_records():
            rem = net.activities[j].rate * (rec.finish - t)
            v1 += rem
            v2 += rem * rem
            v_buf[rec.job.buffer] += rem
            if job_type(rec.job, depth) != 3:
                busy12_res += rem
            if sync and rec.job.counter <= depth:
                for c in range(rec.job.counter, depth + 1):
                    v_upto[c][rec.job.buffer] += rem

        value = 0.0
        for c in range(1, depth + 1):
            v_shape = v_upto[c] if sync else v_buf
            w = np.array([m[i] * tracker.qhat[c][i] + v_shape[i] for i in range(I)])
            value += self.level_coef[c] * _quad(self.cert.coupling, w)
        value += self.residual_coef * v2
        if self.tail_coef:
            g = tracker.m1m2_wait + tracker.m1m2_busy + busy12_res \
                + constants.busy_weight * v1
            value += self.tail_coef * g * g
        return value


# ---------------------------------------------------------------------------
# trajectory estimators


@dataclass
class StabilityReport:
    verdict: str                 # diverging | bounded-evidence | inconclusive
    time_avg_norm: float
    tail_slope: float
    tail_middle_ratio: float
    samples: int
    slope_threshold: float
    ratio_threshold: float


def fit_slope(times: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of values against times."""
    t = times - times.mean()
    denom = float(t @ t)
    if denom == 0.0:
        return 0.0
    return float(t @ (values - values.mean())) / denom


def stability_estimate(trajectories, slope_threshold: float = 0.01,
                       ratio_threshold: float = 2.0) -> StabilityReport:
    """Divergence evidence from sampled norms; never a proof either way.

    Accepts one trajectory or a list; a list is averaged pointwise across
    replications (requiring a common sampling grid).
    """
    if isinstance(trajectories, (list, tuple)):
        times = trajectories[0].times
        for traj in trajectories[1:]:
            if len(traj.times) != len(times):
                raise ValueError("replications must share a sampling grid")
        norms = np.mean([t.norms for t in trajectories], axis=0)
    else:
        times = trajectories.times
        norms = trajectories.norms
    n = len(times)
    if n < 100:
        raise TrajectoryTooShort(f"need >= 100 samples, got {n}")
    horizon = times[-1]
    half = times >= horizon / 2.0
    slope = fit_slope(times[half], norms[half])
    middle = norms[(times >= horizon / 3.0) & (times < 2.0 * horizon / 3.0)]
    tail = norms[times >= 2.0 * horizon / 3.0]
    mid_avg = float(middle.mean()) if len(middle) else 0.0
    tail_avg = float(tail.mean()) if len(tail) else 0.0
    if mid_avg > 0:
        ratio = tail_avg / mid_avg
    else:
        ratio = 1.0 if tail_avg == 0 else math.inf
    if slope > slope_threshold:
        verdict = "diverging"
    elif ratio < ratio_threshold:
        verdict = "bounded-evidence"
    else:
        verdict = "inconclusive"
    return StabilityReport(
        verdict=verdict,
        time_avg_norm=float(norms.mean()),
        tail_slope=slope,
        tail_middle_ratio=ratio,
        samples=n,
        slope_threshold=slope_threshold,
        ratio_threshold=ratio_threshold,
    )


@dataclass
class DriftBin:
    lo: float
    hi: float
    count: int
    mean_increment: float
    stderr: float


@dataclass
class DriftReport:
    verdict: str                 # drift-consistent | not-drift-consistent
    decay_rate: float            # b in the fitted model  increment ~ a - b*|Y|
    bins: list[DriftBin]
    top_bins_negative: bool
    top_bins_significant: bool
    increments: int


def drift_estimate(traj, num_bins: int = 8, min_bin_count: int = 5) -> DriftReport:
    """Window-to-window increments of the global Lyapunov column, binned by
    state size at the window start."""
    if traj.lglo is None:
        raise ValueError("trajectory carries no global Lyapunov column")
    if len(traj.times) < 2:
        raise InsufficientSamples("need at least two samples")
    increments = np.diff(traj.lglo)
    sizes = traj.norms[:-1]
    if len(increments) < 30:
        raise InsufficientSamples(f"need >= 30 increments, got {len(increments)}")

    # logarithmic bins anchored at one job: states below a single job of mass
    # land in one underflow bin instead of stretching the geometric range
    lo = max(float(sizes.min()), 1.0)
    hi = float(sizes.max())
    if hi <= lo:
        edges = np.array([min(float(sizes.min()), lo), lo + 1.0])
    else:
        edges = np.geomspace(lo, hi, num_bins + 1)
        if float(sizes.min()) < lo:
            edges = np.concatenate(([float(sizes.min())], edges))
    edges[-1] = np.nextafter(edges[-1], np.inf)
    bins: list[DriftBin] = []
    for b in range(len(edges) - 1):
        mask = (sizes >= edges[b]) & (sizes < edges[b + 1])
        n = int(mask.sum())
        if n < min_bin_count:
            continue
        vals = increments[mask]
        stderr = float(vals.std(ddof=1)) / n ** 0.5 if n > 1 else 0.0
        bins.append(DriftBin(float(edges[b]), float(edges[b + 1]), n,
                             float(vals.mean()), stderr))
    decay = -fit_slope(sizes, increments)
    top = bins[-2:]
    top_negative = bool(top) and all(b.mean_increment < 0 for b in top)
    top_significant = bool(top) and all(
        abs(b.mean_increment) > 2.0 * b.stderr for b in top)
    verdict = ("drift-consistent"
               if decay > 0 and top_negative else "not-drift-consistent")
    return DriftReport(
        verdict=verdict,
        decay_rate=decay,
        bins=bins,
        top_bins_negative=top_negative,
        top_bins_significant=top_significant,
        increments=len(increments),
    )


# ---------------------------------------------------------------------------
# report serialization


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, str):
        return f'"{v}"'
    return str(v)


def format_report(pairs: dict) -> str:
    return "\n".join(f"{k} = {_fmt_value(v)}" for k, v in pairs.items()) + "\n"


def write_summary(traj, path) -> None:
    """Run summary with the documented keys."""
    half = traj.times >= traj.horizon / 2.0
    pairs = {
        "time_avg_norm": float(traj.norms.mean()),
        "tail_slope": fit_slope(traj.times[half], traj.norms[half]),
        "seed": traj.seed,
        "events_processed": traj.events_processed,
    }
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_report(pairs))


def write_drift_csv(report: DriftReport, path, delimiter: str = ",") -> None:
    header = ["|Y|_lo", "|Y|_hi", "n", "mean_increment", "stderr"]
    lines = [delimiter.join(header)]
    for b in report.bins:
        lines.append(delimiter.join([
            format(b.lo, ".17g"), format(b.hi, ".17g"), str(b.count),
            format(b.mean_increment, ".17g"), format(b.stderr, ".17g"),
        ]))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
