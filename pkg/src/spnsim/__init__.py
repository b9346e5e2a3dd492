"""Simulation and quadratic-certificate toolkit for stochastic processing networks."""

from .network import (
    Activity,
    ArrivalModel,
    EffectiveLoad,
    InvalidNetwork,
    NetworkSpec,
    NonConvergentRouting,
    PartitionNotProcessorIndependent,
    ServiceModel,
    SynchronizedShapeViolation,
    ValidatedNetwork,
    activity,
    activity_interchangeable,
    deterministic_service,
    discrete_service,
    effective_rates,
    exponential_service,
    finest_partition,
    poisson_arrivals,
    routes_bounded,
    slotted_arrivals,
    split_capacity,
    uniform_service,
    validate,
)
from .scheduling import (
    EnumerationTooLarge,
    EpsLrfs,
    Lrfs,
    StaticPriority,
    enumerate_maximal,
    is_feasible,
    is_maximal_activity,
    is_maximal_wrt,
    parse_policy,
    support_pattern,
)
from .engine import (
    SimOptions,
    Trajectory,
    run_replications,
    simulate,
    write_trajectory_csv,
)
from .lyapunov import (
    CheckResult,
    QuadraticCertificate,
    check_local,
    check_structural,
    construct_comm,
    construct_psn,
    make_certificate,
    max_slack,
    sample_check,
)
from .diagnostics import (
    GlobalConstants,
    GlobalEvaluator,
    counted_workloads,
    drift_estimate,
    eval_global,
    global_constants,
    immediate_workload,
    job_weight,
    stability_estimate,
    total_weights,
)
from .examples import build_example, example_names

__version__ = "0.1.0"
