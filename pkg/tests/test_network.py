"""Network validation, effective rates, structural predicates."""

import numpy as np
import pytest

from spnsim import network
from spnsim.network import (
    NO_ARRIVALS,
    Activity,
    NetworkSpec,
    NonConvergentRouting,
    PartitionNotProcessorIndependent,
    SynchronizedShapeViolation,
    activity_interchangeable,
    deterministic_service,
    discrete_service,
    effective_rates,
    exponential_service,
    finest_partition,
    poisson_arrivals,
    routes_bounded,
    split_capacity,
    uniform_service,
    validate,
)

from conftest import random_spec


def series_rates(alpha, routing, terms=200):
    """Oracle: partial sums of the propagation series sum_d (P^T)^d alpha."""
    alpha = np.asarray(alpha, dtype=float)
    total = alpha.copy()
    vec = alpha.copy()
    for _ in range(terms):
        vec = routing.T @ vec
        total += vec
    return total


def test_effective_rates_identity_routing():
    eff = effective_rates([2.0, 3.0], np.zeros((2, 2)), [1.0, 1.0])
    assert np.allclose(eff.throughput, [2.0, 3.0])


def test_effective_rates_rybko_stolyar(rs_net):
    assert np.allclose(rs_net.throughput, [1, 1, 1, 1])
    assert np.allclose(rs_net.load, [0.1, 0.6, 0.1, 0.6])


def test_effective_rates_partial_series_oracle():
    routing = np.array([[0.0, 0.5], [0.0, 0.0]])
    eff = effective_rates([1.0, 0.0], routing, [1.0, 1.0])
    assert np.allclose(eff.throughput, [1.0, 0.5])
    assert np.allclose(eff.throughput, series_rates([1.0, 0.0], routing))


def test_effective_rates_random_specs_match_series():
    rng = np.random.default_rng(7)
    for _ in range(20):
        spec = random_spec(rng)
        net = validate(spec)
        alpha = [a.rate if a.kind != "none" else 0.0 for a in spec.arrivals]
        assert np.allclose(net.throughput, series_rates(alpha, spec.routing),
                           rtol=1e-9, atol=1e-12)
        # effective rates dominate external rates
        assert np.all(net.throughput >= np.asarray(alpha) - 1e-12)


def test_nonconvergent_routing_rejected():
    spec = NetworkSpec(
        arrivals=(poisson_arrivals(1.0), NO_ARRIVALS),
        services=(deterministic_service(0.5), deterministic_service(0.5)),
        activities=(Activity(0, frozenset([0])), Activity(1, frozenset([1]))),
        num_processors=2,
        routing=np.array([[1.0, 0.0], [0.0, 0.0]]),
    )
    with pytest.raises(NonConvergentRouting):
        validate(spec)


def test_partition_sharing_processor_rejected():
    spec = NetworkSpec(
        arrivals=(poisson_arrivals(0.5), NO_ARRIVALS),
        services=(deterministic_service(0.5), deterministic_service(0.5)),
        activities=(Activity(0, frozenset([0])), Activity(1, frozenset([0]))),
        num_processors=1,
        routing=np.zeros((2, 2)),
        partition=((0,), (1,)),
    )
    with pytest.raises(PartitionNotProcessorIndependent):
        validate(spec)


def test_synchronized_shape_violations():
    spec = NetworkSpec(
        arrivals=(poisson_arrivals(0.5),),
        services=(deterministic_service(0.5),),
        activities=(Activity(0, frozenset([0])),),
        num_processors=1,
        routing=np.zeros((1, 1)),
        synchronized=True,
    )
    with pytest.raises(SynchronizedShapeViolation):
        validate(spec)


def test_rybko_stolyar_derived_sets(rs_net):
    assert rs_net.buffer_activities == ((0,), (1,), (2,), (3,))
    assert rs_net.activities[0].processors == frozenset([0])
    assert rs_net.component_of == (0, 1, 1, 0)


def test_validate_idempotent(rs_net):
    again = validate(rs_net)
    assert np.array_equal(again.throughput, rs_net.throughput)
    assert again.buffer_activities == rs_net.buffer_activities
    assert again.partition == rs_net.partition


def test_activity_interchangeable(rs_net):
    for i in range(4):
        assert activity_interchangeable(rs_net, i, i)
    assert activity_interchangeable(rs_net, 0, 3)
    assert activity_interchangeable(rs_net, 1, 2)
    assert not activity_interchangeable(rs_net, 0, 1)


def test_routes_bounded():
    zero = NetworkSpec(
        arrivals=(poisson_arrivals(1.0),),
        services=(deterministic_service(0.5),),
        activities=(Activity(0, frozenset([0])),),
        num_processors=1,
        routing=np.zeros((1, 1)),
    )
    assert routes_bounded(validate(zero)) == 1


def test_routes_bounded_rybko_stolyar(rs_net):
    assert routes_bounded(rs_net) == 2
    assert not np.linalg.matrix_power(rs_net.routing, 2).any()
    assert np.linalg.matrix_power(rs_net.routing, 1).any()


def test_routes_unbounded_on_cycle():
    spec = NetworkSpec(
        arrivals=(poisson_arrivals(0.1),),
        services=(deterministic_service(0.5),),
        activities=(Activity(0, frozenset([0])),),
        num_processors=1,
        routing=np.array([[0.5]]),
    )
    assert routes_bounded(validate(spec)) is None


def test_routes_bounded_matches_matrix_power_on_random_specs():
    rng = np.random.default_rng(13)
    for _ in range(20):
        net = validate(random_spec(rng))
        bound = routes_bounded(net)
        if bound is None:
            # a cycle must exist in the support digraph: some power keeps mass
            power = np.linalg.matrix_power(net.routing > 0, net.num_buffers)
            assert power.any()
        else:
            assert not np.linalg.matrix_power(net.routing, bound).any()
            assert bound == 1 or np.linalg.matrix_power(net.routing, bound - 1).any()


def test_service_model_moments():
    det = deterministic_service(0.3)
    assert det.second_moment == pytest.approx(0.09)
    expo = exponential_service(0.5)
    assert expo.second_moment == pytest.approx(0.5)
    uni = uniform_service(0.2, 0.8)
    assert uni.mean == pytest.approx(0.5)
    assert uni.second_moment == pytest.approx((0.2**2 + 0.2 * 0.8 + 0.8**2) / 3)
    disc = discrete_service([0.2, 0.8], [0.25, 0.75])
    assert disc.mean == pytest.approx(0.65)
    assert disc.second_moment == pytest.approx(0.25 * 0.04 + 0.75 * 0.64)


def test_excess_mean_against_numeric_quadrature():
    # oracle: Monte Carlo / dense-grid expectation of (sample - cut)_+
    models = [deterministic_service(0.7), exponential_service(0.5),
              uniform_service(0.2, 1.0), discrete_service([0.3, 0.9], [0.4, 0.6])]
    rng = np.random.default_rng(3)
    for svc in models:
        draws = np.array([svc.sample(rng) for _ in range(200_000)])
        for cut in (0.0, 0.25, 0.6, 1.2):
            estimate = np.maximum(draws - cut, 0.0).mean()
            assert svc.excess_mean(cut) == pytest.approx(estimate, abs=4e-3)
        assert svc.excess_mean(cut=0.0) == pytest.approx(svc.mean, rel=1e-12)


def test_finest_partition_groups_shared_processors(rs_net):
    spec = rs_net.spec()
    assert finest_partition(spec) == ((0, 3), (1, 2))


def test_split_capacity_clones_processors():
    spec = NetworkSpec(
        arrivals=(poisson_arrivals(1.0),),
        services=(deterministic_service(0.2),),
        activities=(Activity(0, frozenset([0])),),
        num_processors=1,
        routing=np.zeros((1, 1)),
    )
    wide = split_capacity(spec, {0: 3})
    assert wide.num_processors == 3
    assert len(wide.activities) == 3
    assert {next(iter(a.processors)) for a in wide.activities} == {0, 1, 2}
    validate(wide)
