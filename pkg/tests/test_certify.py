import math

import numpy as np
import pytest

from poolcert.certify import (batch_certify, binary_search, verify_at,
                              SEARCH_ITERATIONS)
from poolcert.model import VerificationQuery
from poolcert.pooling import PoolRule
from poolcert.suite import random_network, random_query

from conftest import tiny_affine_net


def stub_query():
    return VerificationQuery(np.array([0.5, 0.5]), 0, math.inf)


def search_with_oracle(oracle, eps0=0.005):
    net = tiny_affine_net(np.eye(2), np.zeros(2))
    return binary_search(net, stub_query(), eps0=eps0, _oracle=oracle)


class TestSearchSchedule:
    def test_always_certified_trace(self):
        """Hand trace: five doublings to 0.16... no. Doublings run 0.005,
        0.01, ..., 0.64, then midpoint caps take over: 0.82, 0.91, 0.955,
        0.9775, 0.98875, 0.994375, 0.9971875; the final update leaves the
        untested candidate 0.99859375."""
        result = search_with_oracle(lambda eps: True)
        tested = [t.eps for t in result.trace]
        expected = [0.005, 0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64,
                    0.82, 0.91, 0.955, 0.9775, 0.98875, 0.994375, 0.9971875]
        np.testing.assert_allclose(tested, expected, rtol=1e-12)
        assert result.certified_radius == pytest.approx(0.9971875, abs=1e-12)
        assert result.raw_eps_l == pytest.approx(0.99859375, abs=1e-12)

    def test_always_unknown_halves_forever(self):
        result = search_with_oracle(lambda eps: False)
        tested = [t.eps for t in result.trace]
        np.testing.assert_allclose(tested, [0.005 * 0.5 ** k for k in range(15)],
                                   rtol=1e-12)
        assert result.certified_radius == 0.0

    def test_threshold_stub_converges_to_theta(self):
        theta = 0.1
        result = search_with_oracle(lambda eps: eps <= theta)
        assert result.analyzer_calls == SEARCH_ITERATIONS
        # the radius lands in (theta - 2^-10, theta]
        assert theta - 2.0 ** -10 < result.certified_radius <= theta
        # every certified trace entry is at most the reported radius
        certified = [t.eps for t in result.trace if t.certified]
        assert result.certified_radius == pytest.approx(max(certified))

    def test_exactly_fifteen_iterations_any_pattern(self, rng):
        for _ in range(20):
            theta = float(rng.uniform(0, 1))
            result = search_with_oracle(lambda eps: eps <= theta)
            assert result.analyzer_calls == SEARCH_ITERATIONS

    def test_bracket_invariants(self, rng):
        """eps_min only grows, eps_max only shrinks, and eps_min is always a
        radius that actually certified."""
        for theta in (0.003, 0.1, 0.42, 0.9):
            result = search_with_oracle(lambda eps: eps <= theta)
            eps_min, eps_max = 0.0, 1.0
            for entry in result.trace:
                if entry.certified:
                    assert entry.eps <= theta
                    eps_min = max(eps_min, entry.eps)
                else:
                    eps_max = min(eps_max, entry.eps)
                assert eps_min <= eps_max
            assert result.certified_radius == pytest.approx(eps_min)

    def test_eps0_is_configurable(self):
        result = search_with_oracle(lambda eps: False, eps0=0.00005)
        assert result.trace[0].eps == pytest.approx(0.00005)


class TestVerifyAt:
    def test_golden_network_unknown_at_radius_one(self, golden_net, golden_query):
        verdict = verify_at(golden_net, golden_query, PoolRule.MAXLIN)
        assert not verdict.certified

    def test_zero_radius_certifies_correct_center(self):
        net = tiny_affine_net([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0])
        query = VerificationQuery(np.array([0.9, 0.1]), 0, math.inf, eps=0.0)
        assert verify_at(net, query).certified

    def test_zero_radius_on_misclassified_center(self):
        net = tiny_affine_net([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0])
        query = VerificationQuery(np.array([0.1, 0.9]), 0, math.inf, eps=0.0)
        verdict = verify_at(net, query)
        assert not verdict.certified
        assert verdict.margin < 0

    def test_requires_fixed_eps(self):
        net = tiny_affine_net(np.eye(2), np.zeros(2))
        with pytest.raises(ValueError):
            verify_at(net, stub_query())


class TestBinarySearchEndToEnd:
    def test_misclassified_center_yields_zero_radius(self):
        net = tiny_affine_net([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0])
        query = VerificationQuery(np.array([0.1, 0.9]), 0, math.inf)
        result = binary_search(net, query)
        assert result.misclassified
        assert result.certified_radius == 0.0
        assert result.analyzer_calls == 0

    def test_certified_radius_reverifies(self):
        net = random_network(1)
        query = random_query(net, 1)
        result = binary_search(net, query)
        if result.certified_radius > 0:
            fixed = VerificationQuery(query.x0, query.label, query.norm,
                                      eps=result.certified_radius)
            assert verify_at(net, fixed).certified

    def test_constant_network_certifies_to_the_cap(self):
        # all-zero weights with a bias favoring the label certify any radius
        net = tiny_affine_net(np.zeros((2, 2)), [1.0, 0.0])
        query = VerificationQuery(np.array([0.5, 0.5]), 0, math.inf)
        result = binary_search(net, query)
        assert result.certified_radius == pytest.approx(0.9971875, abs=1e-12)


class TestBatchCertify:
    def test_empty_batch(self):
        net = tiny_affine_net(np.eye(2), np.zeros(2))
        results, aggregates = batch_certify(net, [])
        assert results == []
        assert aggregates is None

    def test_identical_queries_identical_results(self):
        net = random_network(2)
        query = random_query(net, 2)
        results, aggregates = batch_certify(net, [query] * 3)
        radii = {r.certified_radius for r in results}
        assert len(radii) == 1
        assert aggregates.mean_certified_radius == pytest.approx(radii.pop())

    def test_worker_count_does_not_change_results(self):
        net = random_network(4)
        queries = [random_query(net, s) for s in range(6)]
        solo, _ = batch_certify(net, queries, workers=1)
        pooled, _ = batch_certify(net, queries, workers=8)
        for a, b in zip(solo, pooled):
            assert a.certified_radius == b.certified_radius
            assert [t.eps for t in a.trace] == [t.eps for t in b.trace]
            assert [t.certified for t in a.trace] == [t.certified for t in b.trace]

    def test_misclassified_excluded_from_aggregates(self):
        net = tiny_affine_net([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0])
        good = VerificationQuery(np.array([0.9, 0.1]), 0, math.inf)
        bad = VerificationQuery(np.array([0.1, 0.9]), 0, math.inf)
        results, aggregates = batch_certify(net, [good, bad])
        assert results[1].misclassified
        assert aggregates.queries_misclassified == 1
        assert aggregates.queries_counted == 1
        assert aggregates.mean_certified_radius == pytest.approx(
            results[0].certified_radius)

    def test_rule_dominance_over_interval_constant_in_the_mean(self):
        """Certified radii under the tight pool rule dominate plain interval
        bounds in aggregate. Individual queries can flip (the selection
        rule's lower bound composed through a flat activation bound can
        trail the constant floor), so the mean is the reliable claim; the
        acceptance suite reports the per-query tally."""
        gaps = []
        for seed in range(6):
            net = random_network(seed)
            for p in (1.0, 2.0, math.inf):
                query = random_query(net, seed, p)
                tight = binary_search(net, query, PoolRule.MAXLIN)
                loose = binary_search(net, query, PoolRule.INTERVAL_CONSTANT)
                gaps.append(tight.certified_radius - loose.certified_radius)
        assert np.mean(gaps) > 0.0
