"""Tests for dependence gaps, mixing envelopes, and the epsilon certificate."""

import math

import numpy as np
import pytest

import oracles
from regimeclt.chain import TransitionMatrix, mixing_rate
from regimeclt.errors import EmptyConditioningEvent, TooManyEventsForExact
from regimeclt.independence import (
    RectEvent,
    chained_gap_bound,
    conditional_gap_exact,
    default_event_family,
    epsilon_certificate,
    joint_product_gap,
    observable_event_family,
)
from regimeclt.process import EmissionSpec, Gaussian, ModelSpec
from regimeclt.seeds import SeedSpec
from tests_support import random_chain_pool

FULL = RectEvent(frozenset({1, 2}))
STATE1 = RectEvent(frozenset({1}))
STATE2 = RectEvent(frozenset({2}))


def _gaussian_model(rows: np.ndarray) -> ModelSpec:
    comps = tuple(Gaussian(-2.0 + 1.5 * j, 0.6 + 0.2 * j) for j in range(rows.shape[0]))
    return ModelSpec(TransitionMatrix(rows), EmissionSpec(comps))


class TestRectEvent:
    def test_validation(self):
        with pytest.raises(ValueError):
            RectEvent(frozenset())
        with pytest.raises(ValueError):
            RectEvent(frozenset({0, 1}))
        with pytest.raises(ValueError):
            RectEvent(frozenset({1}), 2.0, 2.0)

    def test_indicator_half_open(self):
        ev = RectEvent(frozenset({1}), 0.0, 1.0)
        states = np.array([1, 1, 1, 2])
        obs = np.array([0.0, 0.5, 1.0, 0.5])
        np.testing.assert_array_equal(
            ev.indicator(states, obs), [False, True, True, False]
        )

    def test_weights(self, uniform_model):
        # Uniform(-1, 0.5) has mass 1/3 in (0, 0.5]; the state mask zeroes
        # the other component.
        ev = RectEvent(frozenset({1}), 0.0, 0.5)
        np.testing.assert_allclose(ev.weights(uniform_model), [1.0 / 3.0, 0.0])

    def test_weights_reject_unknown_regime(self, bench_model):
        with pytest.raises(ValueError):
            RectEvent(frozenset({3})).weights(bench_model)


class TestConditionalGap:
    def test_matches_enumeration(self, bench_model):
        w_b = RectEvent(frozenset({1, 2}), -0.5, 1.2).weights(bench_model)
        target = RectEvent(frozenset({2}), -math.inf, 0.3)
        w_a = target.weights(bench_model)
        pi = bench_model.stationary()
        for tau in (1, 2, 3):
            joint = oracles.enumerate_joint_probability(
                pi, bench_model.chain.p, [0, tau], [w_b, w_a]
            )
            expected = abs(joint / float(pi @ w_b) - float(pi @ w_a))
            rep = conditional_gap_exact(
                bench_model, target, RectEvent(frozenset({1, 2}), -0.5, 1.2), tau
            )
            assert rep.gap_estimate == pytest.approx(expected, abs=1e-12)
            assert rep.std_error == 0.0 and rep.method == "exact"

    def test_single_regime_targets_respect_envelope(self, bench_model, uniform_model):
        conds = [
            FULL,
            STATE1,
            RectEvent(frozenset({1, 2}), -math.inf, 0.0),
            RectEvent(frozenset({2}), -0.4, math.inf),
        ]
        targets = [STATE1, STATE2, RectEvent(frozenset({1}), -math.inf, 0.25), FULL]
        for model in (bench_model, uniform_model):
            for tau in range(1, 31):
                for ev_b in conds:
                    for ev_a in targets:
                        rep = conditional_gap_exact(model, ev_a, ev_b, tau)
                        assert rep.gap_estimate <= rep.theoretical_bound + 1e-12

    def test_envelope_on_random_chains(self):
        for rows in random_chain_pool(8, seed=515, n_max=5):
            model = _gaussian_model(rows)
            ev_b = RectEvent(frozenset({1}), -math.inf, -1.0)
            for j in range(1, model.n_states + 1):
                for tau in (1, 3, 7, 15):
                    rep = conditional_gap_exact(model, RectEvent(frozenset({j})), ev_b, tau)
                    assert rep.gap_estimate <= rep.theoretical_bound + 1e-12

    def test_iid_gap_is_zero(self, iid_model):
        rep = conditional_gap_exact(
            iid_model, RectEvent(frozenset({1}), -math.inf, 0.5), RectEvent(frozenset({1})), 4
        )
        assert rep.gap_estimate <= 1e-15
        assert rep.theoretical_bound == 0.0

    def test_empty_conditioning_event(self, uniform_model):
        with pytest.raises(EmptyConditioningEvent):
            conditional_gap_exact(uniform_model, FULL, RectEvent(frozenset({1}), 2.0, 3.0), 1)

    def test_tau_must_be_positive(self, bench_model):
        with pytest.raises(ValueError):
            conditional_gap_exact(bench_model, FULL, FULL, 0)


class TestJointProductGap:
    def test_matches_enumeration(self, bench_model):
        events = [
            RectEvent(frozenset({1}), -math.inf, 0.0),
            FULL,
            RectEvent(frozenset({2}), -1.0, 2.5),
        ]
        lags = (2, 1)
        rep = joint_product_gap(bench_model, events, lags)
        pi = bench_model.stationary()
        weights = [ev.weights(bench_model) for ev in events]
        joint = oracles.enumerate_joint_probability(
            pi, bench_model.chain.p, [0, 2, 3], weights
        )
        product = float(np.prod([pi @ w for w in weights]))
        assert rep.gap_estimate == pytest.approx(abs(joint - product), abs=1e-13)

    def test_matches_enumeration_three_states(self):
        rows = random_chain_pool(1, seed=99, n_min=3, n_max=3)[0]
        model = _gaussian_model(rows)
        events = [
            RectEvent(frozenset({2}), -math.inf, -0.5),
            RectEvent(frozenset({1, 3})),
        ]
        rep = joint_product_gap(model, events, (3,))
        pi = model.stationary()
        weights = [ev.weights(model) for ev in events]
        joint = oracles.enumerate_joint_probability(pi, model.chain.p, [0, 3], weights)
        product = float(np.prod([pi @ w for w in weights]))
        assert rep.gap_estimate == pytest.approx(abs(joint - product), abs=1e-13)

    def test_full_space_events_give_zero_gap(self, bench_model):
        rep = joint_product_gap(bench_model, [FULL, FULL, FULL], (1, 4))
        assert rep.gap_estimate <= 1e-15

    def test_iid_gap_is_zero(self, iid_model):
        one = RectEvent(frozenset({1}), -math.inf, 0.7)
        rep = joint_product_gap(iid_model, [one, one], (5,))
        assert rep.gap_estimate <= 1e-15

    def test_mc_agrees_with_exact(self, bench_model):
        events = [STATE1, RectEvent(frozenset({2}), -math.inf, 0.5), FULL]
        exact = joint_product_gap(bench_model, events, (3, 2))
        mc = joint_product_gap(
            bench_model, events, (3, 2), method="mc", replicates=30_000, seed=SeedSpec(2024, 9)
        )
        assert mc.std_error > 0.0
        assert abs(mc.gap_estimate - exact.gap_estimate) <= 4 * mc.std_error

    def test_mc_deterministic_in_seed(self, bench_model):
        events = [STATE1, STATE2]
        a = joint_product_gap(
            bench_model, events, (2,), method="mc", replicates=5_000, seed=SeedSpec(7, 1)
        )
        b = joint_product_gap(
            bench_model, events, (2,), method="mc", replicates=5_000, seed=SeedSpec(7, 1)
        )
        assert a.gap_estimate == b.gap_estimate and a.std_error == b.std_error

    def test_argument_errors(self, bench_model):
        with pytest.raises(ValueError):
            joint_product_gap(bench_model, [FULL], ())
        with pytest.raises(ValueError):
            joint_product_gap(bench_model, [FULL, FULL], (1, 2))
        with pytest.raises(ValueError):
            joint_product_gap(bench_model, [FULL, FULL], (0,))
        with pytest.raises(ValueError):
            joint_product_gap(bench_model, [FULL, FULL], (1,), method="mc")
        with pytest.raises(TooManyEventsForExact):
            joint_product_gap(bench_model, [FULL] * 7, (1,) * 6)


class TestEnvelopes:
    def test_multiplicative_envelope_fails_where_chained_holds(self, bench_model):
        # Regression: triple state-2 events at spacings (10, 10) exceed the
        # k c alpha^(sum lags) envelope while the chained form still covers
        # the gap. This is why downstream checks use the chained bound.
        prof = mixing_rate(bench_model.chain, s_max=40)
        rep = joint_product_gap(bench_model, [STATE2, STATE2, STATE2], (10, 10))
        assert rep.gap_estimate == pytest.approx(0.0043030292685892, rel=1e-10)
        assert rep.gap_estimate > rep.theoretical_bound
        assert rep.gap_estimate <= chained_gap_bound(prof, (10, 10))

    def test_chained_bound_on_random_chains(self):
        for rows in random_chain_pool(6, seed=808, n_max=4):
            model = _gaussian_model(rows)
            prof = mixing_rate(model.chain, s_max=40)
            family = default_event_family(model, (0.3, 0.7))
            for lags in [(1, 1), (2, 5), (4, 4)]:
                bound = chained_gap_bound(prof, lags)
                eps = epsilon_certificate(model, lags, profile=prof)
                assert eps <= bound + 1e-12
            # Spot-check individual tuples too, not just the family max.
            for ev in family[:4]:
                rep = joint_product_gap(model, [ev, ev, ev], (3, 6), profile=prof)
                assert rep.gap_estimate <= chained_gap_bound(prof, (3, 6)) + 1e-12

    def test_chained_bound_value(self, bench_chain):
        prof = mixing_rate(bench_chain, s_max=30)
        expected = 2.0 * prof.c * (prof.alpha**3 + prof.alpha**7)
        assert chained_gap_bound(prof, (3, 7)) == pytest.approx(expected, rel=1e-12)


class TestEpsilonCertificate:
    def test_benchmark_frozen_values(self, bench_model):
        assert epsilon_certificate(bench_model, (5, 5)) == pytest.approx(
            0.0518909277703699, rel=1e-10
        )
        assert epsilon_certificate(bench_model, (5,)) == pytest.approx(
            0.0373488888888890, rel=1e-10
        )

    def test_maximum_attained_by_pure_regime_tuple(self, bench_model):
        # The certifying family includes pure-regime events; the largest gap
        # at (5, 5) comes from the all-state-1 tuple.
        eps = epsilon_certificate(bench_model, (5, 5))
        rep = joint_product_gap(bench_model, [STATE1, STATE1, STATE1], (5, 5))
        assert eps == pytest.approx(rep.gap_estimate, rel=1e-12)

    def test_decreasing_in_lags(self, bench_model):
        values = [
            epsilon_certificate(bench_model, (t, t)) for t in (1, 2, 5, 8)
        ]
        assert values == sorted(values, reverse=True)

    def test_observation_only_family_is_strictly_smaller(self, bench_model):
        eps_regime = epsilon_certificate(bench_model, (5, 5))
        eps_obs = epsilon_certificate(
            bench_model, (5, 5), base_events=observable_event_family(bench_model)
        )
        assert eps_obs == pytest.approx(0.0241105806295632, rel=1e-9)
        assert eps_obs < eps_regime

    def test_iid_certificate_is_zero(self, iid_model):
        assert epsilon_certificate(iid_model, (3,)) <= 1e-14

    def test_explicit_family_matches_product_construction(self, bench_model):
        import itertools

        base = default_event_family(bench_model, (0.5,))
        eps_base = epsilon_certificate(bench_model, (4,), base_events=base)
        eps_family = epsilon_certificate(
            bench_model, (4,), family=itertools.product(base, repeat=2)
        )
        assert eps_base == pytest.approx(eps_family, rel=1e-12)

    def test_mc_certificate_is_conservative(self, bench_model):
        base = default_event_family(bench_model, (0.5,))
        exact = epsilon_certificate(bench_model, (3,), base_events=base)
        mc = epsilon_certificate(
            bench_model,
            (3,),
            base_events=base,
            method="mc",
            replicates=30_000,
            seed=SeedSpec(31, 4),
        )
        assert mc >= exact
        assert mc <= exact + 0.03

    def test_argument_errors(self, bench_model):
        with pytest.raises(ValueError):
            epsilon_certificate(bench_model, ())
        with pytest.raises(ValueError):
            epsilon_certificate(bench_model, (0,))
        with pytest.raises(ValueError):
            epsilon_certificate(
                bench_model, (1,), family=[(FULL, FULL)], base_events=[FULL]
            )
        with pytest.raises(ValueError):
            epsilon_certificate(bench_model, (1,), family=[(FULL,)])
        with pytest.raises(ValueError):
            epsilon_certificate(bench_model, (1,), method="mc")
        with pytest.raises(TooManyEventsForExact):
            epsilon_certificate(bench_model, (1,) * 6, base_events=[FULL, STATE1])


class TestEventFamilies:
    def test_default_family_composition(self, bench_model):
        family = default_event_family(bench_model, (0.25, 0.75))
        # Per regime: one half-line per level plus the unrestricted event,
        # then the full space.
        assert len(family) == 2 * 3 + 1
        assert family[-1].state_set == frozenset({1, 2})
        assert family[-1].lo == -math.inf and family[-1].hi == math.inf

    def test_observable_family_ignores_regimes(self, bench_model):
        family = observable_event_family(bench_model, (0.5,))
        assert len(family) == 2
        assert all(ev.state_set == frozenset({1, 2}) for ev in family)

    def test_family_thresholds_are_mixture_quantiles(self, bench_model):
        from regimeclt.process import mixture_cdf

        family = observable_event_family(bench_model, (0.3, 0.8))
        assert mixture_cdf(bench_model, family[0].hi) == pytest.approx(0.3, abs=1e-9)
        assert mixture_cdf(bench_model, family[1].hi) == pytest.approx(0.8, abs=1e-9)
