"""Tests for empirical characteristic functions and the factorization gap."""

import math

import numpy as np
import pytest

from regimeclt.charfn import (
    CfGapReport,
    StepApproximation,
    build_step_approximation,
    cf_factorization_gap,
    cf_factorization_gap_from_samples,
    ecf,
    truncation_radius,
)
from regimeclt.independence import epsilon_certificate
from regimeclt.process import mixture_cdf, mixture_mean, mixture_variance
from regimeclt.seeds import SeedSpec


class TestEcf:
    def test_standard_normal_reference(self):
        x = np.random.default_rng(5).standard_normal(100_000)
        est = ecf(x, [0.5, 1.0, 2.0])
        for t, v, se in zip(est.t_grid, est.values, est.std_errors):
            assert abs(v - math.exp(-0.5 * t * t)) <= 4 * se

    def test_value_at_zero(self):
        x = np.random.default_rng(6).standard_normal(500)
        est = ecf(x, [0.0])
        assert est.values[0] == 1.0 + 0.0j
        assert est.std_errors[0] == 0.0

    def test_conjugate_symmetry(self):
        x = np.random.default_rng(7).standard_normal(2_000)
        plus = ecf(x, [0.8]).values[0]
        minus = ecf(x, [-0.8]).values[0]
        assert minus == pytest.approx(plus.conjugate(), abs=1e-15)

    def test_modulus_bounded_by_one(self):
        x = np.random.default_rng(8).exponential(size=5_000)
        est = ecf(x, np.linspace(-4, 4, 17))
        assert np.all(np.abs(est.values) <= 1.0 + 1e-12)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            ecf(np.array([1.0]), [1.0])
        with pytest.raises(ValueError):
            ecf(np.ones((3, 3)), [1.0])


class TestStepApproximation:
    @pytest.mark.parametrize("t,eta", [(0.5, 0.1), (1.0, 0.05), (3.0, 0.02), (-2.0, 0.05)])
    def test_sup_error_below_eta(self, t, eta):
        sa = build_step_approximation(t, eta, radius=8.0)
        x = np.random.default_rng(11).uniform(-8.0, 8.0, 100_000)
        err = np.max(np.abs(sa(x) - np.exp(1j * t * x)))
        assert err <= eta
        assert sa.sup_error <= eta

    def test_cell_count_and_width(self):
        t, eta, radius = 1.5, 0.05, 6.0
        sa = build_step_approximation(t, eta, radius)
        width_max = eta / (abs(t) + 1.0)
        assert sa.n_cells == math.ceil(2.0 * radius / width_max)
        assert np.max(np.diff(sa.breakpoints)) <= width_max * (1.0 + 1e-12)

    def test_zero_frequency_is_exact(self):
        sa = build_step_approximation(0.0, 0.01, radius=5.0)
        assert sa.n_cells == 1
        assert sa.sup_error == 0.0
        np.testing.assert_array_equal(sa(np.array([-4.9, 0.0, 4.9])), np.ones(3))

    def test_zero_outside_truncation(self):
        sa = build_step_approximation(1.0, 0.1, radius=3.0)
        np.testing.assert_array_equal(sa(np.array([-3.1, 3.1, 50.0])), np.zeros(3))

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            build_step_approximation(1.0, 0.0, 5.0)
        with pytest.raises(ValueError):
            build_step_approximation(1.0, 0.1, -1.0)
        with pytest.raises(ValueError):
            build_step_approximation(1.0, 0.1, math.inf)

    def test_record_validation(self):
        bp = np.array([0.0, 1.0, 0.5])
        with pytest.raises(ValueError):
            StepApproximation(1.0, 0.1, bp, np.ones(2, dtype=complex), 0.05)
        with pytest.raises(ValueError):
            StepApproximation(
                1.0, 0.1, np.array([0.0, 1.0]), np.array([2.0 + 0.0j]), 0.05
            )
        with pytest.raises(ValueError):
            StepApproximation(
                1.0, 0.1, np.array([0.0, 1.0]), np.array([1.0 + 0.0j]), 0.2
            )


class TestTruncationRadius:
    def test_formula(self, bench_model):
        eta = 0.05
        mu = mixture_mean(bench_model)
        sigma = math.sqrt(mixture_variance(bench_model))
        assert truncation_radius(bench_model, eta) == pytest.approx(
            abs(mu) + sigma / math.sqrt(eta), rel=1e-12
        )

    def test_tail_mass_guarantee(self, bench_model, uniform_model):
        for model in (bench_model, uniform_model):
            for eta in (0.2, 0.05, 0.01):
                m = truncation_radius(model, eta)
                tail = mixture_cdf(model, -m) + (1.0 - mixture_cdf(model, m))
                assert tail <= eta

    def test_eta_validation(self, bench_model):
        with pytest.raises(ValueError):
            truncation_radius(bench_model, 0.0)


class TestCfGapFromSamples:
    def test_independent_columns_gap_near_zero(self):
        x = np.random.default_rng(13).standard_normal((10_000, 3))
        rep = cf_factorization_gap_from_samples(x, [0.5, 1.0, 2.0])
        assert rep.n_vars == 3 and rep.replicates == 10_000
        assert rep.max_gap < 0.05

    def test_duplicated_column_gap_matches_theory(self):
        # For X ~ N(0,1) repeated twice, the gap at t is
        # |exp(-2 t^2) - exp(-t^2)|.
        x = np.random.default_rng(14).standard_normal(20_000)
        rep = cf_factorization_gap_from_samples(np.column_stack([x, x]), [1.0])
        expected = abs(math.exp(-2.0) - math.exp(-1.0))
        assert rep.gaps[0] == pytest.approx(expected, abs=0.03)
        assert rep.std_errors[0] > 0.0

    def test_input_validation(self):
        with pytest.raises(ValueError):
            cf_factorization_gap_from_samples(np.ones(50), [1.0])
        with pytest.raises(ValueError):
            cf_factorization_gap_from_samples(np.ones((10, 2)), [1.0], n_batches=20)
        with pytest.raises(ValueError):
            cf_factorization_gap_from_samples(np.ones((50, 1)), [1.0])


class TestCfGapFromModel:
    def test_iid_model_gap_small(self, iid_model):
        rep = cf_factorization_gap(
            iid_model, (3, 3), [0.5, 1.0, 2.0], replicates=20_000, seed=SeedSpec(88, 1)
        )
        assert rep.max_gap <= float(np.max(rep.std_errors)) * 4 + 0.01

    def test_benchmark_within_certificate(self, bench_model):
        eps = epsilon_certificate(bench_model, (5, 5))
        rep = cf_factorization_gap(
            bench_model, (5, 5), [0.5, 1.0, 2.0], replicates=20_000, seed=SeedSpec(88, 2)
        )
        for gap, se in zip(rep.gaps, rep.std_errors):
            assert gap <= 2.0 * eps + 4.0 * se

    def test_deterministic_in_seed(self, bench_model):
        a = cf_factorization_gap(
            bench_model, (2,), [1.0], replicates=4_000, seed=SeedSpec(3, 3)
        )
        b = cf_factorization_gap(
            bench_model, (2,), [1.0], replicates=4_000, seed=SeedSpec(3, 3)
        )
        np.testing.assert_array_equal(a.gaps, b.gaps)
        np.testing.assert_array_equal(a.std_errors, b.std_errors)

    def test_argument_validation(self, bench_model):
        with pytest.raises(ValueError):
            cf_factorization_gap(bench_model, (2,), [1.0])
        with pytest.raises(ValueError):
            cf_factorization_gap(bench_model, (), [1.0], seed=SeedSpec(1))
        with pytest.raises(ValueError):
            cf_factorization_gap(bench_model, (0,), [1.0], seed=SeedSpec(1))


class TestCfGapReport:
    def test_shape_validation(self):
        with pytest.raises(ValueError):
            CfGapReport(
                t_grid=np.array([1.0, 2.0]),
                gaps=np.array([0.1]),
                std_errors=np.array([0.01]),
                n_vars=2,
                replicates=100,
            )

    def test_max_gap(self):
        rep = CfGapReport(
            t_grid=np.array([1.0, 2.0]),
            gaps=np.array([0.1, 0.3]),
            std_errors=np.array([0.01, 0.01]),
            n_vars=2,
            replicates=100,
        )
        assert rep.max_gap == 0.3
