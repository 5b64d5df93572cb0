from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from ..utils.bias import BiasInputs, EpsilonPair, bias_estimate, epsilon_bounds, epsilon_sample, sample_base_rate
from ..utils.data_model import AuditDataset
from ..utils.exceptions import DataValidationError, InfeasibleRangeError, UndefinedMetricError
from ..utils.metrics import MetricKind, metric_spec, oracle_metric
from ..utils.sensitivity import (
    CorrectionSign, ErrorStructure, RangeMode, SensitivityConfig, absolute_ranges, bootstrap_replicates,
    contour_grid, corrected_estimate, run_sensitivity,
)
from ..utils.simulate import SimConfig, simulate_test_dataset
from .fixtures import d4_dataset, fuzzed_datasets

D4_BASE_RATE = 2.0 / 3.0


class CorrectedEstimateTests(SimpleTestCase):

    def test_subtracts_bias_by_default(self):
        self.assertAlmostEqual(corrected_estimate(0.625, 0.125), 0.5, places=12)

    def test_add_sign(self):
        self.assertAlmostEqual(corrected_estimate(0.625, 0.125, CorrectionSign.ADD), 0.75, places=12)

    def test_clamped_to_unit_interval(self):
        self.assertEqual(corrected_estimate(0.2, 0.5), 0.0)
        self.assertEqual(corrected_estimate(0.9, -0.5), 1.0)

    def test_vectorized(self):
        np.testing.assert_allclose(corrected_estimate(np.array([0.5, 0.5]), np.array([0.1, -0.1])), [0.4, 0.6])


class D4SensitivityTests(SimpleTestCase):

    def setUp(self):
        self.dataset = d4_dataset()
        self.spec = metric_spec('fnr')
        self.config = SensitivityConfig(
            eps_range=(-0.5, 0.5), eps_prime_range=(-0.4, 0.6), base_rate=D4_BASE_RATE,
            bootstrap_reps=1, resample=False, grid_resolution=5,
        )

    def corrected(self, eps, eps_prime):
        inputs = BiasInputs(nu_w=0.625, nu=2.0 / 3.0, base_rate=D4_BASE_RATE)
        return corrected_estimate(0.625, bias_estimate(inputs, EpsilonPair(eps, eps_prime)))

    def test_single_replicate_intervals_are_corner_values(self):
        result = run_sensitivity(self.dataset, self.spec, '1', self.config)
        low, high = self.corrected(0.5, -0.4), self.corrected(-0.5, 0.6)
        self.assertAlmostEqual(low, 0.3125, places=12)
        self.assertAlmostEqual(high, 1.0, places=12)
        for interval in (result.estimate_interval, result.plausible_mean_interval, result.sensitivity_interval):
            self.assertAlmostEqual(interval[0], low, places=12)
            self.assertAlmostEqual(interval[1], high, places=12)
        self.assertEqual(result.replicates_used, 1)
        self.assertAlmostEqual(result.weighted_estimate, 0.625, places=12)

    def test_corners_reported(self):
        result = run_sensitivity(self.dataset, self.spec, '1', self.config)
        self.assertEqual(len(result.corrected_at_corners), 4)
        self.assertAlmostEqual(result.corrected_at_corners['eps_max/eps_prime_min'], 0.3125, places=12)

    def test_true_epsilon_recovers_oracle(self):
        config = replace(self.config, eps_range=(0.0, 0.0), eps_prime_range=(-0.4, -0.4))
        result = run_sensitivity(self.dataset, self.spec, '1', config)
        self.assertAlmostEqual(result.estimate_interval[0], 0.5, places=12)
        self.assertAlmostEqual(result.estimate_interval[1], 0.5, places=12)

    def test_range_outside_bounds_is_infeasible(self):
        config = replace(self.config, eps_range=(0.6, 0.9))
        with self.assertRaises(InfeasibleRangeError) as cm:
            run_sensitivity(self.dataset, self.spec, '1', config)
        self.assertEqual(cm.exception.exit_code, 4)

    def test_range_clipped_to_bounds(self):
        config = replace(self.config, eps_range=(-0.8, 0.5))
        result = run_sensitivity(self.dataset, self.spec, '1', config)
        self.assertAlmostEqual(result.eps_range[0], -0.5, places=12)

    def test_relative_ranges_scale_with_cell_means(self):
        config = replace(self.config, eps_range=(-0.1, 0.1), eps_prime_range=(-0.1, 0.1), range_mode=RangeMode.RELATIVE)
        eps, eps_prime = absolute_ranges(self.dataset, self.spec, '1', config)
        self.assertAlmostEqual(eps[1], 0.05, places=12)
        self.assertAlmostEqual(eps_prime[0], -0.06, places=12)

    def test_contour_grid_contains_true_epsilon(self):
        grid = contour_grid(self.dataset, self.spec, '1', self.config)
        self.assertEqual(list(grid.columns), ['eps', 'eps_prime', 'bias', 'corrected'])
        self.assertEqual(len(grid), 25)
        row = grid[(grid['eps'].abs() < 1e-12) & ((grid['eps_prime'] + 0.4).abs() < 1e-12)]
        self.assertEqual(len(row), 1)
        self.assertAlmostEqual(row['bias'].iloc[0], 0.125, places=12)
        self.assertAlmostEqual(row['corrected'].iloc[0], 0.5, places=12)

    def test_contour_grid_omits_infeasible_points(self):
        config = replace(self.config, eps_range=(-0.8, 0.5))
        grid = contour_grid(self.dataset, self.spec, '1', config)
        self.assertEqual(len(grid), 20)
        self.assertGreaterEqual(grid['eps'].min(), -0.5)

    def test_undefined_weighted_metric(self):
        dataset = AuditDataset(y=[1, 0], y_hat=[0, 0], group_probs={'1': [0.0, 0.4]})
        config = replace(self.config, eps_range=(0.0, 0.0), eps_prime_range=(0.0, 0.0))
        with self.assertRaises(UndefinedMetricError):
            run_sensitivity(dataset, self.spec, '1', config)


class BootstrapTests(SimpleTestCase):

    def setUp(self):
        self.dataset = fuzzed_datasets(1, seed=99)[0]
        self.spec = metric_spec('fnr')
        self.config = SensitivityConfig(
            eps_range=(-0.05, 0.05), eps_prime_range=(-0.05, 0.05),
            base_rate=sample_base_rate(self.dataset, self.spec, '1'), bootstrap_reps=300, seed=11,
        )

    def test_zero_range_gives_bootstrap_interval_of_weighted_estimate(self):
        config = replace(self.config, eps_range=(0.0, 0.0), eps_prime_range=(0.0, 0.0))
        result = run_sensitivity(self.dataset, self.spec, '1', config)
        replicates = bootstrap_replicates(self.dataset, self.spec, '1', config).dropna()
        nu_w = replicates['nu_w'].to_numpy()
        low, high = np.percentile(nu_w, [2.5, 97.5])
        self.assertAlmostEqual(result.sensitivity_interval[0], low, places=12)
        self.assertAlmostEqual(result.sensitivity_interval[1], high, places=12)
        self.assertAlmostEqual(result.plausible_mean_interval[0], nu_w.mean(), places=12)
        self.assertAlmostEqual(result.plausible_mean_interval[1], nu_w.mean(), places=12)

    def test_same_seed_same_result(self):
        first = run_sensitivity(self.dataset, self.spec, '1', self.config)
        second = run_sensitivity(self.dataset, self.spec, '1', self.config)
        self.assertEqual(first.as_dict(), second.as_dict())

    def test_worker_count_does_not_change_result(self):
        serial = run_sensitivity(self.dataset, self.spec, '1', self.config)
        threaded = run_sensitivity(self.dataset, self.spec, '1', replace(self.config, workers=3))
        self.assertEqual(serial.as_dict(), threaded.as_dict())

    def test_different_seed_changes_result(self):
        first = run_sensitivity(self.dataset, self.spec, '1', self.config)
        second = run_sensitivity(self.dataset, self.spec, '1', replace(self.config, seed=12))
        self.assertNotEqual(first.sensitivity_interval, second.sensitivity_interval)

    def test_plausible_mean_inside_sensitivity_interval(self):
        result = run_sensitivity(self.dataset, self.spec, '1', self.config)
        self.assertLessEqual(result.sensitivity_interval[0], result.plausible_mean_interval[0])
        self.assertGreaterEqual(result.sensitivity_interval[1], result.plausible_mean_interval[1])

    def test_aligned_intervals_inside_independent(self):
        independent = run_sensitivity(self.dataset, self.spec, '1', self.config)
        aligned = run_sensitivity(self.dataset, self.spec, '1',
                                  replace(self.config, error_structure=ErrorStructure.ALIGNED))
        for kind in ('estimate_interval', 'plausible_mean_interval', 'sensitivity_interval'):
            outer, inner = getattr(independent, kind), getattr(aligned, kind)
            self.assertLessEqual(outer[0], inner[0] + 1e-12)
            self.assertGreaterEqual(outer[1], inner[1] - 1e-12)

    def test_undefined_replicates_are_dropped(self):
        y = [1] + [0] * 19
        dataset = AuditDataset(y=y, y_hat=[0] * 20, group_probs={'1': np.linspace(0.1, 0.9, 20)})
        config = replace(self.config, eps_range=(0.0, 0.0), eps_prime_range=(0.0, 0.0), base_rate=0.5)
        with self.assertLogs('proxyaudit.utils.sensitivity', level='WARNING'):
            result = run_sensitivity(dataset, self.spec, '1', config)
        self.assertLess(result.replicates_used, config.bootstrap_reps)
        self.assertGreater(result.replicates_used, 0)


class CornerSufficiencyTests(SimpleTestCase):

    def test_grid_extremes_equal_corner_values(self):
        rng = np.random.default_rng(5)
        checked = 0
        for dataset in fuzzed_datasets(60, seed=21):
            for kind in (MetricKind.FNR, MetricKind.FPR, MetricKind.PPV):
                spec = metric_spec(kind)
                try:
                    bounds = epsilon_bounds(dataset, spec, '1')
                    eps = np.sort(rng.uniform(*bounds.eps, size=2))
                    eps_prime = np.sort(rng.uniform(*bounds.eps_prime, size=2))
                    config = SensitivityConfig(eps_range=tuple(eps), eps_prime_range=tuple(eps_prime),
                                               base_rate=sample_base_rate(dataset, spec, '1'),
                                               bootstrap_reps=1, resample=False, grid_resolution=7)
                except (UndefinedMetricError, DataValidationError):
                    continue
                grid = contour_grid(dataset, spec, '1', config)
                result = run_sensitivity(dataset, spec, '1', config)
                self.assertAlmostEqual(grid['corrected'].min(), result.estimate_interval[0], places=12)
                self.assertAlmostEqual(grid['corrected'].max(), result.estimate_interval[1], places=12)
                checked += 1
        self.assertGreater(checked, 100)

    def test_range_containing_true_epsilon_covers_oracle(self):
        for dataset in fuzzed_datasets(100, seed=31):
            spec = metric_spec('fnr')
            try:
                eps = epsilon_sample(dataset, spec, '1')
                oracle = oracle_metric(dataset, spec, '1').value
                base_rate = sample_base_rate(dataset, spec, '1')
            except UndefinedMetricError:
                continue
            config = SensitivityConfig(eps_range=(eps.eps - 0.02, eps.eps + 0.02),
                                       eps_prime_range=(eps.eps_prime - 0.02, eps.eps_prime + 0.02),
                                       base_rate=base_rate, bootstrap_reps=1, resample=False)
            result = run_sensitivity(dataset, spec, '1', config)
            self.assertLessEqual(result.estimate_interval[0], oracle + 1e-12)
            self.assertGreaterEqual(result.estimate_interval[1], oracle - 1e-12)


class SimulatedCoverageTests(SimpleTestCase):
    """Narrow symmetric ranges on simulated samples with a known true group"""

    def test_sensitivity_interval_covers_true_fnr(self):
        spec = metric_spec('fnr')
        sim = SimConfig(n_population=6000, n_sample=2000, seed=21)
        covered = 0
        runs = 20
        for replication in range(runs):
            dataset = simulate_test_dataset(sim, replication)
            config = SensitivityConfig(
                eps_range=(-0.01, 0.01), eps_prime_range=(-0.01, 0.01),
                base_rate=sample_base_rate(dataset, spec, '1'), bootstrap_reps=200, seed=replication,
            )
            low, high = run_sensitivity(dataset, spec, '1', config).sensitivity_interval
            covered += int(low <= oracle_metric(dataset, spec, '1').value <= high)
        self.assertGreaterEqual(covered, 18)
