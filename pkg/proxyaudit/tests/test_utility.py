import numpy as np
from django.test import SimpleTestCase

from ..utils.bias import sample_base_rate
from ..utils.data_model import AuditDataset
from ..utils.exceptions import UtilityInputError
from ..utils.metrics import metric_spec, weighted_metric
from ..utils.sensitivity import SensitivityConfig
from ..utils.utility import (
    INTERVAL_KINDS, GroupUtilityParams, UtilityInputs, expected_utility, expected_utility_interval,
    group_utility_report, mean_positive_score, select_threshold, utility_curve,
)
from .fixtures import fuzzed_dataset

GRID = np.round(np.arange(0, 10001) / 10000.0, 4)
# dyadic ratios keep EU ties exact in floating point
RATIOS = (0.25, 0.5, 1.0, 2.0, 4.0)


def grid_search_threshold(scores, outcomes, r):
    best, best_eu = None, -np.inf
    for threshold in GRID:
        predicted = scores > threshold
        tn = np.sum(~predicted & (outcomes == 0))
        tp = np.sum(predicted & (outcomes == 1))
        eu = (tn * r + tp) / len(scores)
        if eu > best_eu:
            best, best_eu = threshold, eu
    return best, best_eu


class ExpectedUtilityTests(SimpleTestCase):

    def test_worked_example(self):
        inputs = UtilityInputs(p0=0.8, p1=0.2, tau0=0.1, tau1=0.3, r=0.5)
        self.assertAlmostEqual(expected_utility(inputs), 0.50, places=12)

    def test_perfect_classifier_ceiling(self):
        inputs = UtilityInputs(p0=0.7, p1=0.3, tau0=0.0, tau1=0.0, r=2.0)
        self.assertAlmostEqual(expected_utility(inputs), 0.7 * 2.0 + 0.3, places=12)

    def test_all_wrong_gives_zero(self):
        self.assertEqual(expected_utility(UtilityInputs(p0=0.7, p1=0.3, tau0=1.0, tau1=1.0, r=2.0)), 0.0)

    def test_increasing_in_ratio_and_decreasing_in_error_rates(self):
        base = dict(p0=0.6, p1=0.4, tau0=0.2, tau1=0.3, r=1.0)
        eu = expected_utility(UtilityInputs(**base))
        self.assertGreater(expected_utility(UtilityInputs(**{**base, 'r': 1.5})), eu)
        self.assertLess(expected_utility(UtilityInputs(**{**base, 'tau0': 0.3})), eu)
        self.assertLess(expected_utility(UtilityInputs(**{**base, 'tau1': 0.4})), eu)

    def test_ratio_outside_admissible_interval_warns(self):
        inputs = UtilityInputs(p0=0.8, p1=0.2, tau0=0.1, tau1=0.3, r=0.1, mean_positive_score=0.6)
        self.assertEqual(inputs.admissible_ratio_interval(), (0.25, 1.5))
        with self.assertLogs('proxyaudit.utils.utility', level='WARNING') as logs:
            expected_utility(inputs)
        self.assertIn('outside the admissible interval', logs.output[0])

    def test_invalid_inputs(self):
        with self.assertRaises(UtilityInputError):
            UtilityInputs(p0=0.5, p1=0.4, tau0=0.1, tau1=0.1, r=1.0)
        with self.assertRaises(UtilityInputError):
            UtilityInputs(p0=0.5, p1=0.5, tau0=0.1, tau1=0.1, r=0.0)
        with self.assertRaises(UtilityInputError):
            UtilityInputs(p0=0.5, p1=0.5, tau0=1.1, tau1=0.1, r=1.0)

    def test_interval_from_endpoints(self):
        low, high = expected_utility_interval((0.1, 0.2), (0.3, 0.4), prevalence=0.2, r=0.5)
        self.assertAlmostEqual(low, 0.8 * 0.8 * 0.5 + 0.2 * 0.6, places=12)
        self.assertAlmostEqual(high, 0.50, places=12)


class ThresholdSelectionTests(SimpleTestCase):

    def test_separated_classes_give_gap_midpoint(self):
        self.assertAlmostEqual(select_threshold([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1], 1.0), 0.5, places=12)

    def test_single_class_rejected(self):
        with self.assertRaises(UtilityInputError):
            select_threshold([0.1, 0.2], [1, 1], 1.0)

    def test_utility_curve_rows(self):
        curve = utility_curve([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1], 1.0)
        self.assertEqual(list(curve.columns), ['threshold', 'fpr', 'fnr', 'expected_utility'])
        np.testing.assert_allclose(curve['threshold'], [0.0, 0.225, 0.375, 0.6, 1.0])
        row = curve[np.isclose(curve['threshold'], 0.375)].iloc[0]
        self.assertAlmostEqual(row['fpr'], 0.5, places=12)
        self.assertAlmostEqual(row['fnr'], 0.5, places=12)
        self.assertAlmostEqual(row['expected_utility'], 0.5, places=12)

    def test_matches_grid_search(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            scores = np.round(rng.random(50), 3)
            outcomes = (rng.random(50) < scores).astype(int)
            if outcomes.min() == outcomes.max():
                continue
            r = RATIOS[int(rng.integers(len(RATIOS)))]
            threshold = select_threshold(scores, outcomes, r)
            grid_threshold, grid_eu = grid_search_threshold(scores, outcomes, r)
            curve = utility_curve(scores, outcomes, r)
            self.assertAlmostEqual(curve['expected_utility'].max(), grid_eu, places=12)
            np.testing.assert_array_equal(scores > threshold, scores > grid_threshold)

    def test_invariant_under_monotone_transformation(self):
        rng = np.random.default_rng(18)
        for _ in range(30):
            scores = rng.random(40)
            outcomes = (rng.random(40) < scores).astype(int)
            if outcomes.min() == outcomes.max():
                continue
            reference = scores > select_threshold(scores, outcomes, 1.0)
            for transform in (np.square, np.sqrt):
                transformed = transform(scores)
                np.testing.assert_array_equal(transformed > select_threshold(transformed, outcomes, 1.0), reference)

    def test_all_positive_threshold_when_lowest_score_is_zero(self):
        scores = np.array([0.0, 0.2, 0.4])
        outcomes = [1, 0, 1]
        threshold = select_threshold(scores, outcomes, 0.1)
        self.assertTrue(np.all(scores > threshold))
        curve = utility_curve(scores, outcomes, 0.1)
        self.assertAlmostEqual(curve['expected_utility'].max(), 2.0 / 3.0, places=12)
        for shifted in (scores + 1.0, scores - 1.0, 10.0 * scores):
            self.assertTrue(np.all(shifted > select_threshold(shifted, outcomes, 0.1)))

    def test_all_negative_threshold_above_scores_beyond_one(self):
        scores = np.array([1.0, 1.5, 2.0])
        outcomes = [0, 1, 0]
        threshold = select_threshold(scores, outcomes, 4.0)
        self.assertFalse(np.any(scores > threshold))

    def test_threshold_nondecreasing_in_ratio(self):
        rng = np.random.default_rng(19)
        for _ in range(30):
            scores = np.round(rng.random(50), 3)
            outcomes = (rng.random(50) < scores).astype(int)
            if outcomes.min() == outcomes.max():
                continue
            thresholds = [select_threshold(scores, outcomes, r) for r in RATIOS]
            self.assertEqual(thresholds, sorted(thresholds))


class MeanPositiveScoreTests(SimpleTestCase):

    def setUp(self):
        self.dataset = AuditDataset(y=[1, 1, 0], y_hat=[1, 0, 0], score=[0.8, 0.4, 0.3],
                                    group_probs={'1': [1.0, 0.5, 0.2]})

    def test_unweighted(self):
        self.assertAlmostEqual(mean_positive_score(self.dataset), 0.6, places=12)

    def test_group_weighted(self):
        self.assertAlmostEqual(mean_positive_score(self.dataset, '1'), 1.0 / 1.5, places=12)


class GroupUtilityReportTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.dataset = fuzzed_dataset(np.random.default_rng(202), n_min=300, n_max=400)
        cls.params = {
            group: GroupUtilityParams(
                prevalence=0.3,
                base_rate_fnr=sample_base_rate(cls.dataset, metric_spec('fnr'), group),
                base_rate_fpr=sample_base_rate(cls.dataset, metric_spec('fpr'), group),
            )
            for group in ('1', '0')
        }
        cls.base_config = SensitivityConfig(bootstrap_reps=60, seed=4)
        cls.report = group_utility_report(cls.dataset, ['1', '0'], [0.0, 0.05, 0.1], cls.params, r=1.0,
                                          base_config=cls.base_config, check_interval=False)

    def level(self, group, level, mode):
        entries = self.report.groups[group]['levels']
        return next(entry for entry in entries if entry['level'] == level and entry['mode'] == mode)

    def test_missing_prevalence_names_group(self):
        with self.assertRaises(UtilityInputError) as cm:
            group_utility_report(self.dataset, ['1', '0'], [0.0], {'1': self.params['1']}, r=1.0)
        self.assertIn('0', str(cm.exception).split(':')[-1])
        self.assertEqual(cm.exception.exit_code, 2)

    def test_unknown_mode(self):
        with self.assertRaises(UtilityInputError):
            group_utility_report(self.dataset, ['1'], [0.0], self.params, r=1.0, modes=('partial',))

    def test_point_estimates_use_weighted_rates(self):
        entry = self.report.groups['1']
        self.assertAlmostEqual(entry['weighted_fpr'], weighted_metric(self.dataset, metric_spec('fpr'), '1').value,
                               places=12)
        self.assertAlmostEqual(entry['weighted_fnr'], weighted_metric(self.dataset, metric_spec('fnr'), '1').value,
                               places=12)

    def test_zero_level_collapses_to_point(self):
        for group in ('1', '0'):
            point = self.report.groups[group]['expected_utility']
            for mode in ('uncorrelated', 'correlated'):
                low, high = self.level(group, 0.0, mode)['expected_utility']['estimate']
                self.assertAlmostEqual(low, point, places=12)
                self.assertAlmostEqual(high, point, places=12)

    def test_correlated_mode_contains_uncorrelated(self):
        for group in ('1', '0'):
            for level in (0.0, 0.05, 0.1):
                outer = self.level(group, level, 'correlated')['expected_utility']
                inner = self.level(group, level, 'uncorrelated')['expected_utility']
                for kind in INTERVAL_KINDS:
                    self.assertLessEqual(outer[kind][0], inner[kind][0] + 1e-12)
                    self.assertGreaterEqual(outer[kind][1], inner[kind][1] - 1e-12)

    def test_flat_rows(self):
        frame = self.report.to_frame()
        self.assertEqual(len(frame), 2 * 3 * 2 * len(INTERVAL_KINDS))
        self.assertTrue(np.all(frame['eu_low'] <= frame['eu_high'] + 1e-12))

    def test_overall_threshold_selected_from_scores(self):
        expected = select_threshold(self.dataset.score, self.dataset.y, 1.0)
        self.assertEqual(self.report.overall_threshold, expected)

    def test_exchangeable_groups_overlap(self):
        pi = self.dataset.probabilities('1')
        twin = AuditDataset(y=self.dataset.y, y_hat=self.dataset.y_hat, score=self.dataset.score,
                            group_probs={'a': pi, 'b': pi.copy()})
        params = {'a': self.params['1'], 'b': self.params['1']}
        report = group_utility_report(twin, ['a', 'b'], [0.0, 0.1], params, r=1.0, base_config=self.base_config,
                                      check_interval=False)
        for first, second in zip(report.groups['a']['levels'], report.groups['b']['levels']):
            for kind in INTERVAL_KINDS:
                a_low, a_high = first['expected_utility'][kind]
                b_low, b_high = second['expected_utility'][kind]
                self.assertLessEqual(max(a_low, b_low), min(a_high, b_high))
