"""
Audit analyzer
Combines metrics and bias diagnostics into one report per metric and group.
"""

import logging
from typing import Dict, Mapping, Optional, Sequence

from .bias import (
    assumption1_check, bias_bound, bias_estimate, bias_from_deltas, deltas, empirical_bias,
    epsilon_bounds, epsilon_sample, h1_rate, pi_mass_ratio, same_sign_condition, sample_bias_inputs,
)
from .data_model import AuditDataset, summarize
from .exceptions import DataValidationError, UndefinedMetricError
from .metrics import MetricSpec, confusion_masses, marginal_metric, metric_spec, oracle_metric, weighted_metric

logger = logging.getLogger(__name__)

LOOSE_BOUND_WARNING = "not sharp enough for practical application"


def warn_if_loose(spec: MetricSpec):
    if not spec.bound_is_sharp:
        logger.warning("The bias bound for %s is %s", spec.name.upper(), LOOSE_BOUND_WARNING)


def _optional(what: str, compute):
    """Diagnostic value, or None with a warning when its conditioning cell is empty"""
    try:
        return compute()
    except UndefinedMetricError as exc:
        logger.warning("%s unavailable: %s", what, exc)
        return None


class AuditAnalyzer:
    """Main analyzer class for weighted-estimator audits"""

    def __init__(self, dataset: AuditDataset):
        self.dataset = dataset

    def audit_metric(self, spec: MetricSpec, group: str, base_rate: Optional[float] = None,
                     population_h1_rate: Optional[float] = None) -> Dict:
        """
        Weighted estimate and every diagnostic the data supports.

        With true labels the oracle estimate, empirical bias, eps and delta
        samples and the sample bound are reported. Without them the bound
        needs population base_rate and population_h1_rate.
        """
        dataset = self.dataset
        group = str(group)
        nu_w = weighted_metric(dataset, spec, group)
        result = {
            'weighted': nu_w.value,
            'weighted_masses': {'numerator': nu_w.numerator_mass, 'denominator': nu_w.denominator_mass},
            'marginal': marginal_metric(dataset, spec).value,
            'oracle': None,
            'empirical_bias': None,
            'eps': None,
            'eps_bounds': _optional('eps bounds', lambda: epsilon_bounds(dataset, spec, group).as_dict()),
            'deltas': None,
            'assumption1': None,
            'same_sign': None,
            'bias_plugin': None,
            'bias_deltas': None,
            'base_rate': None,
            'bound': None,
            'bound_population': None,
            'bound_sharp': spec.bound_is_sharp,
        }

        if dataset.has_labels:
            result['oracle'] = oracle_metric(dataset, spec, group).value
            result['empirical_bias'] = empirical_bias(dataset, spec, group)
            inputs = sample_bias_inputs(dataset, spec, group)
            delta_pair = deltas(dataset, spec, group)
            result['deltas'] = delta_pair.as_dict()
            result['assumption1'] = assumption1_check(delta_pair)
            result['base_rate'] = inputs.base_rate
            result['bias_deltas'] = bias_from_deltas(delta_pair, nu_w.value, inputs.base_rate, inputs.h1_rate)
            eps_pair = _optional('eps sample', lambda: epsilon_sample(dataset, spec, group))
            if eps_pair is not None:
                result['eps'] = eps_pair.as_dict()
                result['same_sign'] = same_sign_condition(eps_pair)
                result['bias_plugin'] = bias_estimate(inputs, eps_pair)
            result['bound'] = bias_bound(nu_w.value, pi_mass_ratio(dataset, spec, group))
            if not result['assumption1']:
                logger.warning("Delta assumption fails for %s group %s; the bound is not guaranteed", spec.name, group)
            if base_rate is not None and population_h1_rate is not None:
                result['bound_population'] = bias_bound(nu_w.value, pi_mass_ratio(
                    dataset, spec, group, base_rate=base_rate, population_h1_rate=population_h1_rate))
        elif base_rate is not None and population_h1_rate is not None:
            ratio = pi_mass_ratio(dataset, spec, group, base_rate=base_rate, population_h1_rate=population_h1_rate)
            result['base_rate'] = base_rate
            result['bound'] = bias_bound(nu_w.value, ratio)
            logger.warning("Delta assumption cannot be verified without true group labels (%s group %s)",
                           spec.name, group)

        if result['bound'] is not None:
            warn_if_loose(spec)
        return result

    def comprehensive_audit(self, metrics: Sequence[str], groups: Optional[Sequence[str]] = None,
                            base_rates: Optional[Mapping[str, float]] = None,
                            population_h1_rate: Optional[float] = None) -> Dict:
        """Audit of every requested metric for every requested group"""
        dataset = self.dataset
        groups = [str(group) for group in (groups or dataset.group_ids)]
        specs = [metric_spec(name) for name in metrics]
        base_rates = dict(base_rates or {})
        if (base_rates or population_h1_rate is not None) and len(specs) != 1:
            raise DataValidationError("population base rates and h1 rate refer to one metric; request exactly one")
        for group in groups:
            dataset.probabilities(group)

        analysis = {
            'summary': summarize(dataset).as_dict(),
            'metrics': {},
        }
        for spec in specs:
            per_group = {}
            for group in groups:
                per_group[group] = self.audit_metric(spec, group, base_rates.get(group), population_h1_rate)
                per_group[group]['weighted_confusion'] = confusion_masses(
                    dataset.probabilities(group), dataset.y, dataset.y_hat)
            analysis['metrics'][spec.name] = {
                'h1_rate': h1_rate(dataset, spec),
                'groups': per_group,
            }
            logger.info("Audited %s for %d groups", spec.name, len(groups))
        return analysis
