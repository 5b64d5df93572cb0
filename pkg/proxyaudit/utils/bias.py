"""
Bias of weighted estimators
Empirical bias, the epsilon sensitivity plug-in, delta decomposition, the
assumption check that licenses the bound, and the bound itself.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .data_model import AuditDataset
from .exceptions import DataValidationError, UndefinedMetricError
from .metrics import MetricSpec, marginal_metric, oracle_metric, weighted_metric

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpsilonPair:
    """Mean group-probability error in the numerator cell (eps) and its complement (eps_prime)"""

    eps: float
    eps_prime: float

    def as_dict(self) -> Dict[str, float]:
        return {'eps': self.eps, 'eps_prime': self.eps_prime}


@dataclass(frozen=True)
class EpsilonBounds:
    """Feasible closed intervals for eps and eps_prime"""

    eps: Tuple[float, float]
    eps_prime: Tuple[float, float]

    def contains(self, pair: EpsilonPair) -> bool:
        return (self.eps[0] <= pair.eps <= self.eps[1]
                and self.eps_prime[0] <= pair.eps_prime <= self.eps_prime[1])

    def as_dict(self) -> Dict[str, list]:
        return {'eps': list(self.eps), 'eps_prime': list(self.eps_prime)}


@dataclass(frozen=True)
class DeltaPair:
    delta: float
    delta_star: float

    def as_dict(self) -> Dict[str, float]:
        return {'delta': self.delta, 'delta_star': self.delta_star}


@dataclass(frozen=True)
class BiasInputs:
    """
    Quantities the plug-in needs besides epsilon.

    base_rate is E[I(A=a) | h1=1] and h1_rate is E[h1]; both come from the
    sample in oracle mode and from population sources in audit mode.
    """

    nu_w: float
    nu: float
    base_rate: float
    h1_rate: Optional[float] = None

    def __post_init__(self):
        for name in ('nu_w', 'nu'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DataValidationError(f"{name} must lie in [0, 1], got {value!r}")
        if not 0.0 < self.base_rate <= 1.0:
            raise DataValidationError(f"base rate must lie in (0, 1], got {self.base_rate!r}")
        if self.h1_rate is not None and not 0.0 < self.h1_rate <= 1.0:
            raise DataValidationError(f"h1 rate must lie in (0, 1], got {self.h1_rate!r}")


def _conditional_mean(values: np.ndarray, mask: np.ndarray, spec: MetricSpec, group: str, cell: str) -> float:
    if not np.any(mask):
        raise UndefinedMetricError("conditioning cell is empty", metric=spec.name, group=group, cell=cell)
    return float(np.mean(values[mask]))


def _cell_masks(dataset: AuditDataset, spec: MetricSpec) -> Tuple[np.ndarray, np.ndarray]:
    h1 = spec.h1_values(dataset)
    h2 = spec.h2_values(dataset)
    return (h1 * h2) == 1.0, (h1 * (1.0 - h2)) == 1.0


def empirical_bias(dataset: AuditDataset, spec: MetricSpec, group: str) -> float:
    """Weighted minus oracle estimate on a labelled sample"""
    return weighted_metric(dataset, spec, group).value - oracle_metric(dataset, spec, group).value


def epsilon_sample(dataset: AuditDataset, spec: MetricSpec, group: str) -> EpsilonPair:
    error = dataset.probabilities(group) - dataset.indicator(group)
    numerator_cell, complement_cell = _cell_masks(dataset, spec)
    return EpsilonPair(
        eps=_conditional_mean(error, numerator_cell, spec, group, spec.numerator_cell_name),
        eps_prime=_conditional_mean(error, complement_cell, spec, group, spec.complement_cell_name),
    )


def epsilon_bounds(dataset: AuditDataset, spec: MetricSpec, group: str) -> EpsilonBounds:
    """
    Feasible eps ranges implied by 0 <= E[I(A=a) | cell] <= 1.

    Needs only group probabilities, not true labels.
    """
    pi = dataset.probabilities(group)
    numerator_cell, complement_cell = _cell_masks(dataset, spec)
    m = _conditional_mean(pi, numerator_cell, spec, group, spec.numerator_cell_name)
    m_prime = _conditional_mean(pi, complement_cell, spec, group, spec.complement_cell_name)
    return EpsilonBounds(eps=(m - 1.0, m), eps_prime=(m_prime - 1.0, m_prime))


def bias_estimate(inputs: BiasInputs, eps_pair: EpsilonPair) -> float:
    """Plug-in bias for assumed eps and eps_prime"""
    if inputs.base_rate <= 0.0:
        raise DataValidationError(f"base rate must be positive, got {inputs.base_rate!r}")
    return (
        (1.0 - inputs.nu_w) * inputs.nu * eps_pair.eps
        - inputs.nu_w * (1.0 - inputs.nu) * eps_pair.eps_prime
    ) / inputs.base_rate


def deltas(dataset: AuditDataset, spec: MetricSpec, group: str) -> DeltaPair:
    """Sample means of (pi - I) h1 h2 and (I - pi) h1 over all records"""
    error = dataset.probabilities(group) - dataset.indicator(group)
    h1 = spec.h1_values(dataset)
    h2 = spec.h2_values(dataset)
    return DeltaPair(
        delta=float(np.mean(error * h1 * h2)),
        delta_star=float(np.mean(-error * h1)),
    )


def bias_from_deltas(delta_pair: DeltaPair, nu_w: float, base_rate: float, h1_rate: float) -> float:
    """Bias written through the delta decomposition"""
    if base_rate <= 0.0 or h1_rate <= 0.0:
        raise DataValidationError("base rate and h1 rate must be positive")
    return (delta_pair.delta + nu_w * delta_pair.delta_star) / (base_rate * h1_rate)


def assumption1_check(delta_pair: DeltaPair) -> bool:
    """|delta| <= |delta_star|"""
    return abs(delta_pair.delta) <= abs(delta_pair.delta_star)


def same_sign_condition(eps_pair: EpsilonPair) -> bool:
    """eps and eps_prime do not have conflicting signs; zero is compatible with either"""
    return eps_pair.eps * eps_pair.eps_prime >= 0.0


def bias_bound(nu_w: float, pi_mass_ratio: float) -> float:
    """
    Bound on the absolute bias, valid once the delta assumption (or the
    same-sign condition) has been checked by the caller.
    """
    if not pi_mass_ratio > 0.0:
        raise DataValidationError(f"probability mass ratio must be positive, got {pi_mass_ratio!r}")
    return (1.0 + nu_w) * abs(1.0 - pi_mass_ratio)


def h1_rate(dataset: AuditDataset, spec: MetricSpec) -> float:
    return float(np.mean(spec.h1_values(dataset)))


def sample_base_rate(dataset: AuditDataset, spec: MetricSpec, group: str) -> float:
    """E[I(A=a) | h1=1] from true labels"""
    h1 = spec.h1_values(dataset)
    return _conditional_mean(dataset.indicator(group), h1 == 1.0, spec, group, spec.denominator_cell_name)


def sample_bias_inputs(dataset: AuditDataset, spec: MetricSpec, group: str) -> BiasInputs:
    """BiasInputs with every quantity taken from a labelled sample"""
    return BiasInputs(
        nu_w=weighted_metric(dataset, spec, group).value,
        nu=marginal_metric(dataset, spec).value,
        base_rate=sample_base_rate(dataset, spec, group),
        h1_rate=h1_rate(dataset, spec),
    )


def pi_mass_ratio(dataset: AuditDataset, spec: MetricSpec, group: str,
                  base_rate: Optional[float] = None, population_h1_rate: Optional[float] = None) -> float:
    """
    E[pi h1] / E[I(A=a) h1].

    With base_rate and population_h1_rate the denominator comes from
    population sources and no labels are needed.
    """
    h1 = spec.h1_values(dataset)
    pi_mass = float(np.mean(dataset.probabilities(group) * h1))
    if base_rate is not None and population_h1_rate is not None:
        denominator = base_rate * population_h1_rate
    else:
        denominator = float(np.mean(dataset.indicator(group) * h1))
    if not denominator > 0.0:
        raise UndefinedMetricError(
            "group has no mass in the denominator event",
            metric=spec.name, group=str(group), cell=spec.denominator_cell_name,
        )
    return pi_mass / denominator
