"""
Expected utility
Threshold selection by expected utility and per-group utility reports built
from bias-corrected FPR/FNR intervals.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .data_model import AuditDataset
from .exceptions import UtilityInputError
from .metrics import MetricKind, metric_spec, weighted_metric
from .sensitivity import ErrorStructure, RangeMode, SensitivityConfig, run_sensitivity

logger = logging.getLogger(__name__)

PROPORTION_TOLERANCE = 1e-9
INTERVAL_KINDS = ('estimate', 'plausible_mean', 'sensitivity')

# uncorrelated errors keep eps and eps_prime on the same relative footing;
# perfectly correlated errors take the worst case over the whole box
UTILITY_MODES = {
    'uncorrelated': ErrorStructure.ALIGNED,
    'correlated': ErrorStructure.INDEPENDENT,
}


@dataclass(frozen=True)
class UtilityInputs:
    p0: float
    p1: float
    tau0: float
    tau1: float
    r: float
    mean_positive_score: Optional[float] = None

    def __post_init__(self):
        for name in ('p0', 'p1', 'tau0', 'tau1'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise UtilityInputError(f"{name} must lie in [0, 1], got {value!r}")
        if abs(self.p0 + self.p1 - 1.0) > PROPORTION_TOLERANCE:
            raise UtilityInputError(f"p0 + p1 must equal 1, got {self.p0 + self.p1!r}")
        if not self.r > 0.0:
            raise UtilityInputError(f"utility ratio r must be positive, got {self.r!r}")
        if self.mean_positive_score is not None and not 0.0 < self.mean_positive_score < 1.0:
            raise UtilityInputError(f"mean positive score must lie in (0, 1), got {self.mean_positive_score!r}")

    def admissible_ratio_interval(self) -> Optional[Tuple[float, float]]:
        """Open interval (p1/p0, P1/(1-P1)); None without P1 or with p0 = 0"""
        if self.mean_positive_score is None or self.p0 == 0.0:
            return None
        score = self.mean_positive_score
        return self.p1 / self.p0, score / (1.0 - score)


@dataclass(frozen=True)
class GroupUtilityParams:
    """Population prevalence of the condition and the base rates E[I(A=a) | Y] for one group"""

    prevalence: float
    base_rate_fnr: float
    base_rate_fpr: float

    def __post_init__(self):
        if not 0.0 <= self.prevalence <= 1.0:
            raise UtilityInputError(f"prevalence must lie in [0, 1], got {self.prevalence!r}")
        for name in ('base_rate_fnr', 'base_rate_fpr'):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise UtilityInputError(f"{name} must lie in (0, 1], got {value!r}")


def expected_utility(inputs: UtilityInputs, check_interval: bool = True) -> float:
    """p0 (1 - tau0) r + p1 (1 - tau1)"""
    if check_interval:
        interval = inputs.admissible_ratio_interval()
        if interval is not None and not interval[0] < inputs.r < interval[1]:
            logger.warning("Utility ratio r=%.4g lies outside the admissible interval (%.4g, %.4g)",
                           inputs.r, interval[0], interval[1])
    return inputs.p0 * (1.0 - inputs.tau0) * inputs.r + inputs.p1 * (1.0 - inputs.tau1)


def expected_utility_interval(fpr_interval: Sequence[float], fnr_interval: Sequence[float], prevalence: float,
                              r: float, mean_positive_score: Optional[float] = None,
                              check_interval: bool = True) -> Tuple[float, float]:
    """EU range from FPR/FNR interval endpoints; EU decreases in both error rates"""
    def at(tau0, tau1, check):
        inputs = UtilityInputs(p0=1.0 - prevalence, p1=prevalence, tau0=float(tau0), tau1=float(tau1), r=r,
                               mean_positive_score=mean_positive_score)
        return expected_utility(inputs, check_interval=check)

    return at(fpr_interval[1], fnr_interval[1], check_interval), at(fpr_interval[0], fnr_interval[0], False)


def _candidate_thresholds(scores: np.ndarray) -> np.ndarray:
    """Midpoints of distinct scores plus one all-positive and one all-negative threshold"""
    distinct = np.unique(scores)
    midpoints = (distinct[:-1] + distinct[1:]) / 2.0
    lowest = min(0.0, float(np.nextafter(distinct[0], -np.inf)))
    highest = max(1.0, float(distinct[-1]))
    return np.unique(np.concatenate([[lowest, highest], midpoints]))


def utility_curve(scores, outcomes, r: float) -> pd.DataFrame:
    """Expected utility at every candidate threshold, y_hat = I(score > threshold)"""
    scores = np.asarray(scores, dtype=float)
    outcomes = np.asarray(outcomes).astype(int)
    if len(scores) != len(outcomes):
        raise UtilityInputError("scores and outcomes differ in length")
    negatives = np.sort(scores[outcomes == 0])
    positives = np.sort(scores[outcomes == 1])
    if negatives.size == 0 or positives.size == 0:
        raise UtilityInputError("threshold selection needs both outcome classes")
    if not r > 0.0:
        raise UtilityInputError(f"utility ratio r must be positive, got {r!r}")

    thresholds = _candidate_thresholds(scores)
    true_negatives = np.searchsorted(negatives, thresholds, side='right')
    true_positives = positives.size - np.searchsorted(positives, thresholds, side='right')
    n = len(scores)
    return pd.DataFrame({
        'threshold': thresholds,
        'fpr': 1.0 - true_negatives / negatives.size,
        'fnr': 1.0 - true_positives / positives.size,
        'expected_utility': (true_negatives * r + true_positives) / n,
    })


def select_threshold(scores, outcomes, r: float) -> float:
    """EU-maximizing threshold; ties go to the smallest candidate"""
    curve = utility_curve(scores, outcomes, r)
    best = int(np.argmax(curve['expected_utility'].to_numpy()))
    return float(curve['threshold'].iloc[best])


def mean_positive_score(dataset: AuditDataset, group: Optional[str] = None) -> float:
    """Mean score among Y=1, weighted by the group probability when a group is given"""
    if dataset.score is None:
        raise UtilityInputError("dataset has no score column")
    weights = dataset.y.astype(float)
    if group is not None:
        weights = weights * dataset.probabilities(group)
    total = float(np.sum(weights))
    if not total > 0.0:
        raise UtilityInputError(f"no positive cases carry weight for group {group}")
    return float(np.sum(weights * dataset.score) / total)


@dataclass
class UtilityReport:
    groups: Dict[str, Dict] = field(default_factory=dict)
    rows: List[Dict] = field(default_factory=list)
    overall_threshold: Optional[float] = None

    def as_dict(self) -> Dict:
        return {'groups': self.groups, 'overall_threshold': self.overall_threshold}

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)


def group_utility_report(dataset: AuditDataset, groups: Sequence[str], levels: Sequence[float],
                         params: Mapping[str, GroupUtilityParams], r: float,
                         base_config: Optional[SensitivityConfig] = None,
                         modes: Sequence[str] = tuple(UTILITY_MODES), check_interval: bool = True,
                         include_threshold: bool = True) -> UtilityReport:
    """
    Per-group expected utility with intervals at each relative error level.

    Every level l sets eps and eps_prime to +/- l times the cell mean of the
    group probability for both FPR and FNR.
    """
    groups = [str(group) for group in groups]
    missing = [group for group in groups if group not in params]
    if missing:
        raise UtilityInputError(f"missing prevalence and base rates for groups: {', '.join(missing)}")
    unknown_modes = [mode for mode in modes if mode not in UTILITY_MODES]
    if unknown_modes:
        raise UtilityInputError(f"unknown utility modes: {', '.join(unknown_modes)}")
    base_config = base_config or SensitivityConfig()

    fpr_spec = metric_spec(MetricKind.FPR)
    fnr_spec = metric_spec(MetricKind.FNR)
    report = UtilityReport()
    if include_threshold and dataset.score is not None:
        report.overall_threshold = select_threshold(dataset.score, dataset.y, r)

    for group in groups:
        group_params = params[group]
        positive_score = mean_positive_score(dataset, group) if dataset.score is not None else None
        fpr = weighted_metric(dataset, fpr_spec, group).value
        fnr = weighted_metric(dataset, fnr_spec, group).value
        point = expected_utility(
            UtilityInputs(p0=1.0 - group_params.prevalence, p1=group_params.prevalence, tau0=fpr, tau1=fnr, r=r,
                          mean_positive_score=positive_score),
            check_interval=check_interval,
        )
        entry = {
            'prevalence': group_params.prevalence,
            'weighted_fpr': fpr,
            'weighted_fnr': fnr,
            'mean_positive_score': positive_score,
            'expected_utility': point,
            'levels': [],
        }
        for level in levels:
            for mode in modes:
                results = {}
                for spec, base_rate in ((fpr_spec, group_params.base_rate_fpr), (fnr_spec, group_params.base_rate_fnr)):
                    config = replace(
                        base_config,
                        eps_range=(-level, level),
                        eps_prime_range=(-level, level),
                        range_mode=RangeMode.RELATIVE,
                        base_rate=base_rate,
                        error_structure=UTILITY_MODES[mode],
                    )
                    results[spec.kind] = run_sensitivity(dataset, spec, group, config)

                level_entry = {'level': level, 'mode': mode, 'fpr': {}, 'fnr': {}, 'expected_utility': {}}
                for kind in INTERVAL_KINDS:
                    fpr_interval = getattr(results[MetricKind.FPR], f"{kind}_interval")
                    fnr_interval = getattr(results[MetricKind.FNR], f"{kind}_interval")
                    eu_interval = expected_utility_interval(
                        fpr_interval, fnr_interval, group_params.prevalence, r, positive_score, check_interval=False)
                    level_entry['fpr'][kind] = list(fpr_interval)
                    level_entry['fnr'][kind] = list(fnr_interval)
                    level_entry['expected_utility'][kind] = list(eu_interval)
                    report.rows.append({
                        'group': group, 'level': level, 'mode': mode, 'interval': kind,
                        'fpr_low': fpr_interval[0], 'fpr_high': fpr_interval[1],
                        'fnr_low': fnr_interval[0], 'fnr_high': fnr_interval[1],
                        'eu_low': eu_interval[0], 'eu_high': eu_interval[1],
                    })
                entry['levels'].append(level_entry)
        report.groups[group] = entry
        logger.info("Utility report for group %s: EU %.4f over %d levels", group, point, len(levels))
    return report
