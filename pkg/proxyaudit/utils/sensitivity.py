"""
Sensitivity analysis for weighted estimators
Bias-corrected estimates over an (eps, eps_prime) range with a nonparametric
bootstrap, plausible mean and sensitivity intervals, and contour grids.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from .bias import BiasInputs, EpsilonPair, bias_estimate
from .data_model import AuditDataset
from .exceptions import DataValidationError, InfeasibleRangeError, UndefinedMetricError
from .metrics import MetricSpec, marginal_metric, weighted_metric

logger = logging.getLogger(__name__)

REPLICATE_CHUNK = 128
BOUND_TOLERANCE = 1e-12
GRID_COLUMNS = ['eps', 'eps_prime', 'bias', 'corrected']


class RangeMode(Enum):
    ABSOLUTE = 'absolute'
    # multiples of the cell mean of pi, e.g. (-0.1, 0.1) for +/-10%
    RELATIVE = 'relative'


class ErrorStructure(Enum):
    # eps and eps_prime vary independently over the whole box
    INDEPENDENT = 'independent'
    # eps and eps_prime move together: both at the low or both at the high end
    ALIGNED = 'aligned'


class CorrectionSign(Enum):
    SUBTRACT = 'subtract'
    ADD = 'add'


Interval = Tuple[float, float]


@dataclass(frozen=True)
class SensitivityConfig:
    eps_range: Interval = (0.0, 0.0)
    eps_prime_range: Interval = (0.0, 0.0)
    base_rate: float = 1.0
    range_mode: RangeMode = RangeMode.ABSOLUTE
    grid_resolution: int = 21
    bootstrap_reps: int = 1000
    alpha: float = 0.05
    seed: int = 0
    error_structure: ErrorStructure = ErrorStructure.INDEPENDENT
    correction_sign: CorrectionSign = CorrectionSign.SUBTRACT
    resample: bool = True
    workers: int = 1

    def __post_init__(self):
        for name in ('eps_range', 'eps_prime_range'):
            low, high = getattr(self, name)
            if low > high:
                raise DataValidationError(f"{name} is empty: [{low}, {high}]")
        if not 0.0 < self.base_rate <= 1.0:
            raise DataValidationError(f"base rate must lie in (0, 1], got {self.base_rate!r}")
        if self.bootstrap_reps < 1:
            raise DataValidationError("bootstrap_reps must be at least 1")
        if self.grid_resolution < 1:
            raise DataValidationError("grid_resolution must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise DataValidationError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise DataValidationError("seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise DataValidationError("workers must be at least 1")

    def as_dict(self) -> Dict:
        return {
            'eps_range': list(self.eps_range),
            'eps_prime_range': list(self.eps_prime_range),
            'base_rate': self.base_rate,
            'range_mode': self.range_mode.value,
            'grid_resolution': self.grid_resolution,
            'bootstrap_reps': self.bootstrap_reps,
            'alpha': self.alpha,
            'seed': self.seed,
            'error_structure': self.error_structure.value,
            'correction_sign': self.correction_sign.value,
            'resample': self.resample,
        }


@dataclass
class SensitivityResult:
    weighted_estimate: float
    corrected_at_corners: Dict[str, float]
    estimate_interval: Interval
    plausible_mean_interval: Interval
    sensitivity_interval: Interval
    eps_range: Interval
    eps_prime_range: Interval
    replicates_used: int
    grid: Optional[pd.DataFrame] = field(default=None, repr=False)

    def as_dict(self) -> Dict:
        return {
            'weighted_estimate': self.weighted_estimate,
            'corrected_at_corners': self.corrected_at_corners,
            'estimate_interval': list(self.estimate_interval),
            'plausible_mean_interval': list(self.plausible_mean_interval),
            'sensitivity_interval': list(self.sensitivity_interval),
            'eps_range': list(self.eps_range),
            'eps_prime_range': list(self.eps_prime_range),
            'replicates_used': self.replicates_used,
        }


def corrected_estimate(nu_w, bias_value, sign: CorrectionSign = CorrectionSign.SUBTRACT):
    """Bias-corrected estimate clamped to [0, 1]; works on scalars and arrays"""
    corrected = np.asarray(nu_w) - bias_value if sign is CorrectionSign.SUBTRACT else np.asarray(nu_w) + bias_value
    clipped = np.clip(corrected, 0.0, 1.0)
    return float(clipped) if np.ndim(clipped) == 0 else clipped


class _CellColumns:
    """Per-record columns whose weighted sums give every bootstrap statistic"""

    def __init__(self, dataset: AuditDataset, spec: MetricSpec, group: str):
        pi = dataset.probabilities(group)
        h1 = spec.h1_values(dataset)
        h2 = spec.h2_values(dataset)
        numerator_cell = h1 * h2
        complement_cell = h1 * (1.0 - h2)
        self.matrix = np.column_stack([pi * numerator_cell, pi * complement_cell, numerator_cell, complement_cell])
        self.n = dataset.n

    def statistics(self, sums: np.ndarray) -> Dict[str, np.ndarray]:
        """nu_w, nu and the cell means of pi from rows of [P1, P2, N1, N2] sums"""
        pi_num, pi_comp, count_num, count_comp = (sums[:, k] for k in range(4))
        with np.errstate(divide='ignore', invalid='ignore'):
            nu_w = np.where(pi_num + pi_comp > 0.0, pi_num / (pi_num + pi_comp), np.nan)
            nu = np.where(count_num + count_comp > 0.0, count_num / (count_num + count_comp), np.nan)
            m = np.where(count_num > 0.0, pi_num / count_num, np.nan)
            m_prime = np.where(count_comp > 0.0, pi_comp / count_comp, np.nan)
        return {'nu_w': nu_w, 'nu': nu, 'm': m, 'm_prime': m_prime}


def _cell_mean_bounds(m) -> Tuple[np.ndarray, np.ndarray]:
    """[m - 1, m]; an empty cell leaves its parameter unconstrained within [-1, 1]"""
    m = np.asarray(m, dtype=float)
    low = np.where(np.isnan(m), -1.0, m - 1.0)
    high = np.where(np.isnan(m), 1.0, m)
    return low, high


def absolute_ranges(dataset: AuditDataset, spec: MetricSpec, group: str,
                    config: SensitivityConfig) -> Tuple[Interval, Interval]:
    """Configured ranges in absolute eps units"""
    if config.range_mode is RangeMode.ABSOLUTE:
        return tuple(config.eps_range), tuple(config.eps_prime_range)
    stats = _CellColumns(dataset, spec, group)
    sums = np.sum(stats.matrix, axis=0)[np.newaxis, :]
    cells = stats.statistics(sums)
    m = 0.0 if np.isnan(cells['m'][0]) else float(cells['m'][0])
    m_prime = 0.0 if np.isnan(cells['m_prime'][0]) else float(cells['m_prime'][0])
    eps = (config.eps_range[0] * m, config.eps_range[1] * m)
    eps_prime = (config.eps_prime_range[0] * m_prime, config.eps_prime_range[1] * m_prime)
    return eps, eps_prime


def feasible_ranges(dataset: AuditDataset, spec: MetricSpec, group: str,
                    config: SensitivityConfig) -> Tuple[Interval, Interval]:
    """Configured ranges intersected with the full-sample epsilon bounds"""
    eps, eps_prime = absolute_ranges(dataset, spec, group, config)
    stats = _CellColumns(dataset, spec, group)
    cells = stats.statistics(np.sum(stats.matrix, axis=0)[np.newaxis, :])
    feasible = []
    for name, (low, high), m in (('eps', eps, cells['m']), ('eps_prime', eps_prime, cells['m_prime'])):
        bound_low, bound_high = _cell_mean_bounds(m)
        low_f = max(low, float(bound_low[0]))
        high_f = min(high, float(bound_high[0]))
        if low_f > high_f + BOUND_TOLERANCE:
            raise InfeasibleRangeError(
                f"{name} range [{low}, {high}] does not intersect the feasible bounds "
                f"[{float(bound_low[0])}, {float(bound_high[0])}] for metric={spec.name} group={group}; "
                f"widen or shift the requested range"
            )
        feasible.append((low_f, max(low_f, high_f)))
    return feasible[0], feasible[1]


def _corner_pairs(eps: Interval, eps_prime: Interval, structure: ErrorStructure):
    """The two corners that carry the extreme corrected estimates"""
    if structure is ErrorStructure.INDEPENDENT:
        return (eps[0], eps_prime[1]), (eps[1], eps_prime[0])
    return (eps[0], eps_prime[0]), (eps[1], eps_prime[1])


def _corrected_at(nu_w, nu, eps, eps_prime, config: SensitivityConfig):
    bias = ((1.0 - nu_w) * nu * eps - nu_w * (1.0 - nu) * eps_prime) / config.base_rate
    return corrected_estimate(nu_w, bias, config.correction_sign)


def _replicate_counts(n: int, seed: int, start: int, stop: int, resample: bool) -> np.ndarray:
    """Multiplicity of each record in replicates start..stop-1, one RNG stream per replicate"""
    rows = np.empty((stop - start, n), dtype=float)
    for offset, replicate in enumerate(range(start, stop)):
        if resample:
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate,)))
            rows[offset] = np.bincount(rng.integers(0, n, size=n), minlength=n)
        else:
            rows[offset] = 1.0
    return rows


def bootstrap_replicates(dataset: AuditDataset, spec: MetricSpec, group: str,
                         config: SensitivityConfig) -> pd.DataFrame:
    """
    Per-replicate statistics: nu_w, nu, the replicate's constrained eps box
    and the corrected estimates at the two designated corners.
    """
    eps, eps_prime = feasible_ranges(dataset, spec, group, config)
    columns = _CellColumns(dataset, spec, group)

    def chunk_sums(start: int) -> np.ndarray:
        stop = min(start + REPLICATE_CHUNK, config.bootstrap_reps)
        counts = _replicate_counts(columns.n, config.seed, start, stop, config.resample)
        return counts @ columns.matrix

    starts = list(range(0, config.bootstrap_reps, REPLICATE_CHUNK))
    if config.workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            chunks = list(executor.map(chunk_sums, starts))
    else:
        chunks = [chunk_sums(start) for start in starts]
    stats = columns.statistics(np.vstack(chunks))

    # project the configured box into each replicate's own feasible bounds
    eps_low_b, eps_high_b = _cell_mean_bounds(stats['m'])
    eps_prime_low_b, eps_prime_high_b = _cell_mean_bounds(stats['m_prime'])
    eps_lo = np.clip(eps[0], eps_low_b, eps_high_b)
    eps_hi = np.clip(eps[1], eps_low_b, eps_high_b)
    eps_prime_lo = np.clip(eps_prime[0], eps_prime_low_b, eps_prime_high_b)
    eps_prime_hi = np.clip(eps_prime[1], eps_prime_low_b, eps_prime_high_b)

    (a_eps, a_eps_prime), (b_eps, b_eps_prime) = _corner_pairs(
        (eps_lo, eps_hi), (eps_prime_lo, eps_prime_hi), config.error_structure)
    return pd.DataFrame({
        'replicate': np.arange(config.bootstrap_reps),
        'nu_w': stats['nu_w'],
        'nu': stats['nu'],
        'eps_lo': eps_lo,
        'eps_hi': eps_hi,
        'eps_prime_lo': eps_prime_lo,
        'eps_prime_hi': eps_prime_hi,
        'corner_a': _corrected_at(stats['nu_w'], stats['nu'], a_eps, a_eps_prime, config),
        'corner_b': _corrected_at(stats['nu_w'], stats['nu'], b_eps, b_eps_prime, config),
    })


def run_sensitivity(dataset: AuditDataset, spec: MetricSpec, group: str, config: SensitivityConfig,
                    include_grid: bool = False) -> SensitivityResult:
    """
    Bootstrap sensitivity analysis of one weighted metric for one group.

    Only the two extreme corners of the (eps, eps_prime) box are evaluated per
    replicate; the corrected estimate is monotone in each parameter.
    """
    group = str(group)
    nu_w = weighted_metric(dataset, spec, group).value
    nu = marginal_metric(dataset, spec).value
    eps, eps_prime = feasible_ranges(dataset, spec, group, config)
    inputs = BiasInputs(nu_w=nu_w, nu=nu, base_rate=config.base_rate)

    corners = {}
    for eps_label, eps_value in (('min', eps[0]), ('max', eps[1])):
        for prime_label, prime_value in (('min', eps_prime[0]), ('max', eps_prime[1])):
            bias = bias_estimate(inputs, EpsilonPair(eps_value, prime_value))
            corners[f"eps_{eps_label}/eps_prime_{prime_label}"] = corrected_estimate(nu_w, bias, config.correction_sign)
    pair_a, pair_b = _corner_pairs(eps, eps_prime, config.error_structure)
    corner_values = [
        corrected_estimate(nu_w, bias_estimate(inputs, EpsilonPair(*pair)), config.correction_sign)
        for pair in (pair_a, pair_b)
    ]

    replicates = bootstrap_replicates(dataset, spec, group, config)
    defined = replicates.dropna(subset=['corner_a', 'corner_b'])
    dropped = len(replicates) - len(defined)
    if defined.empty:
        raise UndefinedMetricError(
            "metric is undefined in every bootstrap replicate",
            metric=spec.name, group=group, cell=spec.denominator_cell_name,
        )
    if dropped:
        logger.warning("Dropped %d of %d bootstrap replicates with an undefined %s for group %s",
                       dropped, len(replicates), spec.name, group)

    percentiles = [100.0 * config.alpha / 2.0, 100.0 * (1.0 - config.alpha / 2.0)]
    means = [float(defined[column].mean()) for column in ('corner_a', 'corner_b')]
    bounds = [np.percentile(defined[column].to_numpy(), percentiles) for column in ('corner_a', 'corner_b')]

    result = SensitivityResult(
        weighted_estimate=nu_w,
        corrected_at_corners=corners,
        estimate_interval=(min(corner_values), max(corner_values)),
        plausible_mean_interval=(min(means), max(means)),
        sensitivity_interval=(float(min(b[0] for b in bounds)), float(max(b[1] for b in bounds))),
        eps_range=eps,
        eps_prime_range=eps_prime,
        replicates_used=len(defined),
    )
    if include_grid:
        result.grid = contour_grid(dataset, spec, group, config)
    logger.info("Sensitivity %s group %s: plausible mean [%.4f, %.4f], sensitivity [%.4f, %.4f]",
                spec.name, group, *result.plausible_mean_interval, *result.sensitivity_interval)
    return result


def _axis(low: float, high: float, resolution: int) -> np.ndarray:
    if resolution == 1 or low == high:
        return np.array([low]) if low == high else np.array([(low + high) / 2.0])
    return np.linspace(low, high, resolution)


def contour_grid(dataset: AuditDataset, spec: MetricSpec, group: str, config: SensitivityConfig) -> pd.DataFrame:
    """
    Bias and corrected estimate over the configured (eps, eps_prime) grid.

    Grid points outside the full-sample epsilon bounds are omitted.
    """
    group = str(group)
    feasible_eps, feasible_eps_prime = feasible_ranges(dataset, spec, group, config)
    eps, eps_prime = absolute_ranges(dataset, spec, group, config)
    inputs = BiasInputs(
        nu_w=weighted_metric(dataset, spec, group).value,
        nu=marginal_metric(dataset, spec).value,
        base_rate=config.base_rate,
    )

    rows = []
    for eps_value in _axis(eps[0], eps[1], config.grid_resolution):
        if not feasible_eps[0] - BOUND_TOLERANCE <= eps_value <= feasible_eps[1] + BOUND_TOLERANCE:
            continue
        for prime_value in _axis(eps_prime[0], eps_prime[1], config.grid_resolution):
            if not feasible_eps_prime[0] - BOUND_TOLERANCE <= prime_value <= feasible_eps_prime[1] + BOUND_TOLERANCE:
                continue
            bias = bias_estimate(inputs, EpsilonPair(float(eps_value), float(prime_value)))
            rows.append((float(eps_value), float(prime_value), bias,
                         corrected_estimate(inputs.nu_w, bias, config.correction_sign)))
    if not rows:
        raise InfeasibleRangeError(
            f"no grid point of metric={spec.name} group={group} lies inside the feasible bounds; "
            f"increase grid_resolution or widen the range"
        )
    return pd.DataFrame(rows, columns=GRID_COLUMNS)
