"""
Simulation study
Synthetic populations with a known true group, a noisy group-probability
proxy, a logistic outcome model, and seeded scenario sweeps that compare
weighted against oracle metrics.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import expit
from scipy.stats import rankdata

from .bias import (
    EpsilonPair, assumption1_check, bias_bound, bias_estimate, bias_from_deltas, deltas,
    empirical_bias, epsilon_sample, pi_mass_ratio, same_sign_condition, sample_bias_inputs,
)
from .data_model import DEFAULT_THRESHOLD, AuditDataset, dichotomize
from .exceptions import DataValidationError, ModelFitError, SimulationConfigError
from .metrics import metric_spec, oracle_metric, weighted_metric

logger = logging.getLogger(__name__)

PROXY_VARIANCE = 20.0
Z_MEAN = -0.4
X_MEANS = (0.0, 1.0, -1.0)
X_VARIANCE = 0.5
OUTCOME_INTERCEPT = -0.2
SWEEP_AXES = ('beta1', 'beta2', 'beta3', 'n_sample')
SIM_GROUPS = ('1', '0')
SEPARATION_RESIDUAL = 1e-6


class GroupRealization(Enum):
    # A ~ Bernoulli(expit(Q1))
    BERNOULLI = 'bernoulli'
    # A = I(Q1 > 0)
    THRESHOLD = 'threshold'


@dataclass(frozen=True)
class SimConfig:
    beta1: float = 0.25
    beta2: float = 0.0
    beta3: float = 20.0
    n_population: int = 50000
    n_sample: int = 2000
    n_train: Optional[int] = None
    threshold: float = DEFAULT_THRESHOLD
    seed: int = 0
    replications: int = 100
    realization: GroupRealization = GroupRealization.BERNOULLI
    metrics: Tuple[str, ...] = ('fnr',)
    eps_widths: Tuple[float, ...] = ()

    def __post_init__(self):
        if abs(self.beta3) > PROXY_VARIANCE:
            raise SimulationConfigError(
                f"beta3={self.beta3} makes the proxy covariance matrix indefinite "
                f"(variances are {PROXY_VARIANCE:g}, so |beta3| must not exceed {PROXY_VARIANCE:g})"
            )
        for name in ('n_population', 'n_sample', 'replications'):
            if int(getattr(self, name)) < 1:
                raise SimulationConfigError(f"{name} must be a positive integer")
        if self.n_train is not None and self.n_train < 1:
            raise SimulationConfigError("n_train must be a positive integer")
        if self.training_size + self.n_sample > self.n_population:
            raise SimulationConfigError(
                f"training ({self.training_size}) plus test sample ({self.n_sample}) "
                f"exceeds the population ({self.n_population})"
            )
        if not 0.0 <= self.threshold <= 1.0:
            raise SimulationConfigError(f"threshold must lie in [0, 1], got {self.threshold!r}")
        if any(width < 0.0 for width in self.eps_widths):
            raise SimulationConfigError("eps widths must be non-negative")
        if not 0 <= self.seed < 2 ** 64:
            raise SimulationConfigError("seed must be an unsigned 64-bit integer")
        for name in self.metrics:
            metric_spec(name)

    @property
    def training_size(self) -> int:
        return self.n_train if self.n_train is not None else self.n_population // 2

    @property
    def correlation(self) -> float:
        return self.beta3 / PROXY_VARIANCE

    def as_dict(self) -> Dict:
        values = asdict(self)
        values['realization'] = self.realization.value
        values['metrics'] = list(self.metrics)
        values['eps_widths'] = list(self.eps_widths)
        return values


@dataclass(frozen=True)
class SimPopulation:
    """Per-record simulation draws; score and y_hat stay None until a predictor is applied"""

    z: np.ndarray
    x: np.ndarray
    true_prob: np.ndarray
    pi: np.ndarray
    a: np.ndarray
    y: np.ndarray
    score: Optional[np.ndarray] = None
    y_hat: Optional[np.ndarray] = None
    threshold: float = DEFAULT_THRESHOLD

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def features(self) -> np.ndarray:
        return np.column_stack([self.z, self.x])

    def scored(self, predictor: 'LogisticPredictor', threshold: float = DEFAULT_THRESHOLD) -> 'SimPopulation':
        score = predictor.predict_proba(self.features)
        return replace(self, score=score, y_hat=dichotomize(score, threshold), threshold=threshold)

    def test_dataset(self, indices) -> AuditDataset:
        """Audit dataset with exhaustive groups "1" (pi) and "0" (1 - pi)"""
        if self.y_hat is None:
            raise SimulationConfigError("population has no predictions; apply a predictor first")
        indices = np.asarray(indices, dtype=np.intp)
        pi = self.pi[indices]
        return AuditDataset(
            y=self.y[indices],
            y_hat=self.y_hat[indices],
            score=self.score[indices],
            group_probs={'1': pi, '0': 1.0 - pi},
            true_group=self.a[indices].astype(str),
            threshold=self.threshold,
            exhaustive=True,
        )


def generate_population(config: SimConfig, rng: Optional[np.random.Generator] = None) -> SimPopulation:
    rng = rng if rng is not None else np.random.default_rng(np.random.SeedSequence(config.seed))
    n = config.n_population
    z = rng.normal(Z_MEAN, 1.0, size=n)
    x = rng.normal(X_MEANS, math.sqrt(X_VARIANCE), size=(n, len(X_MEANS)))

    # (Q1, Q2) bivariate normal, variances PROXY_VARIANCE, covariance beta3
    u = rng.standard_normal(size=(n, 2))
    scale = math.sqrt(PROXY_VARIANCE)
    rho = config.correlation
    q1 = z + scale * u[:, 0]
    q2 = z + config.beta2 + scale * (rho * u[:, 0] + math.sqrt(1.0 - rho * rho) * u[:, 1])

    true_prob = expit(q1)
    if config.realization is GroupRealization.BERNOULLI:
        a = (rng.random(n) < true_prob).astype(np.int8)
    else:
        a = (q1 > 0.0).astype(np.int8)
    pi = expit(q2)

    outcome_prob = expit(OUTCOME_INTERCEPT + z + np.sum(x, axis=1) + config.beta1 * a)
    y = (rng.random(n) < outcome_prob).astype(np.int8)
    return SimPopulation(z=z, x=x, true_prob=true_prob, pi=pi, a=a, y=y, threshold=config.threshold)


class LogisticPredictor:
    """
    Logistic regression with an intercept, fit by iteratively reweighted
    least squares (Newton steps on the log-likelihood).
    """

    def __init__(self, tol: float = 1e-8, max_iter: int = 100):
        self.tol = tol
        self.max_iter = max_iter
        self.coef_ = None
        self.covariance_ = None
        self.n_iter_ = 0

    @staticmethod
    def _design(features) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        if features.ndim == 1:
            features = features[:, np.newaxis]
        return np.column_stack([np.ones(len(features)), features])

    def fit(self, features, outcomes) -> 'LogisticPredictor':
        design = self._design(features)
        outcomes = np.asarray(outcomes, dtype=float)
        n = len(outcomes)
        if n == 0:
            raise ModelFitError("training subset is empty")
        if np.all(outcomes == outcomes[0]):
            raise ModelFitError("training outcomes contain a single class")

        theta = np.zeros(design.shape[1])
        for iteration in range(1, self.max_iter + 1):
            p = expit(design @ theta)
            gradient = design.T @ (outcomes - p)
            weights = p * (1.0 - p)
            hessian = design.T @ (weights[:, np.newaxis] * design)
            if np.max(np.abs(gradient)) / n <= self.tol:
                if np.all(np.abs(outcomes - p) < SEPARATION_RESIDUAL):
                    raise ModelFitError("fitted probabilities reproduce the outcomes exactly; outcomes are separated")
                self._finish(theta, hessian, iteration - 1)
                return self
            try:
                step = np.linalg.solve(hessian, gradient)
            except np.linalg.LinAlgError as exc:
                raise ModelFitError(f"singular information matrix at iteration {iteration}: {exc}")
            theta = theta + step
            if not np.all(np.isfinite(theta)):
                raise ModelFitError("coefficients diverged; outcomes look perfectly separated")
        raise ModelFitError(f"no convergence after {self.max_iter} iterations (gradient tolerance {self.tol:g})")

    def _finish(self, theta: np.ndarray, hessian: np.ndarray, iterations: int):
        self.coef_ = theta
        self.n_iter_ = iterations
        try:
            self.covariance_ = np.linalg.inv(hessian)
        except np.linalg.LinAlgError:
            self.covariance_ = None
        logger.debug("Logistic fit converged after %d iterations", iterations)

    @property
    def standard_errors(self) -> Optional[np.ndarray]:
        return None if self.covariance_ is None else np.sqrt(np.diag(self.covariance_))

    def predict_proba(self, features) -> np.ndarray:
        if self.coef_ is None:
            raise ModelFitError("predictor has not been fit")
        return expit(self._design(features) @ self.coef_)


def train_predictor(population: SimPopulation, indices=None, tol: float = 1e-8, max_iter: int = 100) -> LogisticPredictor:
    """Logistic model of Y on (Z, X1, X2, X3); the true group is not a feature"""
    indices = np.arange(population.n) if indices is None else np.asarray(indices, dtype=np.intp)
    return LogisticPredictor(tol=tol, max_iter=max_iter).fit(population.features[indices], population.y[indices])


def group_auc(probabilities, labels) -> float:
    """Mann-Whitney AUC; tied scores count one half"""
    probabilities = np.asarray(probabilities, dtype=float)
    labels = np.asarray(labels).astype(int)
    if len(probabilities) != len(labels):
        raise DataValidationError("probabilities and labels differ in length")
    positives = labels == 1
    n_pos = int(np.sum(positives))
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataValidationError("AUC needs both classes")
    ranks = rankdata(probabilities)
    return float((np.sum(ranks[positives]) - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def population_calibration(config: SimConfig, replication: int = 0) -> Dict[str, float]:
    """Share of the population in group 1 and AUC of pi against the true group"""
    population = generate_population(config, replication_rng(config, replication))
    return {
        'group_share': float(np.mean(population.a)),
        'auc': group_auc(population.pi, population.a),
    }


def split_population(config: SimConfig, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Training indices, then a test sample drawn without replacement from the rest"""
    order = rng.permutation(config.n_population)
    train = order[:config.training_size]
    rest = order[config.training_size:]
    test = rng.choice(rest, size=config.n_sample, replace=False)
    return train, test


def replication_rng(config: SimConfig, replication: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(replication,)))


def simulate_test_dataset(config: SimConfig, replication: int = 0) -> AuditDataset:
    """One seeded test sample, as used by a single sweep replication"""
    rng = replication_rng(config, replication)
    population = generate_population(config, rng)
    train, test = split_population(config, rng)
    predictor = train_predictor(population, train)
    return population.scored(predictor, config.threshold).test_dataset(test)


def replication_rows(config: SimConfig, replication: int) -> List[Dict]:
    """Per-metric, per-group bias diagnostics for one replication"""
    dataset = simulate_test_dataset(config, replication)
    rows = []
    for metric in config.metrics:
        spec = metric_spec(metric)
        for group in SIM_GROUPS:
            nu_w = weighted_metric(dataset, spec, group).value
            eps_pair = epsilon_sample(dataset, spec, group)
            delta_pair = deltas(dataset, spec, group)
            inputs = sample_bias_inputs(dataset, spec, group)
            bias = empirical_bias(dataset, spec, group)
            row = {
                'replication': replication,
                'metric': spec.name,
                'group': group,
                'weighted': nu_w,
                'oracle': oracle_metric(dataset, spec, group).value,
                'bias': bias,
                'abs_bias': abs(bias),
                'bias_plugin': bias_estimate(inputs, eps_pair),
                'bias_deltas': bias_from_deltas(delta_pair, nu_w, inputs.base_rate, inputs.h1_rate),
                'eps': eps_pair.eps,
                'eps_prime': eps_pair.eps_prime,
                'delta': delta_pair.delta,
                'delta_star': delta_pair.delta_star,
                'abs_delta': abs(delta_pair.delta),
                'abs_delta_star': abs(delta_pair.delta_star),
                'assumption1': int(assumption1_check(delta_pair)),
                'same_sign': int(same_sign_condition(eps_pair)),
                'bound': bias_bound(nu_w, pi_mass_ratio(dataset, spec, group)),
            }
            for width in config.eps_widths:
                corners = (bias_estimate(inputs, EpsilonPair(-width, width)),
                           bias_estimate(inputs, EpsilonPair(width, -width)))
                low, high = min(corners), max(corners)
                row[f"eps_width_{width:g}_low"] = low
                row[f"eps_width_{width:g}_high"] = high
                row[f"eps_width_{width:g}_contains"] = int(low <= bias <= high)
            rows.append(row)
    return rows


def _cell_job(job: Tuple[SimConfig, str, float, int]) -> List[Dict]:
    config, axis, value, replication = job
    rows = replication_rows(config, replication)
    for row in rows:
        row['axis'] = axis
        row['value'] = value
    return rows


def _axis_value(axis: str, value) -> float:
    if axis == 'n_sample':
        if float(value) != int(value) or int(value) < 1:
            raise SimulationConfigError(f"n_sample values must be positive integers, got {value!r}")
        return int(value)
    return float(value)


CELL_KEYS = ['axis', 'value', 'metric', 'group']
SUMMARY_STATISTICS = (('mean', None), ('q025', 0.025), ('q975', 0.975))


def _summary_rows(table: pd.DataFrame) -> pd.DataFrame:
    numeric = [c for c in table.columns if c not in ('axis', 'value', 'metric', 'group', 'replication', 'summary', 'statistic')]
    grouped = table.groupby(CELL_KEYS, sort=False)[numeric]
    frames = []
    for name, quantile in SUMMARY_STATISTICS:
        stats = grouped.mean() if quantile is None else grouped.quantile(quantile)
        stats = stats.reset_index()
        stats['statistic'] = name
        frames.append(stats)
    summary = pd.concat(frames, ignore_index=True)
    summary['summary'] = 1
    summary['replication'] = -1
    return summary


def run_scenario_sweep(config: SimConfig, axis: str, values: Sequence[float], replications: Optional[int] = None,
                       workers: int = 1) -> pd.DataFrame:
    """
    Replicated simulation over one parameter axis.

    Replication r uses the same random stream in every cell, so cells differ
    only through the swept parameter. Returns per-replication rows
    (summary=0) followed by mean and 2.5%/97.5% percentile rows (summary=1).
    """
    if axis not in SWEEP_AXES:
        raise SimulationConfigError(f"unknown sweep axis '{axis}' (expected one of {', '.join(SWEEP_AXES)})")
    if not values:
        raise SimulationConfigError("sweep needs at least one value")
    replications = config.replications if replications is None else replications
    if replications < 1:
        raise SimulationConfigError("replications must be a positive integer")

    jobs = []
    for value in values:
        value = _axis_value(axis, value)
        cell_config = replace(config, **{axis: value})
        jobs.extend((cell_config, axis, value, r) for r in range(replications))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_cell_job, jobs))
    else:
        results = [_cell_job(job) for job in jobs]

    rows = [row for job_rows in results for row in job_rows]
    table = pd.DataFrame(rows)
    table['summary'] = 0
    table['statistic'] = ''
    leading = ['axis', 'value', 'replication', 'summary', 'statistic', 'metric', 'group']
    table = table[leading + [c for c in table.columns if c not in leading]]
    summary = _summary_rows(table)[table.columns]
    logger.info("Sweep over %s finished: %d cells x %d replications", axis, len(values), replications)
    return pd.concat([table, summary], ignore_index=True)


def assumption1_cells(table: pd.DataFrame) -> pd.DataFrame:
    """
    Per sweep cell: replication means of |delta|, |delta_star|, |bias| and the
    bound, with the delta assumption and bound coverage judged on those means.

    With no conditional dependence delta and delta_star are both zero in
    expectation, so single replications fail the check on sampling noise.
    """
    rows = table[table['summary'] == 0]
    means = rows.groupby(CELL_KEYS, sort=False)[['abs_delta', 'abs_delta_star', 'abs_bias', 'bound', 'assumption1']]
    cells = means.mean().reset_index().rename(columns={
        'abs_delta': 'mean_abs_delta',
        'abs_delta_star': 'mean_abs_delta_star',
        'abs_bias': 'mean_abs_bias',
        'bound': 'mean_bound',
        'assumption1': 'assumption1_share',
    })
    cells['assumption1'] = (cells['mean_abs_delta'] <= cells['mean_abs_delta_star']).astype(int)
    cells['bound_covers'] = (cells['mean_abs_bias'] <= cells['mean_bound']).astype(int)
    return cells
