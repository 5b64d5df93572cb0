"""
Group performance metrics
Weighted, oracle and marginal estimators for confusion-matrix metrics written
as E[w h1 h2] / E[w h1], where w is a group probability, a group indicator or 1.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, Union

import numpy as np

from .data_model import AuditDataset
from .exceptions import UndefinedMetricError, UnknownMetricError


class Cell(Enum):
    """Confusion matrix cells keyed by (y, y_hat)"""

    TN = (0, 0)
    FP = (0, 1)
    FN = (1, 0)
    TP = (1, 1)

    @property
    def index(self) -> int:
        return 2 * self.value[0] + self.value[1]


CELL_ORDER = (Cell.TN, Cell.FP, Cell.FN, Cell.TP)


class Indicator(Enum):
    """Binary functions of (y, y_hat), each given by the cells where it equals 1"""

    ONE = frozenset({Cell.TN, Cell.FP, Cell.FN, Cell.TP})
    Y = frozenset({Cell.FN, Cell.TP})
    ONE_MINUS_Y = frozenset({Cell.TN, Cell.FP})
    Y_HAT = frozenset({Cell.FP, Cell.TP})
    ONE_MINUS_Y_HAT = frozenset({Cell.TN, Cell.FN})
    MISMATCH = frozenset({Cell.FP, Cell.FN})

    @property
    def cells(self) -> FrozenSet[Cell]:
        return self.value

    def evaluate(self, y, y_hat) -> np.ndarray:
        """Vectorized h(y, y_hat) in {0, 1}"""
        lookup = np.array([1.0 if cell in self.value else 0.0 for cell in CELL_ORDER])
        return lookup[2 * np.asarray(y, dtype=np.intp) + np.asarray(y_hat, dtype=np.intp)]


class MetricKind(Enum):
    FNR = 'fnr'
    FPR = 'fpr'
    PPV = 'ppv'
    NPV = 'npv'
    SELECTION_RATE = 'selection_rate'
    ERROR_RATE = 'error_rate'


class Estimator(Enum):
    WEIGHTED = 'weighted'
    ORACLE = 'oracle'
    MARGINAL = 'marginal'


METRIC_TABLE = {
    MetricKind.FNR: (Indicator.Y, Indicator.ONE_MINUS_Y_HAT),
    MetricKind.FPR: (Indicator.ONE_MINUS_Y, Indicator.Y_HAT),
    MetricKind.PPV: (Indicator.Y_HAT, Indicator.Y),
    MetricKind.NPV: (Indicator.ONE_MINUS_Y_HAT, Indicator.ONE_MINUS_Y),
    MetricKind.SELECTION_RATE: (Indicator.ONE, Indicator.Y_HAT),
    MetricKind.ERROR_RATE: (Indicator.ONE, Indicator.MISMATCH),
}

# The bound over-covers badly for these, the two bias terms usually having opposite signs.
LOOSE_BOUND_METRICS = frozenset({MetricKind.PPV, MetricKind.NPV})


def _cell_names(cells) -> str:
    return '+'.join(cell.name for cell in CELL_ORDER if cell in cells) or 'none'


@dataclass(frozen=True)
class MetricSpec:
    """A metric identified by its (h1, h2) pair"""

    kind: MetricKind
    h1: Indicator
    h2: Indicator

    def __post_init__(self):
        if METRIC_TABLE[self.kind] != (self.h1, self.h2):
            raise ValueError(f"(h1, h2) = ({self.h1.name}, {self.h2.name}) does not define {self.kind.value}")

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def numerator_cells(self) -> FrozenSet[Cell]:
        """Cells where h1 h2 = 1"""
        return self.h1.cells & self.h2.cells

    @property
    def complement_cells(self) -> FrozenSet[Cell]:
        """Cells where h1 (1 - h2) = 1"""
        return self.h1.cells - self.h2.cells

    @property
    def numerator_cell_name(self) -> str:
        return _cell_names(self.numerator_cells)

    @property
    def complement_cell_name(self) -> str:
        return _cell_names(self.complement_cells)

    @property
    def denominator_cell_name(self) -> str:
        return _cell_names(self.h1.cells)

    @property
    def bound_is_sharp(self) -> bool:
        return self.kind not in LOOSE_BOUND_METRICS

    def h1_values(self, dataset: AuditDataset) -> np.ndarray:
        return self.h1.evaluate(dataset.y, dataset.y_hat)

    def h2_values(self, dataset: AuditDataset) -> np.ndarray:
        return self.h2.evaluate(dataset.y, dataset.y_hat)


@dataclass(frozen=True)
class MetricEstimate:
    value: float
    numerator_mass: float
    denominator_mass: float
    estimator: Estimator

    def as_dict(self) -> Dict:
        return {
            'value': self.value,
            'numerator_mass': self.numerator_mass,
            'denominator_mass': self.denominator_mass,
            'estimator': self.estimator.value,
        }


def parse_metric(name: Union[str, MetricKind]) -> MetricKind:
    """Metric kind from a case-insensitive CLI name"""
    if isinstance(name, MetricKind):
        return name
    try:
        return MetricKind(str(name).strip().lower())
    except ValueError:
        choices = ', '.join(kind.value for kind in MetricKind)
        raise UnknownMetricError(f"unknown metric '{name}' (expected one of {choices})", metric=str(name))


def metric_spec(kind: Union[str, MetricKind]) -> MetricSpec:
    kind = parse_metric(kind)
    h1, h2 = METRIC_TABLE[kind]
    return MetricSpec(kind=kind, h1=h1, h2=h2)


def ratio_estimate(weights: np.ndarray, h1: np.ndarray, h2: np.ndarray, estimator: Estimator,
                   spec: MetricSpec, group: str = None) -> MetricEstimate:
    """sum(w h1 h2) / sum(w h1); an empty denominator is an error, never 0/0 -> 0"""
    weighted_h1 = weights * h1
    denominator = float(np.sum(weighted_h1))
    numerator = float(np.sum(weighted_h1 * h2))
    if not denominator > 0.0:
        raise UndefinedMetricError(
            f"{estimator.value} estimate has an empty denominator",
            metric=spec.name, group=group, cell=spec.denominator_cell_name,
        )
    return MetricEstimate(
        value=numerator / denominator,
        numerator_mass=numerator,
        denominator_mass=denominator,
        estimator=estimator,
    )


def weighted_metric(dataset: AuditDataset, spec: MetricSpec, group: str) -> MetricEstimate:
    """Metric with group probabilities in place of group indicators"""
    return ratio_estimate(
        dataset.probabilities(group), spec.h1_values(dataset), spec.h2_values(dataset),
        Estimator.WEIGHTED, spec, str(group),
    )


def oracle_metric(dataset: AuditDataset, spec: MetricSpec, group: str) -> MetricEstimate:
    """Metric with the true group indicators"""
    return ratio_estimate(
        dataset.indicator(group), spec.h1_values(dataset), spec.h2_values(dataset),
        Estimator.ORACLE, spec, str(group),
    )


def marginal_metric(dataset: AuditDataset, spec: MetricSpec) -> MetricEstimate:
    """Metric over all records regardless of group"""
    return ratio_estimate(
        np.ones(dataset.n), spec.h1_values(dataset), spec.h2_values(dataset),
        Estimator.MARGINAL, spec,
    )


def confusion_masses(weights, y, y_hat) -> Dict[str, float]:
    """Weighted TN/FP/FN/TP masses"""
    weights = np.asarray(weights, dtype=float)
    cells = 2 * np.asarray(y, dtype=np.intp) + np.asarray(y_hat, dtype=np.intp)
    return {
        cell.name.lower(): float(np.sum(weights[cells == cell.index]))
        for cell in CELL_ORDER
    }
