"""
Audit data model
Records, datasets and CSV ingestion for group-probability fairness audits.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .exceptions import DataValidationError, SchemaError

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.5
DEFAULT_PROB_PREFIX = 'prob_'
SUM_TOLERANCE = 1e-6


def validate_threshold(threshold: Optional[float]) -> float:
    if threshold is None:
        return DEFAULT_THRESHOLD
    if not 0.0 <= threshold <= 1.0:
        raise DataValidationError(f"threshold must lie in [0, 1], got {threshold!r}")
    return float(threshold)


def dichotomize(score, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Binary predictions from scores: y_hat = 1 iff score > threshold"""
    return (np.asarray(score, dtype=float) > threshold).astype(np.int8)


@dataclass(frozen=True)
class AuditRecord:
    """One observation: outcome, prediction or score, group probabilities, optional true group"""

    y: int
    group_probs: Mapping[str, float]
    y_hat: Optional[int] = None
    score: Optional[float] = None
    true_group: Optional[str] = None

    def __post_init__(self):
        if self.y not in (0, 1):
            raise DataValidationError(f"outcome must be 0 or 1, got {self.y!r}")
        if self.y_hat is None and self.score is None:
            raise DataValidationError("record needs a prediction or a score")
        if self.y_hat is not None and self.y_hat not in (0, 1):
            raise DataValidationError(f"prediction must be 0 or 1, got {self.y_hat!r}")
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise DataValidationError(f"score must lie in [0, 1], got {self.score!r}")
        for group, prob in self.group_probs.items():
            if not 0.0 <= prob <= 1.0:
                raise DataValidationError(f"probability for group {group} outside [0, 1]: {prob!r}")

    def dichotomized(self, threshold: float = DEFAULT_THRESHOLD) -> 'AuditRecord':
        """Return the record with y_hat derived from the score when it is absent"""
        threshold = validate_threshold(threshold)
        if self.y_hat is not None:
            return self
        return AuditRecord(
            y=self.y,
            group_probs=dict(self.group_probs),
            y_hat=int(self.score > threshold),
            score=self.score,
            true_group=self.true_group,
        )


@dataclass(frozen=True)
class ColumnSchema:
    """Maps CSV columns onto audit record fields"""

    outcome: str = 'y'
    prediction: Optional[str] = 'y_hat'
    score: Optional[str] = 'score'
    prob_columns: Optional[Dict[str, str]] = None
    prob_prefix: str = DEFAULT_PROB_PREFIX
    true_group: Optional[str] = 'true_group'
    exhaustive: bool = False

    def resolve_prob_columns(self, header: Sequence[str]) -> Dict[str, str]:
        """Group id -> column name, from the explicit mapping or the prefix"""
        if self.prob_columns:
            return dict(self.prob_columns)
        return {
            column[len(self.prob_prefix):]: column
            for column in header
            if column.startswith(self.prob_prefix) and len(column) > len(self.prob_prefix)
        }


@dataclass
class DatasetSummary:
    n: int
    group_ids: Tuple[str, ...]
    mean_probability: Dict[str, float]
    n_a: Optional[Dict[str, int]] = None
    confusion: Optional[Dict[str, Dict[str, int]]] = None

    def as_dict(self) -> Dict:
        return {
            'n': self.n,
            'group_ids': list(self.group_ids),
            'mean_probability': self.mean_probability,
            'n_a': self.n_a,
            'confusion': self.confusion,
        }


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class AuditDataset:
    """
    Immutable collection of audit records stored column-wise.

    Group probabilities are kept per declared group id; they only have to sum
    to one when the group set is declared exhaustive.
    """

    def __init__(
        self,
        y,
        group_probs: Mapping[str, Iterable[float]],
        y_hat=None,
        score=None,
        true_group=None,
        threshold: Optional[float] = None,
        exhaustive: bool = False,
    ):
        if not group_probs:
            raise SchemaError("dataset needs at least one group probability column")
        if threshold is not None:
            threshold = validate_threshold(threshold)

        y = np.asarray(y)
        n = len(y)
        if n < 1:
            raise DataValidationError("dataset must contain at least one record")
        self._y = _readonly(self._binary(y, 'outcome'))

        if score is not None:
            score = np.asarray(score, dtype=float)
            self._check_length(score, n, 'score')
            self._check_unit_interval(score, 'score')
            score = _readonly(score.copy())
        self._score = score

        if y_hat is None:
            if score is None:
                raise SchemaError("dataset needs a prediction or a score column")
            threshold = validate_threshold(threshold)
            y_hat = dichotomize(score, threshold)
        self._y_hat = _readonly(self._binary(np.asarray(y_hat), 'prediction'))
        self._threshold = threshold

        probs = {}
        for group, values in group_probs.items():
            values = np.asarray(values, dtype=float)
            self._check_length(values, n, f"probability for group {group}")
            self._check_unit_interval(values, f"probability for group {group}")
            probs[str(group)] = _readonly(values.copy())
        self._probs = probs
        self._group_ids = tuple(probs)
        self._exhaustive = exhaustive

        if exhaustive:
            totals = np.sum(np.vstack(list(probs.values())), axis=0)
            bad = np.flatnonzero(np.abs(totals - 1.0) > SUM_TOLERANCE)
            if bad.size:
                raise DataValidationError(
                    f"group probabilities sum to {totals[bad[0]]!r}, expected 1",
                    row=int(bad[0]),
                )

        if true_group is not None:
            labels = np.array([str(label) for label in true_group], dtype=object)
            self._check_length(labels, n, 'true group')
            true_group = _readonly(labels)
        self._true_group = true_group
        self._records = None

    @staticmethod
    def _check_length(values: np.ndarray, n: int, what: str):
        if len(values) != n:
            raise DataValidationError(f"{what} has {len(values)} values, expected {n}")

    @staticmethod
    def _check_unit_interval(values: np.ndarray, what: str):
        bad = np.flatnonzero(~((values >= 0.0) & (values <= 1.0)))
        if bad.size:
            row = int(bad[0])
            raise DataValidationError(f"{what} outside [0, 1]: {values[row]!r}", row=row)

    @staticmethod
    def _binary(values: np.ndarray, what: str) -> np.ndarray:
        numeric = pd.to_numeric(pd.Series(values), errors='coerce').to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isin(numeric, (0.0, 1.0)))
        if bad.size:
            row = int(bad[0])
            raise DataValidationError(f"{what} must be 0 or 1, got {values[row]!r}", row=row)
        return numeric.astype(np.int8)

    @classmethod
    def from_records(
        cls,
        records: Sequence[AuditRecord],
        group_ids: Optional[Sequence[str]] = None,
        threshold: Optional[float] = None,
        exhaustive: bool = False,
    ) -> 'AuditDataset':
        """Build a dataset from records that share one group set"""
        if not records:
            raise DataValidationError("dataset must contain at least one record")
        group_ids = tuple(group_ids) if group_ids is not None else tuple(records[0].group_probs)
        for index, record in enumerate(records):
            if set(record.group_probs) != set(group_ids):
                raise DataValidationError("record group set differs from the dataset's", row=index)

        threshold = validate_threshold(threshold)
        records = [record.dichotomized(threshold) for record in records]
        has_scores = all(record.score is not None for record in records)
        has_labels = all(record.true_group is not None for record in records)
        return cls(
            y=[record.y for record in records],
            y_hat=[record.y_hat for record in records],
            score=[record.score for record in records] if has_scores else None,
            group_probs={g: [record.group_probs[g] for record in records] for g in group_ids},
            true_group=[record.true_group for record in records] if has_labels else None,
            threshold=threshold,
            exhaustive=exhaustive,
        )

    @property
    def n(self) -> int:
        return len(self._y)

    def __len__(self) -> int:
        return self.n

    @property
    def y(self) -> np.ndarray:
        return self._y

    @property
    def y_hat(self) -> np.ndarray:
        return self._y_hat

    @property
    def score(self) -> Optional[np.ndarray]:
        return self._score

    @property
    def true_group(self) -> Optional[np.ndarray]:
        return self._true_group

    @property
    def group_ids(self) -> Tuple[str, ...]:
        return self._group_ids

    @property
    def exhaustive(self) -> bool:
        return self._exhaustive

    @property
    def threshold(self) -> Optional[float]:
        return self._threshold

    @property
    def has_labels(self) -> bool:
        return self._true_group is not None

    @property
    def records(self) -> Tuple[AuditRecord, ...]:
        if self._records is None:
            self._records = tuple(
                AuditRecord(
                    y=int(self._y[i]),
                    y_hat=int(self._y_hat[i]),
                    score=None if self._score is None else float(self._score[i]),
                    group_probs={g: float(p[i]) for g, p in self._probs.items()},
                    true_group=None if self._true_group is None else self._true_group[i],
                )
                for i in range(self.n)
            )
        return self._records

    def probabilities(self, group: str) -> np.ndarray:
        group = str(group)
        if group not in self._probs:
            raise SchemaError(f"no probability column for group {group}")
        return self._probs[group]

    def indicator(self, group: str) -> np.ndarray:
        """I(A = group) for every record; requires true labels"""
        if self._true_group is None:
            raise DataValidationError("true group labels are required for this operation")
        return (self._true_group == str(group)).astype(float)

    def n_a(self) -> Optional[Dict[str, int]]:
        if self._true_group is None:
            return None
        return {g: int(np.sum(self._true_group == g)) for g in self._group_ids}

    def to_frame(self, prob_prefix: str = DEFAULT_PROB_PREFIX) -> pd.DataFrame:
        """Canonical column layout: y, y_hat, score?, prob_<g>..., true_group?"""
        columns = {'y': self._y, 'y_hat': self._y_hat}
        if self._score is not None:
            columns['score'] = self._score
        for group, values in self._probs.items():
            columns[f"{prob_prefix}{group}"] = values
        if self._true_group is not None:
            columns['true_group'] = self._true_group
        return pd.DataFrame(columns)


def ingest_csv(path, schema: Optional[ColumnSchema] = None, threshold: Optional[float] = None) -> AuditDataset:
    """
    Read and validate an audit CSV.

    Scores are dichotomized at ``threshold`` (default 0.5) when the schema has
    no prediction column. Missing values are rejected.
    """
    schema = schema or ColumnSchema()
    path = Path(path)
    if not path.is_file():
        raise DataValidationError(f"input file not found: {path}")

    header = list(pd.read_csv(path, encoding='utf-8', comment='#', nrows=0).columns)
    label_dtype = {schema.true_group: str} if schema.true_group in header else None
    frame = pd.read_csv(path, encoding='utf-8', comment='#', dtype=label_dtype, float_precision='round_trip')

    if schema.outcome not in header:
        raise SchemaError(f"missing outcome column '{schema.outcome}'")
    prediction = schema.prediction if schema.prediction in header else None
    score = schema.score if schema.score in header else None
    if prediction is None and score is None:
        raise SchemaError(
            f"missing prediction column '{schema.prediction}' and score column '{schema.score}'"
        )
    prob_columns = schema.resolve_prob_columns(header)
    if not prob_columns:
        raise SchemaError(f"no probability columns (prefix '{schema.prob_prefix}')")
    missing = [column for column in prob_columns.values() if column not in header]
    if missing:
        raise SchemaError(f"missing probability columns: {', '.join(missing)}")
    true_group = schema.true_group if schema.true_group in header else None

    used = [schema.outcome] + [c for c in (prediction, score, true_group) if c] + list(prob_columns.values())
    nulls = frame[used].isna()
    if nulls.to_numpy().any():
        row = int(np.flatnonzero(nulls.any(axis=1).to_numpy())[0])
        column = nulls.columns[nulls.iloc[row].to_numpy()][0]
        raise DataValidationError(f"missing value in column '{column}'", row=row)

    def numeric(column: str) -> np.ndarray:
        values = pd.to_numeric(frame[column], errors='coerce')
        bad = np.flatnonzero(values.isna().to_numpy())
        if bad.size:
            raise DataValidationError(
                f"non-numeric value in column '{column}': {frame[column].iloc[bad[0]]!r}",
                row=int(bad[0]),
            )
        return values.to_numpy(dtype=float)

    dataset = AuditDataset(
        y=numeric(schema.outcome),
        y_hat=numeric(prediction) if prediction else None,
        score=numeric(score) if score else None,
        group_probs={group: numeric(column) for group, column in prob_columns.items()},
        true_group=frame[true_group].to_numpy() if true_group else None,
        threshold=None if prediction else (DEFAULT_THRESHOLD if threshold is None else threshold),
        exhaustive=schema.exhaustive,
    )
    logger.info("Loaded %d records with groups %s from %s", dataset.n, ', '.join(dataset.group_ids), path)
    return dataset


def write_csv(dataset: AuditDataset, path, prob_prefix: str = DEFAULT_PROB_PREFIX) -> Path:
    """Serialize a dataset in the canonical layout"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dataset.to_frame(prob_prefix).to_csv(path, index=False, encoding='utf-8')
    return path


def confusion_counts(y: np.ndarray, y_hat: np.ndarray, mask: np.ndarray) -> Dict[str, int]:
    """TN/FP/FN/TP counts among masked records"""
    y = y[mask]
    y_hat = y_hat[mask]
    return {
        'tn': int(np.sum((y == 0) & (y_hat == 0))),
        'fp': int(np.sum((y == 0) & (y_hat == 1))),
        'fn': int(np.sum((y == 1) & (y_hat == 0))),
        'tp': int(np.sum((y == 1) & (y_hat == 1))),
    }


def summarize(dataset: AuditDataset) -> DatasetSummary:
    """Record count, mean probability per group and, with labels, per-group counts"""
    if not dataset.group_ids:
        raise SchemaError("dataset has no group probability columns")

    mean_probability = {g: float(np.mean(dataset.probabilities(g))) for g in dataset.group_ids}
    summary = DatasetSummary(n=dataset.n, group_ids=dataset.group_ids, mean_probability=mean_probability)
    if dataset.has_labels:
        summary.n_a = dataset.n_a()
        summary.confusion = {
            g: confusion_counts(dataset.y, dataset.y_hat, dataset.true_group == g)
            for g in dataset.group_ids
        }
    return summary
