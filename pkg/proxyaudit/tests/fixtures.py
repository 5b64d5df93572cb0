"""
Shared test data
"""

import numpy as np

from ..utils.data_model import AuditDataset, AuditRecord

# (y, y_hat, pi, true group)
D4_ROWS = (
    (1, 0, 0.8, '1'),
    (1, 1, 0.6, '1'),
    (1, 0, 0.2, '0'),
    (0, 1, 0.5, '1'),
)

D4_CSV = (
    "y,y_hat,prob_1,true_group\n"
    "1,0,0.8,1\n"
    "1,1,0.6,1\n"
    "1,0,0.2,0\n"
    "0,1,0.5,1\n"
)


def d4_records():
    return [AuditRecord(y=y, y_hat=y_hat, group_probs={'1': pi}, true_group=group) for y, y_hat, pi, group in D4_ROWS]


def d4_dataset(labels: bool = True) -> AuditDataset:
    y, y_hat, pi, groups = zip(*D4_ROWS)
    return AuditDataset(y=y, y_hat=y_hat, group_probs={'1': pi}, true_group=groups if labels else None)


def fuzzed_dataset(rng: np.random.Generator, n_min: int = 10, n_max: int = 500) -> AuditDataset:
    """Random labelled dataset with two exhaustive groups"""
    n = int(rng.integers(n_min, n_max + 1))
    pi = rng.random(n)
    a = (rng.random(n) < rng.random(n)).astype(int)
    return AuditDataset(
        y=rng.integers(0, 2, size=n),
        y_hat=rng.integers(0, 2, size=n),
        score=rng.random(n),
        group_probs={'1': pi, '0': 1.0 - pi},
        true_group=a.astype(str),
        exhaustive=True,
    )


def fuzzed_datasets(count: int, seed: int = 12345):
    rng = np.random.default_rng(seed)
    return [fuzzed_dataset(rng) for _ in range(count)]
