"""
Report storage for proxyaudit runs
Writes JSON and CSV reports into the configured output directory, each one
carrying the resolved run configuration and seed so it can be replayed.
"""

import json
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Dict, Optional

import numpy as np
import pandas as pd
from django.conf import settings

from .exceptions import ProxyAuditError

logger = logging.getLogger(__name__)

CSV_HEADER_PREFIX = '# '


def _plain(value):
    """JSON-safe copy: numpy scalars to Python, NaN to null, tuples to lists"""
    if isinstance(value, dict):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return [_plain(item) for item in value.tolist()]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def render_json(config: Dict, seed: Optional[int], results) -> str:
    document = {'config': _plain(config), 'seed': seed, 'results': _plain(results)}
    return json.dumps(document, sort_keys=True, indent=2, allow_nan=False) + '\n'


class ReportStore:
    """Handles report files in one output directory"""

    def __init__(self, output_dir=None):
        self.output_dir = Path(output_dir or settings.PROXYAUDIT['OUTPUT_DIR'])

    def _path(self, name: str) -> Path:
        return self.output_dir / name

    def write_json(self, name: str, config: Dict, seed: Optional[int], results) -> Path:
        """Write {"config", "seed", "results"} with sorted keys"""
        return self._write(name, render_json(config, seed, results))

    def write_csv(self, name: str, frame: pd.DataFrame, config: Dict, seed: Optional[int]) -> Path:
        """Write a table preceded by '# ' lines carrying the config JSON"""
        header = json.dumps({'config': _plain(config), 'seed': seed}, sort_keys=True, indent=2, allow_nan=False)
        lines = [f"{CSV_HEADER_PREFIX}{line}" for line in header.splitlines()]
        body = frame.to_csv(index=False, lineterminator='\n', float_format='%.17g')
        return self._write(name, '\n'.join(lines) + '\n' + body)

    def _write(self, name: str, content: str) -> Path:
        path = self._path(name)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(content, encoding='utf-8')
        except OSError as e:
            logger.error("Report write error for %s: %s", path, e)
            raise ProxyAuditError(f"cannot write report {path}: {e}")
        logger.info("Wrote report %s", path)
        return path

    def read_csv(self, name: str) -> pd.DataFrame:
        return pd.read_csv(self._path(name), comment=CSV_HEADER_PREFIX[0], encoding='utf-8')

