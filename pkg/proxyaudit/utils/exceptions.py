"""
Exception hierarchy for proxyaudit.
Every error carries the process exit code the management commands report.
"""


class ProxyAuditError(Exception):
    """Base class for all proxyaudit errors"""

    exit_code = 1


class DataValidationError(ProxyAuditError):
    """Input data violates a record or dataset invariant"""

    exit_code = 2

    def __init__(self, message: str, row: int = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class SchemaError(DataValidationError):
    """A column named by the schema is missing or the schema is incomplete"""


class UndefinedMetricError(ProxyAuditError):
    """A metric or conditional mean has an empty denominator cell"""

    exit_code = 3

    def __init__(self, message: str, metric: str = None, group: str = None, cell: str = None):
        self.metric = metric
        self.group = group
        self.cell = cell
        parts = [message]
        if metric is not None:
            parts.append(f"metric={metric}")
        if group is not None:
            parts.append(f"group={group}")
        if cell is not None:
            parts.append(f"cell={cell}")
        super().__init__(' '.join(parts))


class UnknownMetricError(UndefinedMetricError):
    """Metric name is not one of the supported kinds"""


class InfeasibleRangeError(ProxyAuditError):
    """Requested sensitivity range does not intersect the feasible epsilon bounds"""

    exit_code = 4


class ModelFitError(ProxyAuditError):
    """Predictor fitting failed (separation or no convergence)"""


class SimulationConfigError(ProxyAuditError):
    """Simulation parameters are invalid"""

    exit_code = 2


class UtilityInputError(ProxyAuditError):
    """Expected-utility inputs are missing or invalid"""

    exit_code = 2
