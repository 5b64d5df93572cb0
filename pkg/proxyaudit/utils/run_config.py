"""
Run configuration
Resolves every run option from command-line flags, an optional INI config
file and the PROXYAUDIT settings, in that order of precedence.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from decouple import Config, RepositoryEmpty, RepositoryIni, UndefinedValueError
from django.conf import settings

from .exceptions import DataValidationError

STEP_TOLERANCE = 1e-9


def parse_value_list(text, cast: Callable = float) -> List:
    """
    Values from 'start:stop:step' (stop included when reached) or 'a,b,c'.
    """
    if isinstance(text, (list, tuple)):
        return [cast(value) for value in text]
    text = str(text).strip()
    if not text:
        raise DataValidationError("empty value list")
    try:
        if ':' in text:
            parts = text.split(':')
            if len(parts) != 3:
                raise DataValidationError(f"range '{text}' must look like start:stop:step")
            start, stop, step = (float(part) for part in parts)
            if step <= 0.0:
                raise DataValidationError(f"range step must be positive, got {step!r}")
            if stop < start:
                raise DataValidationError(f"range stop {stop!r} is below start {start!r}")
            count = int(math.floor((stop - start) / step + STEP_TOLERANCE)) + 1
            return [cast(round(start + k * step, 12)) for k in range(count)]
        return [cast(part.strip()) for part in text.split(',') if part.strip()]
    except ValueError as exc:
        raise DataValidationError(f"cannot parse value list '{text}': {exc}")


def parse_interval(text) -> Tuple[float, float]:
    """'low,high' or a single value v meaning [-v, v]"""
    values = parse_value_list(text)
    if len(values) == 1:
        return -abs(values[0]), abs(values[0])
    if len(values) != 2:
        raise DataValidationError(f"interval '{text}' needs one or two values")
    if values[0] > values[1]:
        raise DataValidationError(f"interval '{text}' is empty")
    return values[0], values[1]


def parse_mapping(items: Optional[Sequence[str]], cast: Callable = float) -> Dict[str, Any]:
    """['key=value', ...] -> {key: cast(value)}"""
    mapping = {}
    for item in items or ():
        key, sep, value = str(item).partition('=')
        if not sep or not key.strip():
            raise DataValidationError(f"expected KEY=VALUE, got '{item}'")
        try:
            mapping[key.strip()] = cast(value.strip())
        except ValueError as exc:
            raise DataValidationError(f"bad value for '{key.strip()}': {exc}")
    return mapping


def config_file(path) -> Config:
    """decouple Config over the [settings] section of an INI file"""
    if not path:
        return Config(RepositoryEmpty())
    path = Path(path)
    if not path.is_file():
        raise DataValidationError(f"config file not found: {path}")
    return Config(RepositoryIni(str(path)))


def csv_list(value: str) -> List[str]:
    return [part.strip() for part in str(value).split(',') if part.strip()]


@dataclass
class RunConfig:
    """Resolved options of one command invocation"""

    command: str
    config_path: Optional[str] = None
    values: Dict[str, Any] = field(default_factory=dict)
    _file: Config = field(default=None, repr=False)

    def __post_init__(self):
        self._file = config_file(self.config_path)

    def resolve(self, name: str, flag_value=None, default=None, cast: Callable = str, setting: str = None,
                record: bool = True):
        """
        Flag value, else the config file key NAME (upper case), else the
        PROXYAUDIT setting, else default. Recorded values are embedded in
        every output so the run can be replayed; options that cannot change
        results (output location, worker count) pass record=False.
        """
        if flag_value is not None:
            value = flag_value
        else:
            try:
                value = self._file(name.upper(), cast=cast)
            except UndefinedValueError:
                value = settings.PROXYAUDIT.get(setting, default) if setting else default
            except ValueError as exc:
                raise DataValidationError(f"bad value for {name.upper()} in {self.config_path}: {exc}")
        if record:
            self.values[name] = value
        return value

    @property
    def seed(self) -> Optional[int]:
        return self.values.get('seed')

    def as_dict(self) -> Dict[str, Any]:
        values = {key: value for key, value in self.values.items() if key != 'seed'}
        return {'command': self.command, **values}
