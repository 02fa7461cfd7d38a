import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

from wrsn_sched.config import SchedConfig
from wrsn_sched.errors import InstanceParseError


class WrsnFormater(ABC):
    @property
    @abstractmethod
    def ext(self):
        ...

    @property
    @abstractmethod
    def name(self):
        ...

    def __init__(self, config: Optional[SchedConfig] = None):
        self._config = config or SchedConfig()
        self.log = logging.getLogger(self.__class__.__name__)

    def __repr__(self):
        return f"'{self.name}' ({self.ext})"

    def with_ext(self, filename: Path) -> Path:
        filename = Path(filename)
        return filename if filename.suffix == self.ext else filename.with_suffix(self.ext)

    @abstractmethod
    def read(self, filename: Path) -> Any:
        ...

    @abstractmethod
    def write(self, filename: Path, data: Any) -> Path:
        ...


def number(value: float) -> str:
    """Shortest text that reads back to the same float."""
    return repr(float(value))


def parse_fields(tokens: Iterable[str], line: int) -> Dict[str, str]:
    """`key=value` tokens of one line, in any order."""
    fields = {}
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep or not key:
            raise InstanceParseError(f"expected key=value, got {token!r}", line=line)
        if key in fields:
            raise InstanceParseError("repeated key", line=line, field=key)
        fields[key] = value
    return fields
