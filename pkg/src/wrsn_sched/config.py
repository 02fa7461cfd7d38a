import logging
import os
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Tuple, Union

import attr

from wrsn_sched.errors import ConfigError
from wrsn_sched.instances import GenParams, Variant

log = logging.getLogger(__name__)

THREADS_ENV = "WRSN_SCHED_THREADS"


def _optional(cast: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(value: str) -> Any:
        return None if value.strip().lower() in ("", "none") else cast(value)

    return parse


def _names(value: Union[str, Tuple[str, ...]]) -> Tuple[str, ...]:
    if isinstance(value, str):
        return tuple(token.strip() for token in value.split(",") if token.strip())
    return tuple(value)


def _numbers(value: Union[str, Tuple[float, ...]]) -> Tuple[float, ...]:
    if isinstance(value, str):
        return tuple(float(token) for token in value.split(",") if token.strip())
    return tuple(float(v) for v in value)


def _flag(value: Union[str, bool]) -> bool:
    if isinstance(value, bool):
        return value
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


@attr.s
class SchedConfig:
    # instance generation
    variant = attr.ib(default="p2", type=str, metadata={"parse": str})
    n = attr.ib(default=30, type=int, metadata={"parse": int})
    seed = attr.ib(default=0, type=int, metadata={"parse": int})
    k = attr.ib(default=None, type=Optional[int], metadata={"parse": _optional(int)})
    alpha = attr.ib(default=None, type=Optional[float], metadata={"parse": _optional(float)})
    ie = attr.ib(default=None, type=Optional[float], metadata={"parse": _optional(float)})
    timespan = attr.ib(default=None, type=Optional[float], metadata={"parse": _optional(float)})
    side = attr.ib(default=None, type=Optional[float], metadata={"parse": _optional(float)})
    radius = attr.ib(default=None, type=Optional[float], metadata={"parse": _optional(float)})
    coverage_cell = attr.ib(default=1.0, type=float, metadata={"parse": float})
    # scheduling
    dt = attr.ib(default=1.0, type=float, metadata={"parse": float})
    solvers = attr.ib(default=("greedy", "random"), type=Tuple[str, ...], converter=_names, metadata={"parse": _names})
    require_feasible = attr.ib(default=False, type=bool, metadata={"parse": _flag})
    # learning
    episodes = attr.ib(default=100, type=int, metadata={"parse": int})
    train_instances = attr.ib(default=10, type=int, metadata={"parse": int})
    p = attr.ib(default=64, type=int, metadata={"parse": int})
    rounds = attr.ib(default=4, type=int, metadata={"parse": int})
    learning_rate = attr.ib(default=1e-3, type=float, metadata={"parse": float})
    gamma = attr.ib(default=None, type=Optional[float], metadata={"parse": _optional(float)})
    n_step = attr.ib(default=1, type=int, metadata={"parse": int})
    batch_size = attr.ib(default=32, type=int, metadata={"parse": int})
    capacity = attr.ib(default=10000, type=int, metadata={"parse": int})
    warmup = attr.ib(default=500, type=int, metadata={"parse": int})
    p2_reward = attr.ib(default="energy", type=str, metadata={"parse": str})
    log_every = attr.ib(default=10, type=int, metadata={"parse": int})
    eval_every = attr.ib(default=0, type=int, metadata={"parse": int})
    checkpoint = attr.ib(default=None, type=Optional[str], metadata={"parse": _optional(str)})
    # baselines
    restarts = attr.ib(default=100, type=int, metadata={"parse": int})
    acs_agents = attr.ib(default=20, type=int, metadata={"parse": int})
    acs_iterations = attr.ib(default=200, type=int, metadata={"parse": int})
    acs_a = attr.ib(default=1.0, type=float, metadata={"parse": float})
    acs_b = attr.ib(default=2.0, type=float, metadata={"parse": float})
    acs_q0 = attr.ib(default=0.9, type=float, metadata={"parse": float})
    acs_theta_global = attr.ib(default=0.1, type=float, metadata={"parse": float})
    acs_theta_local = attr.ib(default=0.1, type=float, metadata={"parse": float})
    dp_max_entries = attr.ib(default=2_000_000, type=int, metadata={"parse": int})
    brute_max_n = attr.ib(default=10, type=int, metadata={"parse": int})
    # sweeps
    axis = attr.ib(default="n", type=str, metadata={"parse": str})
    values = attr.ib(default=(), type=Tuple[float, ...], converter=_numbers, metadata={"parse": _numbers})
    repetitions = attr.ib(default=3, type=int, metadata={"parse": int})
    out = attr.ib(default="results", type=str, metadata={"parse": str})
    threads = attr.ib(default=1, type=int, metadata={"parse": int})

    @property
    def variant_enum(self) -> Variant:
        try:
            return Variant(self.variant)
        except ValueError:
            raise ConfigError(f"unknown variant {self.variant!r}, expected one of {[v.value for v in Variant]}")

    def gen_params(self, **overrides: Any) -> GenParams:
        values = dict(
            energy_capacity=self.ie,
            timespan=self.timespan,
            alpha=self.alpha,
            coverage_k=self.k,
            side=self.side,
            sensing_radius=self.radius,
            coverage_cell=self.coverage_cell,
        )
        values.update(overrides)
        return GenParams.for_variant(self.variant_enum, **values)

    def validate(self) -> None:
        self.variant_enum
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.threads < 1:
            raise ConfigError(f"{THREADS_ENV} / threads must be >= 1")
        if self.p2_reward not in ("energy", "prize"):
            raise ConfigError(f"p2_reward must be energy or prize, got {self.p2_reward!r}")


def _fields() -> Dict[str, "attr.Attribute"]:
    return {field.name: field for field in attr.fields(SchedConfig)}


def _parse_value(key: str, raw: str, where: str) -> Any:
    fields = _fields()
    if key not in fields:
        raise ConfigError(f"{where}: unknown key {key!r}")
    try:
        return fields[key].metadata["parse"](raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: invalid value {raw!r} for {key}: {e}")


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Parse `key = value` lines, `#` starts a comment."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"can not read config file {path}: {e}")
    values: Dict[str, Any] = {}
    for number, line in enumerate(lines, start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"{path}:{number}: expected 'key = value'")
        key, raw = (part.strip() for part in content.split("=", 1))
        values[key.replace("-", "_")] = _parse_value(key.replace("-", "_"), raw, f"{path}:{number}")
    return values


def load_config(
    path: Optional[Union[str, Path]] = None,
    environ: Optional[Mapping[str, str]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> SchedConfig:
    """Defaults, then the config file, then the environment, then explicit overrides."""
    values: Dict[str, Any] = {}
    if path is not None:
        values.update(read_config_file(path))
    environ = os.environ if environ is None else environ
    if environ.get(THREADS_ENV):
        values["threads"] = _parse_value("threads", environ[THREADS_ENV], THREADS_ENV)
    values.update({key: value for key, value in (overrides or {}).items() if value is not None})
    config = SchedConfig(**values)
    config.validate()
    log.debug(f"configuration: {config}")
    return config
