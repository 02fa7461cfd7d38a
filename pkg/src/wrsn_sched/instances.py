import logging
import math
from enum import Enum
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple

import attr
import numpy as np

from wrsn_sched import geometry
from wrsn_sched.errors import InfeasibleDeploymentError, InstanceError, InstanceValidationError

log = logging.getLogger(__name__)

Point = Tuple[float, float]

# Vertex id of the service station; sensor ids start at 1.
START_VERTEX = 0

_SPEED_TOLERANCE = 1e-9


class Variant(Enum):
    P1_MOBILE_PATH = "p1"
    P2_FULLY_CHARGING = "p2"
    P3_KCOVERAGE = "p3"


def _to_point(value: Iterable[float]) -> Point:
    x, y = value
    return float(x), float(y)


def _optional_float(value: Optional[Any]) -> Optional[float]:
    return None if value is None else float(value)


def _optional_int(value: Optional[Any]) -> Optional[int]:
    return None if value is None else int(value)


def _to_waypoints(values: Iterable[Tuple[float, Iterable[float]]]) -> Tuple[Tuple[float, Point], ...]:
    return tuple((float(t), _to_point(p)) for t, p in values)


@attr.s(frozen=True)
class MobilityTrace:
    """Piecewise-linear trajectory of a mobile sensor, known to the charger in advance."""

    waypoints = attr.ib(type=Tuple[Tuple[float, Point], ...], converter=_to_waypoints)
    max_speed = attr.ib(type=float, converter=float)

    def __attrs_post_init__(self) -> None:
        if not self.waypoints:
            raise InstanceValidationError("mobility trace needs at least one waypoint")
        if self.max_speed < 0:
            raise InstanceValidationError(f"negative max speed {self.max_speed}")
        for (t_a, p_a), (t_b, p_b) in zip(self.waypoints, self.waypoints[1:]):
            if t_b <= t_a:
                raise InstanceValidationError(f"waypoint times not strictly increasing at t={t_b}")
            speed = math.hypot(p_b[0] - p_a[0], p_b[1] - p_a[1]) / (t_b - t_a)
            if speed > self.max_speed * (1 + _SPEED_TOLERANCE) + _SPEED_TOLERANCE:
                raise InstanceValidationError(
                    f"segment [{t_a}, {t_b}] moves at {speed:.6f} m/s above max speed {self.max_speed}"
                )

    @property
    def start(self) -> float:
        return self.waypoints[0][0]

    @property
    def end(self) -> float:
        return self.waypoints[-1][0]

    def covers(self, t: float) -> bool:
        return self.start - 1e-9 <= t <= self.end + 1e-9

    def position_at(self, t: float) -> Point:
        if not self.covers(t):
            raise InstanceError(f"time {t} outside trace horizon [{self.start}, {self.end}]")
        x, y = self.positions_at(np.array([t]))[0]
        return float(x), float(y)

    def positions_at(self, times: np.ndarray) -> np.ndarray:
        """Vectorized interpolation, times are clamped to the horizon."""
        ts = np.array([w[0] for w in self.waypoints])
        xs = np.array([w[1][0] for w in self.waypoints])
        ys = np.array([w[1][1] for w in self.waypoints])
        return np.column_stack((np.interp(times, ts, xs), np.interp(times, ts, ys)))


@attr.s(frozen=True)
class SensorNode:
    id = attr.ib(type=int, converter=int)
    position = attr.ib(type=Point, converter=_to_point)
    battery_capacity = attr.ib(type=float, converter=float)
    residual = attr.ib(type=float, converter=float)
    consumption_rate = attr.ib(default=0.0, type=float, converter=float)
    sensing_radius = attr.ib(default=None, type=Optional[float], converter=_optional_float)
    deadline = attr.ib(default=None, type=Optional[float], converter=_optional_float)
    prize = attr.ib(default=None, type=Optional[int], converter=_optional_int)
    trajectory = attr.ib(default=None, type=Optional[MobilityTrace])

    def __attrs_post_init__(self) -> None:
        if self.id <= START_VERTEX:
            raise InstanceValidationError(f"node id {self.id} must be >= 1, 0 is the service station")
        if self.battery_capacity <= 0:
            raise InstanceValidationError(f"node {self.id}: battery capacity must be positive")
        if not 0 <= self.residual <= self.battery_capacity:
            raise InstanceValidationError(
                f"node {self.id}: residual {self.residual} J outside [0, {self.battery_capacity}] J"
            )
        if self.consumption_rate < 0:
            raise InstanceValidationError(f"node {self.id}: negative consumption rate")
        if self.deadline is not None:
            if self.consumption_rate <= 0:
                raise InstanceValidationError(f"node {self.id}: deadline requires a positive consumption rate")
            if not math.isclose(self.deadline, self.residual / self.consumption_rate, rel_tol=1e-9):
                raise InstanceValidationError(
                    f"node {self.id}: deadline {self.deadline} s differs from residual/beta "
                    f"{self.residual / self.consumption_rate} s"
                )
        if self.prize is not None and self.prize < 1:
            raise InstanceValidationError(f"node {self.id}: prize must be a positive integer")
        if self.sensing_radius is not None and self.sensing_radius <= 0:
            raise InstanceValidationError(f"node {self.id}: sensing radius must be positive")

    @property
    def is_mobile(self) -> bool:
        return self.trajectory is not None

    def residual_at(self, t: float, t0: float) -> float:
        """Residual energy extrapolated with the average consumption rate."""
        return max(0.0, self.residual - self.consumption_rate * (t - t0))


@attr.s(frozen=True)
class Charger:
    depot = attr.ib(type=Point, converter=_to_point)
    end_point = attr.ib(type=Point, converter=_to_point)
    speed = attr.ib(type=float, converter=float)
    transfer_rate = attr.ib(type=float, converter=float)
    travel_energy = attr.ib(type=float, converter=float)
    energy_capacity = attr.ib(default=None, type=Optional[float], converter=_optional_float)
    timespan = attr.ib(default=None, type=Optional[float], converter=_optional_float)

    def __attrs_post_init__(self) -> None:
        if self.speed <= 0:
            raise InstanceValidationError("charger speed must be positive")
        if self.transfer_rate <= 0:
            raise InstanceValidationError("charger transfer rate must be positive")
        if self.travel_energy < 0:
            raise InstanceValidationError("charger travel energy must be non negative")
        if self.energy_capacity is not None and self.energy_capacity <= 0:
            raise InstanceValidationError("charger energy capacity must be positive")
        if self.timespan is not None and self.timespan <= 0:
            raise InstanceValidationError("charger timespan must be positive")


@attr.s(frozen=True)
class Area:
    x_min = attr.ib(type=float, converter=float)
    y_min = attr.ib(type=float, converter=float)
    x_max = attr.ib(type=float, converter=float)
    y_max = attr.ib(type=float, converter=float)

    def __attrs_post_init__(self) -> None:
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise InstanceValidationError(f"degenerate area {self}")

    @classmethod
    def square(cls, side: float) -> "Area":
        return cls(0.0, 0.0, side, side)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def center(self) -> Point:
        return (self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2

    @property
    def corners(self) -> Tuple[Point, Point, Point, Point]:
        return (
            (self.x_min, self.y_min),
            (self.x_max, self.y_min),
            (self.x_max, self.y_max),
            (self.x_min, self.y_max),
        )

    def contains(self, q: Point) -> bool:
        return self.x_min <= q[0] <= self.x_max and self.y_min <= q[1] <= self.y_max

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.column_stack(
            (rng.uniform(self.x_min, self.x_max, size), rng.uniform(self.y_min, self.y_max, size))
        )


@attr.s(frozen=True, cache_hash=True)
class ProblemInstance:
    variant = attr.ib(type=Variant, converter=Variant)
    nodes = attr.ib(type=Tuple[SensorNode, ...], converter=tuple)
    charger = attr.ib(type=Charger)
    area = attr.ib(type=Area)
    alpha = attr.ib(default=0.2, type=float, converter=float)
    epsilon_charge = attr.ib(default=0.0, type=float, converter=float)
    coverage_k = attr.ib(default=None, type=Optional[int], converter=_optional_int)
    t0 = attr.ib(default=0.0, type=float, converter=float)
    rng_seed = attr.ib(default=0, type=int, converter=int)
    _cache = attr.ib(init=False, factory=dict, eq=False, repr=False, hash=False)

    def __attrs_post_init__(self) -> None:
        if not self.nodes:
            raise InstanceValidationError("empty instance rejected")
        ids = [node.id for node in self.nodes]
        if len(set(ids)) != len(ids):
            raise InstanceValidationError("duplicate node ids")
        if len({node.battery_capacity for node in self.nodes}) != 1:
            raise InstanceValidationError("all nodes must share the battery capacity B")
        if not 0 < self.alpha <= 1:
            raise InstanceValidationError(f"alpha {self.alpha} outside (0, 1]")
        if not 0 <= self.epsilon_charge < 1:
            raise InstanceValidationError(f"epsilon {self.epsilon_charge} outside [0, 1)")
        validate = {
            Variant.P1_MOBILE_PATH: self._validate_mobile_path,
            Variant.P2_FULLY_CHARGING: self._validate_fully_charging,
            Variant.P3_KCOVERAGE: self._validate_kcoverage,
        }
        validate[self.variant]()

    def _validate_mobile_path(self) -> None:
        if self.charger.timespan is None:
            raise InstanceValidationError("P1 requires the charger timespan C")
        horizon = self.t0 + self.charger.timespan
        for node in self.nodes:
            if node.trajectory is None:
                raise InstanceValidationError(f"P1 node {node.id} has no trajectory")
            if not (node.trajectory.covers(self.t0) and node.trajectory.covers(horizon)):
                raise InstanceValidationError(f"P1 node {node.id} trajectory does not cover [t0, t0 + C]")
            if node.trajectory.max_speed >= self.charger.speed:
                raise InstanceValidationError(
                    f"charger speed {self.charger.speed} must exceed node {node.id} max speed "
                    f"{node.trajectory.max_speed}"
                )

    def _validate_fully_charging(self) -> None:
        if self.charger.energy_capacity is None:
            raise InstanceValidationError("P2 requires the charger energy capacity IE")
        top = self.n * self.n
        for node in self.requesters():
            if node.prize is None:
                raise InstanceValidationError(f"P2 requester {node.id} has no prize")
            if node.prize > top:
                raise InstanceValidationError(f"P2 node {node.id} prize {node.prize} above n^2={top}")

    def _validate_kcoverage(self) -> None:
        if self.coverage_k is None or self.coverage_k < 1:
            raise InstanceValidationError("P3 requires a coverage requirement k >= 1")
        for node in self.nodes:
            if node.sensing_radius is None:
                raise InstanceValidationError(f"P3 node {node.id} has no sensing radius")
        for node in self.requesters():
            if node.deadline is None:
                raise InstanceValidationError(f"P3 requester {node.id} has no deadline")
        centers = np.array([node.position for node in self.nodes], dtype=float)
        radii = np.array([node.sensing_radius for node in self.nodes], dtype=float)
        covered = geometry.deployment_min_coverage(centers, radii, self.area)
        if covered < self.coverage_k:
            raise InstanceValidationError(
                f"P3 deployment covers some point of the area only {covered} times, k={self.coverage_k}"
            )

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def battery_capacity(self) -> float:
        return self.nodes[0].battery_capacity

    @property
    def horizon_end(self) -> float:
        return self.t0 + (self.charger.timespan or math.inf)

    @property
    def charge_target(self) -> float:
        """Battery level a charged node is brought to."""
        if self.variant is Variant.P1_MOBILE_PATH:
            return (1 - self.epsilon_charge) * self.alpha * self.battery_capacity
        return self.battery_capacity

    def node(self, node_id: int) -> SensorNode:
        if "by_id" not in self._cache:
            self._cache["by_id"] = {node.id: node for node in self.nodes}
        try:
            return self._cache["by_id"][node_id]
        except KeyError:
            raise InstanceError(f"unknown node id {node_id}")

    def is_requester(self, node: SensorNode) -> bool:
        """P1 nodes request below the charge target. P2/P3 nodes request at or below alpha * B,
        so a node sitting exactly on the threshold is a requester."""
        if self.variant is Variant.P1_MOBILE_PATH:
            return node.residual < self.charge_target
        return node.residual / node.battery_capacity <= self.alpha

    def requesters(self) -> Tuple[SensorNode, ...]:
        if "requesters" not in self._cache:
            self._cache["requesters"] = tuple(
                sorted((node for node in self.nodes if self.is_requester(node)), key=lambda node: node.id)
            )
        return self._cache["requesters"]

    def requester_ids(self) -> Tuple[int, ...]:
        return tuple(node.id for node in self.requesters())


def prize_of(node: SensorNode, n: int) -> int:
    """Integer prize in [1, n^2] growing with the energy needed to fill the battery."""
    top = n * n
    raw = math.ceil(top * (node.battery_capacity - node.residual) / node.battery_capacity)
    return min(max(raw, 1), top)


def position_at(node: SensorNode, t: float) -> Point:
    if node.trajectory is None:
        return node.position
    return node.trajectory.position_at(t)


@attr.s
class GenParams:
    """Instance generation settings, per-variant defaults come from `for_variant`.

    `beta_range` is the P3 consumption rate range in watts. Measured sensor rates of
    1 to 10 mW give deadlines of days for a 10.8 kJ battery, so the default range is
    scaled up to 0.5 to 2 W. With residuals in (540, 10800] J the deadlines then fall
    between 4.5 minutes and 6 hours, the length of a charging tour.
    """

    side = attr.ib(default=1000.0, type=float)
    battery_capacity = attr.ib(default=10800.0, type=float)
    charger_speed = attr.ib(default=5.0, type=float)
    transfer_rate = attr.ib(default=40.0, type=float)
    travel_energy = attr.ib(default=600.0, type=float)
    energy_capacity = attr.ib(default=None, type=Optional[float])
    timespan = attr.ib(default=None, type=Optional[float])
    alpha = attr.ib(default=0.2, type=float)
    epsilon_charge = attr.ib(default=0.0, type=float)
    coverage_k = attr.ib(default=None, type=Optional[int])
    sensing_radius = attr.ib(default=None, type=Optional[float])
    max_sensor_speed = attr.ib(default=2.0, type=float)
    min_leg_speed = attr.ib(default=0.05, type=float)
    residual_range = attr.ib(default=None, type=Optional[Tuple[float, float]])
    beta_range = attr.ib(default=(0.5, 2.0), type=Tuple[float, float])
    end_point = attr.ib(default=None, type=Optional[Point])
    max_retries = attr.ib(default=2000, type=int)
    coverage_cell = attr.ib(default=1.0, type=float)
    t0 = attr.ib(default=0.0, type=float)

    @classmethod
    def for_variant(cls, variant: Variant, **overrides: Any) -> "GenParams":
        defaults: Dict[Variant, Dict[str, Any]] = {
            Variant.P1_MOBILE_PATH: dict(
                side=100.0,
                transfer_rate=40.0,
                travel_energy=0.0,
                timespan=1800.0,
                alpha=0.9,
                epsilon_charge=0.1,
                end_point=(100.0, 100.0),
            ),
            Variant.P2_FULLY_CHARGING: dict(
                side=1000.0,
                travel_energy=600.0,
                energy_capacity=300e3,
                alpha=0.2,
            ),
            Variant.P3_KCOVERAGE: dict(
                side=500.0,
                transfer_rate=20.0,
                travel_energy=600.0,
                coverage_k=2,
                sensing_radius=135.0,
                alpha=0.45,
                residual_range=(540.0, 10800.0),
            ),
        }
        values = dict(defaults[Variant(variant)])
        if "side" in overrides and "end_point" not in overrides and Variant(variant) is Variant.P1_MOBILE_PATH:
            values["end_point"] = (overrides["side"], overrides["side"])
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    def validate(self, variant: Variant) -> None:
        if self.side <= 0 or self.battery_capacity <= 0 or self.charger_speed <= 0 or self.transfer_rate <= 0:
            raise InstanceValidationError("side, battery capacity, charger speed and transfer rate must be positive")
        if not 0 < self.alpha <= 1:
            raise InstanceValidationError(f"alpha {self.alpha} outside (0, 1]")
        if variant is Variant.P1_MOBILE_PATH:
            if not self.timespan or self.timespan <= 0:
                raise InstanceValidationError("P1 generation needs a positive timespan")
            if not 0 < self.min_leg_speed <= self.max_sensor_speed < self.charger_speed:
                raise InstanceValidationError("P1 leg speeds must satisfy 0 < min <= max < charger speed")
        if variant is Variant.P2_FULLY_CHARGING and not self.energy_capacity:
            raise InstanceValidationError("P2 generation needs the charger energy capacity")
        if variant is Variant.P3_KCOVERAGE:
            if not self.coverage_k or self.coverage_k < 1 or not self.sensing_radius:
                raise InstanceValidationError("P3 generation needs k >= 1 and a sensing radius")
            low, high = self.residual_range or (0.0, self.battery_capacity)
            if not 0 <= low < high <= self.battery_capacity:
                raise InstanceValidationError(f"P3 residual range {self.residual_range} invalid")
            if not 0 < self.beta_range[0] <= self.beta_range[1]:
                raise InstanceValidationError(f"P3 consumption range {self.beta_range} invalid")


def random_waypoint_trace(
    start: Point,
    area: Area,
    t0: float,
    horizon: float,
    speed_range: Tuple[float, float],
    rng: np.random.Generator,
) -> MobilityTrace:
    """Random waypoint walk pre-sampled over [t0, t0 + horizon]."""
    end = t0 + horizon
    t, (x, y) = t0, start
    waypoints = [(t0, (x, y))]
    while t < end:
        tx, ty = area.sample(rng, 1)[0]
        speed = rng.uniform(*speed_range)
        duration = math.hypot(tx - x, ty - y) / speed
        if duration <= 0:
            continue
        if t + duration >= end:
            frac = (end - t) / duration
            waypoints.append((end, (x + frac * (tx - x), y + frac * (ty - y))))
            break
        t, x, y = t + duration, tx, ty
        waypoints.append((t, (x, y)))
    return MobilityTrace(waypoints, speed_range[1])


def _residuals(variant: Variant, params: GenParams, n: int, rng: np.random.Generator) -> np.ndarray:
    capacity = params.battery_capacity
    if variant is Variant.P1_MOBILE_PATH:
        return rng.uniform(0.0, capacity, n)
    low, high = params.residual_range or (0.0, capacity)
    # 1 - U lies in (0, 1], so samples fall in (low, high]
    return low + (high - low) * (1.0 - rng.uniform(0.0, 1.0, n))


def _kcovered_positions(params: GenParams, area: Area, n: int, rng: np.random.Generator) -> np.ndarray:
    radius = float(params.sensing_radius or 0.0)
    k = int(params.coverage_k or 1)
    for attempt in range(1, params.max_retries + 1):
        positions = area.sample(rng, n)
        if geometry.deployment_min_coverage(positions, np.full(n, radius), area, params.coverage_cell) >= k:
            log.debug(f"k-covered deployment found after {attempt} attempts")
            return positions
    raise InfeasibleDeploymentError(
        f"no {k}-covered deployment of {n} nodes (r={radius} m) found in {params.max_retries} attempts"
    )


def generate_instance(
    variant: Variant, n: int, params: Optional[GenParams] = None, seed: int = 0
) -> ProblemInstance:
    variant = Variant(variant)
    if n < 1:
        raise InstanceValidationError("empty instance rejected")
    params = params or GenParams.for_variant(variant)
    params.validate(variant)
    rng = np.random.default_rng(seed)
    area = Area.square(params.side)
    depot = area.center

    if variant is Variant.P3_KCOVERAGE:
        positions = _kcovered_positions(params, area, n, rng)
    else:
        positions = area.sample(rng, n)
    residuals = _residuals(variant, params, n, rng)

    nodes = []
    for index in range(n):
        node = SensorNode(
            id=index + 1,
            position=positions[index],
            battery_capacity=params.battery_capacity,
            residual=float(residuals[index]),
        )
        if variant is Variant.P1_MOBILE_PATH:
            trace = random_waypoint_trace(
                node.position,
                area,
                params.t0,
                float(params.timespan or 0.0),
                (params.min_leg_speed, params.max_sensor_speed),
                rng,
            )
            node = attr.evolve(node, trajectory=trace)
        elif variant is Variant.P2_FULLY_CHARGING:
            if node.residual / node.battery_capacity <= params.alpha:
                node = attr.evolve(node, prize=prize_of(node, n))
        else:
            beta = float(rng.uniform(*params.beta_range))
            node = attr.evolve(
                node,
                consumption_rate=beta,
                sensing_radius=params.sensing_radius,
                deadline=node.residual / beta,
            )
        nodes.append(node)

    charger = Charger(
        depot=depot,
        end_point=params.end_point or depot,
        speed=params.charger_speed,
        transfer_rate=params.transfer_rate,
        travel_energy=params.travel_energy,
        energy_capacity=params.energy_capacity if variant is Variant.P2_FULLY_CHARGING else None,
        timespan=params.timespan if variant is Variant.P1_MOBILE_PATH else None,
    )
    instance = ProblemInstance(
        variant=variant,
        nodes=nodes,
        charger=charger,
        area=area,
        alpha=params.alpha,
        epsilon_charge=params.epsilon_charge,
        coverage_k=params.coverage_k if variant is Variant.P3_KCOVERAGE else None,
        t0=params.t0,
        rng_seed=seed,
    )
    log.info(
        f"Generated {variant.value} instance n={n} seed={seed}, {len(instance.requesters())} requesters"
    )
    return instance


def requester_positions(instance: ProblemInstance, ids: Optional[Sequence[int]] = None) -> np.ndarray:
    ids = instance.requester_ids() if ids is None else ids
    return np.array([instance.node(i).position for i in ids], dtype=float).reshape(-1, 2)
