"""Line-oriented instance file.

    wrsn-instance v1 <variant> n=<n> seed=<seed>
    area x_min=<m> y_min=<m> x_max=<m> y_max=<m>
    problem alpha=<frac> epsilon=<frac> t0=<s> [k=<int>]
    charger x=<m> y=<m> end_x=<m> end_y=<m> s=<m/s> rc=<W> xi=<J/m> [IE=<J>] [C=<s>]
    node id=<i> x=<m> y=<m> B=<J> B0=<J> beta=<W> [r=<m>] [D=<s>] [pi=<int>] [vmax=<m/s>]
    wp id=<i> t=<s> x=<m> y=<m>

Keys are order-insensitive within a line, blank lines and `#` comments are ignored.
"""
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from wrsn_sched.errors import InstanceError, InstanceParseError
from wrsn_sched.formater import WrsnFormater, number, parse_fields
from wrsn_sched.instances import Area, Charger, MobilityTrace, ProblemInstance, SensorNode, Variant

MAGIC = "wrsn-instance"
VERSION = "v1"


def _get(fields: Dict[str, str], key: str, line: int, cast=float, required: bool = True):
    if key not in fields:
        if required:
            raise InstanceParseError("missing value", line=line, field=key)
        return None
    try:
        return cast(fields[key])
    except ValueError:
        raise InstanceParseError(f"invalid value {fields[key]!r}", line=line, field=key)


class InstanceFormater(WrsnFormater):
    @property
    def ext(self):
        return ".wrsn"

    @property
    def name(self):
        return "instance"

    def dumps(self, instance: ProblemInstance) -> str:
        charger, area = instance.charger, instance.area
        lines = [
            f"{MAGIC} {VERSION} {instance.variant.value} n={instance.n} seed={instance.rng_seed}",
            f"area x_min={number(area.x_min)} y_min={number(area.y_min)} "
            f"x_max={number(area.x_max)} y_max={number(area.y_max)}",
        ]
        problem = f"problem alpha={number(instance.alpha)} epsilon={number(instance.epsilon_charge)} t0={number(instance.t0)}"
        if instance.coverage_k is not None:
            problem += f" k={instance.coverage_k}"
        lines.append(problem)
        line = (
            f"charger x={number(charger.depot[0])} y={number(charger.depot[1])} "
            f"end_x={number(charger.end_point[0])} end_y={number(charger.end_point[1])} "
            f"s={number(charger.speed)} rc={number(charger.transfer_rate)} xi={number(charger.travel_energy)}"
        )
        if charger.energy_capacity is not None:
            line += f" IE={number(charger.energy_capacity)}"
        if charger.timespan is not None:
            line += f" C={number(charger.timespan)}"
        lines.append(line)

        waypoints = []
        for node in sorted(instance.nodes, key=lambda node: node.id):
            line = (
                f"node id={node.id} x={number(node.position[0])} y={number(node.position[1])} "
                f"B={number(node.battery_capacity)} B0={number(node.residual)} beta={number(node.consumption_rate)}"
            )
            if node.sensing_radius is not None:
                line += f" r={number(node.sensing_radius)}"
            if node.deadline is not None:
                line += f" D={number(node.deadline)}"
            if node.prize is not None:
                line += f" pi={node.prize}"
            if node.trajectory is not None:
                line += f" vmax={number(node.trajectory.max_speed)}"
                waypoints += [
                    f"wp id={node.id} t={number(t)} x={number(x)} y={number(y)}" for t, (x, y) in node.trajectory.waypoints
                ]
            lines.append(line)
        return "\n".join(lines + waypoints) + "\n"

    def loads(self, text: str) -> ProblemInstance:
        header: Optional[Tuple[Variant, int, int]] = None
        area: Optional[Area] = None
        problem: Dict[str, object] = {}
        charger: Optional[Charger] = None
        nodes: List[Tuple[int, Dict[str, object]]] = []
        waypoints: Dict[int, List[Tuple[float, Tuple[float, float]]]] = {}

        for number_, raw in enumerate(text.splitlines(), start=1):
            content = raw.split("#", 1)[0].strip()
            if not content:
                continue
            tokens = content.split()
            kind = tokens[0]
            if header is None:
                if kind != MAGIC or len(tokens) < 3:
                    raise InstanceParseError(f"expected '{MAGIC} {VERSION} <variant> ...' header", line=number_)
                if tokens[1] != VERSION:
                    raise InstanceParseError(f"unsupported version {tokens[1]!r}", line=number_)
                try:
                    variant = Variant(tokens[2])
                except ValueError:
                    raise InstanceParseError(f"unknown variant {tokens[2]!r}", line=number_, field="variant")
                fields = parse_fields(tokens[3:], number_)
                header = (variant, _get(fields, "n", number_, int), _get(fields, "seed", number_, int))
                continue
            fields = parse_fields(tokens[1:], number_)
            if kind == "area":
                area = Area(*(_get(fields, key, number_) for key in ("x_min", "y_min", "x_max", "y_max")))
            elif kind == "problem":
                problem = dict(
                    alpha=_get(fields, "alpha", number_),
                    epsilon_charge=_get(fields, "epsilon", number_),
                    t0=_get(fields, "t0", number_),
                    coverage_k=_get(fields, "k", number_, int, required=False),
                )
            elif kind == "charger":
                charger = Charger(
                    depot=(_get(fields, "x", number_), _get(fields, "y", number_)),
                    end_point=(_get(fields, "end_x", number_), _get(fields, "end_y", number_)),
                    speed=_get(fields, "s", number_),
                    transfer_rate=_get(fields, "rc", number_),
                    travel_energy=_get(fields, "xi", number_),
                    energy_capacity=_get(fields, "IE", number_, required=False),
                    timespan=_get(fields, "C", number_, required=False),
                )
            elif kind == "node":
                nodes.append(
                    (
                        number_,
                        dict(
                            id=_get(fields, "id", number_, int),
                            position=(_get(fields, "x", number_), _get(fields, "y", number_)),
                            battery_capacity=_get(fields, "B", number_),
                            residual=_get(fields, "B0", number_),
                            consumption_rate=_get(fields, "beta", number_),
                            sensing_radius=_get(fields, "r", number_, required=False),
                            deadline=_get(fields, "D", number_, required=False),
                            prize=_get(fields, "pi", number_, int, required=False),
                            vmax=_get(fields, "vmax", number_, required=False),
                        ),
                    )
                )
            elif kind == "wp":
                waypoints.setdefault(_get(fields, "id", number_, int), []).append(
                    (_get(fields, "t", number_), (_get(fields, "x", number_), _get(fields, "y", number_)))
                )
            else:
                raise InstanceParseError(f"unknown line kind {kind!r}", line=number_)

        if header is None:
            raise InstanceParseError("empty instance file")
        variant, n, seed = header
        if area is None or charger is None or not problem:
            missing = [name for name, value in (("area", area), ("charger", charger), ("problem", problem)) if not value]
            raise InstanceParseError(f"truncated file, missing {', '.join(missing)} line")
        if len(nodes) != n:
            raise InstanceParseError(f"truncated file, header announces {n} nodes, found {len(nodes)}")

        sensors = []
        for line, values in nodes:
            vmax = values.pop("vmax")
            trace = waypoints.pop(values["id"], None)
            if trace is not None:
                if vmax is None:
                    raise InstanceParseError("waypoints need the node's max speed", line=line, field="vmax")
                values["trajectory"] = MobilityTrace(trace, vmax)
            sensors.append(SensorNode(**values))
        if waypoints:
            raise InstanceParseError(f"waypoints for unknown node ids {sorted(waypoints)}")
        return ProblemInstance(variant=variant, nodes=sensors, charger=charger, area=area, rng_seed=seed, **problem)

    def read(self, filename: Path) -> ProblemInstance:
        try:
            raw = Path(filename).read_bytes()
        except OSError as e:
            raise InstanceError(f"can not read instance file {filename}: {e}")
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise InstanceParseError(
                f"{filename} is not UTF-8 text, invalid byte at offset {e.start}", line=raw.count(b"\n", 0, e.start) + 1
            )
        instance = self.loads(text)
        self.log.info(f"Read {instance.variant.value} instance with {instance.n} nodes from {filename}")
        return instance

    def write(self, filename: Path, data: ProblemInstance) -> Path:
        filename = self.with_ext(filename)
        filename.parent.mkdir(parents=True, exist_ok=True)
        filename.write_text(self.dumps(data), encoding="utf-8")
        self.log.info(f"Wrote {data.variant.value} instance with {data.n} nodes to {filename}")
        return filename


def save_instance(instance: ProblemInstance, path: Union[str, Path]) -> Path:
    return InstanceFormater().write(Path(path), instance)


def load_instance(path: Union[str, Path]) -> ProblemInstance:
    return InstanceFormater().read(Path(path))
