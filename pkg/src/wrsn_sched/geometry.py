"""Disk coverage of the field of interest.

The arrangement of sensing disks is not built exactly. Instead the covering set
("signature") is evaluated at a set of sample points that reaches every face of the
arrangement: points next to every pairwise circle intersection and every
circle/boundary intersection (one per angular sector), points just inside and outside
of every circle, the area corners, and a regular grid. Faces sharing a covering set are
merged into one subregion since the minimum-charges table only depends on that set.
"""
import logging
import math
from typing import TYPE_CHECKING, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import attr
import numpy as np

from wrsn_sched.errors import GeometryError

if TYPE_CHECKING:  # pragma: no cover
    from wrsn_sched.instances import Area, ProblemInstance, SensorNode

log = logging.getLogger(__name__)

Point = Tuple[float, float]
Disk = Tuple[int, Point, float]

DEFAULT_CELL = 1.0
# Radius perturbation used when deciding whether two circles touch.
TANGENT_EPS = 1e-9
_CHUNK = 20000


def covers(node: "SensorNode", q: Point) -> bool:
    if node.sensing_radius is None:
        raise GeometryError(f"node {node.id} has no sensing radius")
    return math.hypot(node.position[0] - q[0], node.position[1] - q[1]) <= node.sensing_radius


def coverage_count(nodes: Iterable["SensorNode"], q: Point) -> int:
    return sum(1 for node in nodes if covers(node, q))


def coverage_matrix(points: np.ndarray, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Boolean (points x disks) matrix of closed-disk membership."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    out = np.zeros((len(points), len(centers)), dtype=bool)
    for start in range(0, len(points), _CHUNK):
        block = points[start : start + _CHUNK]
        dist = np.hypot(block[:, None, 0] - centers[None, :, 0], block[:, None, 1] - centers[None, :, 1])
        out[start : start + _CHUNK] = dist <= radii[None, :]
    return out


def _boundary_margin(points: np.ndarray, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
    margin = np.full(len(points), np.inf)
    for start in range(0, len(points), _CHUNK):
        block = points[start : start + _CHUNK]
        dist = np.hypot(block[:, None, 0] - centers[None, :, 0], block[:, None, 1] - centers[None, :, 1])
        margin[start : start + _CHUNK] = np.abs(dist - radii[None, :]).min(axis=1) if len(centers) else np.inf
    return margin


def _sector_samples(vertex: np.ndarray, ray_angles: np.ndarray, delta: float) -> np.ndarray:
    """One sample per angular sector around each vertex.

    vertex: (K, 2), ray_angles: (K, R) angles of the curves/edges leaving each vertex.
    """
    angles = np.sort(np.mod(ray_angles, 2 * math.pi), axis=1)
    following = np.roll(angles, -1, axis=1)
    following[:, -1] += 2 * math.pi
    bisectors = (angles + following) / 2
    offsets = delta * np.stack((np.cos(bisectors), np.sin(bisectors)), axis=-1)
    return (vertex[:, None, :] + offsets).reshape(-1, 2)


def _circle_intersections(centers: np.ndarray, radii: np.ndarray, delta: float) -> np.ndarray:
    n = len(centers)
    if n < 2:
        return np.empty((0, 2))
    i, j = np.triu_indices(n, k=1)
    c1, c2, r1, r2 = centers[i], centers[j], radii[i], radii[j]
    diff = c2 - c1
    d = np.hypot(diff[:, 0], diff[:, 1])
    touching = (d > 0) & (d <= r1 + r2 + TANGENT_EPS) & (d >= np.abs(r1 - r2) - TANGENT_EPS)
    if not touching.any():
        return np.empty((0, 2))
    c1, c2, r1, r2, diff, d = c1[touching], c2[touching], r1[touching], r2[touching], diff[touching], d[touching]
    a = (d ** 2 + r1 ** 2 - r2 ** 2) / (2 * d)
    h = np.sqrt(np.clip(r1 ** 2 - a ** 2, 0.0, None))
    unit = diff / d[:, None]
    perp = np.column_stack((-unit[:, 1], unit[:, 0]))
    base = c1 + a[:, None] * unit
    vertices = np.vstack((base + h[:, None] * perp, base - h[:, None] * perp))
    owners1 = np.concatenate((c1, c1))
    owners2 = np.concatenate((c2, c2))
    # tangent directions of both circles at each vertex, both orientations
    t1 = np.arctan2(vertices[:, 1] - owners1[:, 1], vertices[:, 0] - owners1[:, 0]) + math.pi / 2
    t2 = np.arctan2(vertices[:, 1] - owners2[:, 1], vertices[:, 0] - owners2[:, 0]) + math.pi / 2
    rays = np.column_stack((t1, t1 + math.pi, t2, t2 + math.pi))
    return np.vstack((vertices, _sector_samples(vertices, rays, delta)))


def _boundary_intersections(centers: np.ndarray, radii: np.ndarray, area: "Area", delta: float) -> np.ndarray:
    vertices: List[Tuple[float, float]] = []
    rays: List[Tuple[float, float, float, float]] = []
    for (cx, cy), r in zip(centers, radii):
        for x0 in (area.x_min, area.x_max):
            if abs(x0 - cx) <= r:
                h = math.sqrt(max(r * r - (x0 - cx) ** 2, 0.0))
                for y in (cy - h, cy + h):
                    if area.y_min <= y <= area.y_max:
                        tangent = math.atan2(y - cy, x0 - cx) + math.pi / 2
                        vertices.append((x0, y))
                        rays.append((tangent, tangent + math.pi, math.pi / 2, -math.pi / 2))
        for y0 in (area.y_min, area.y_max):
            if abs(y0 - cy) <= r:
                h = math.sqrt(max(r * r - (y0 - cy) ** 2, 0.0))
                for x in (cx - h, cx + h):
                    if area.x_min <= x <= area.x_max:
                        tangent = math.atan2(y0 - cy, x - cx) + math.pi / 2
                        vertices.append((x, y0))
                        rays.append((tangent, tangent + math.pi, 0.0, math.pi))
    if not vertices:
        return np.empty((0, 2))
    vertex_array = np.array(vertices)
    return np.vstack((vertex_array, _sector_samples(vertex_array, np.array(rays), delta)))


def _circle_samples(centers: np.ndarray, radii: np.ndarray, delta: float) -> np.ndarray:
    if not len(centers):
        return np.empty((0, 2))
    angles = np.linspace(0, 2 * math.pi, 8, endpoint=False)
    ring = np.stack((np.cos(angles), np.sin(angles)), axis=-1)
    samples = []
    for offset in (-delta, delta):
        scale = (radii + offset)[:, None, None]
        samples.append((centers[:, None, :] + scale * ring[None, :, :]).reshape(-1, 2))
    return np.vstack([centers] + samples)


def _grid(area: "Area", cell: float) -> np.ndarray:
    xs = np.arange(area.x_min + cell / 2, area.x_max, cell)
    ys = np.arange(area.y_min + cell / 2, area.y_max, cell)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack((gx.ravel(), gy.ravel()))


def sample_points(centers: np.ndarray, radii: np.ndarray, area: "Area", cell: float = DEFAULT_CELL) -> np.ndarray:
    """Points reaching every face of the disk arrangement clipped to the area."""
    if cell <= 0:
        raise GeometryError(f"grid cell must be positive, got {cell}")
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    radii = np.asarray(radii, dtype=float)
    delta = 1e-7 * max(area.diameter, 1.0)
    corners = np.array(area.corners)
    inward = np.array([(1, 1), (-1, 1), (-1, -1), (1, -1)], dtype=float)
    points = np.vstack(
        (
            corners,
            corners + delta * inward,
            _grid(area, cell),
            _circle_samples(centers, radii, delta),
            _circle_intersections(centers, radii, delta),
            _boundary_intersections(centers, radii, area, delta),
        )
    )
    inside = (
        (points[:, 0] >= area.x_min)
        & (points[:, 0] <= area.x_max)
        & (points[:, 1] >= area.y_min)
        & (points[:, 1] <= area.y_max)
    )
    return points[inside]


def deployment_min_coverage(
    centers: np.ndarray, radii: np.ndarray, area: "Area", cell: float = DEFAULT_CELL
) -> int:
    points = sample_points(centers, radii, area, cell)
    if not len(centers):
        return 0
    return int(coverage_matrix(points, np.asarray(centers, dtype=float), np.asarray(radii, dtype=float)).sum(axis=1).min())


@attr.s(frozen=True)
class SubregionTable:
    """Subregions of the field with the minimum number of requesters to charge in each."""

    k = attr.ib(type=int)
    representatives = attr.ib(type=Tuple[Point, ...])
    covering = attr.ib(type=Tuple[FrozenSet[int], ...])
    requesting_counts = attr.ib(type=Tuple[int, ...])
    table = attr.ib(type=Tuple[int, ...])
    deficient = attr.ib(type=Tuple[bool, ...])
    requester_ids = attr.ib(type=FrozenSet[int])
    charged = attr.ib(factory=frozenset, type=FrozenSet[int])
    disks = attr.ib(factory=tuple, type=Tuple[Disk, ...], eq=False, repr=False)
    node_index = attr.ib(factory=dict, type=Dict[int, Tuple[int, ...]], eq=False, repr=False)
    signature_index = attr.ib(factory=dict, type=Dict[FrozenSet[int], int], eq=False, repr=False)

    @property
    def m(self) -> int:
        return len(self.table)

    @property
    def all_zero(self) -> bool:
        return not any(self.table)

    @property
    def feasible(self) -> bool:
        """True when the initial deployment k-covers every subregion."""
        return not any(self.deficient)

    def entries_of(self, node_id: int) -> Tuple[int, ...]:
        return self.node_index.get(node_id, ())

    def helps(self, node_id: int) -> bool:
        """Whether charging the node decreases at least one positive entry."""
        if node_id not in self.requester_ids or node_id in self.charged:
            return False
        return any(self.table[i] > 0 for i in self.entries_of(node_id))


def _disks(instance: "ProblemInstance") -> Tuple[Disk, ...]:
    nodes = sorted(instance.nodes, key=lambda node: node.id)
    for node in nodes:
        if node.sensing_radius is None:
            raise GeometryError(f"node {node.id} has no sensing radius")
    return tuple((node.id, node.position, float(node.sensing_radius)) for node in nodes)  # type: ignore


def subregion_table(
    disks: Iterable[Disk], requester_ids: Iterable[int], k: int, area: "Area", cell: float = DEFAULT_CELL
) -> SubregionTable:
    """Table of a raw disk layout, which may leave parts of the area below k-coverage."""
    disks = tuple(sorted(disks, key=lambda disk: disk[0]))
    ids = np.array([disk[0] for disk in disks])
    centers = np.array([disk[1] for disk in disks], dtype=float).reshape(-1, 2)
    radii = np.array([disk[2] for disk in disks], dtype=float)

    points = sample_points(centers, radii, area, cell)
    membership = coverage_matrix(points, centers, radii)
    margin = _boundary_margin(points, centers, radii)
    unique, inverse = np.unique(membership, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    # representative: the sample farthest from any disk boundary
    order = np.lexsort((-margin, inverse))
    first = order[np.r_[True, inverse[order][1:] != inverse[order][:-1]]]

    requester_ids = frozenset(requester_ids)
    rows = []
    for group, point_index in zip(range(len(unique)), first):
        covering = frozenset(int(i) for i in ids[unique[group]])
        rows.append((tuple(sorted(covering)), covering, tuple(points[point_index])))
    rows.sort(key=lambda row: (len(row[0]), row[0]))

    representatives, coverings, requesting, table, deficient = [], [], [], [], []
    for _, covering, point in rows:
        requests = len(covering & requester_ids)
        short = len(covering) < k
        representatives.append((float(point[0]), float(point[1])))
        coverings.append(covering)
        requesting.append(requests)
        deficient.append(short)
        table.append(0 if short else max(0, k - (len(covering) - requests)))

    node_index: Dict[int, List[int]] = {int(i): [] for i in ids}
    for index, covering in enumerate(coverings):
        for node_id in covering:
            node_index[node_id].append(index)
    result = SubregionTable(
        k=k,
        representatives=tuple(representatives),
        covering=tuple(coverings),
        requesting_counts=tuple(requesting),
        table=tuple(table),
        deficient=tuple(deficient),
        requester_ids=requester_ids,
        disks=disks,
        node_index={node_id: tuple(indices) for node_id, indices in node_index.items()},
        signature_index={covering: index for index, covering in enumerate(coverings)},
    )
    log.debug(f"{result.m} subregions from {len(points)} samples, T sum {sum(table)}")
    return result


def build_subregions(instance: "ProblemInstance", cell: float = DEFAULT_CELL) -> SubregionTable:
    if instance.coverage_k is None:
        raise GeometryError("subregions need a coverage requirement k")
    return subregion_table(_disks(instance), instance.requester_ids(), instance.coverage_k, instance.area, cell)


def verify_k_coverage(instance: "ProblemInstance", cell: float = DEFAULT_CELL) -> bool:
    return build_subregions(instance, cell).feasible


def table_after_charging(table: SubregionTable, charged_set: Iterable[int]) -> SubregionTable:
    newly = (frozenset(charged_set) & table.requester_ids) - table.charged
    if not newly:
        return table
    entries = list(table.table)
    for node_id in newly:
        for index in table.entries_of(node_id):
            entries[index] = max(0, entries[index] - 1)
    return attr.evolve(table, table=tuple(entries), charged=table.charged | newly)


def covering_set_at(table: SubregionTable, q: Point) -> FrozenSet[int]:
    return frozenset(
        node_id for node_id, center, radius in table.disks if math.hypot(center[0] - q[0], center[1] - q[1]) <= radius
    )


def locate(table: SubregionTable, q: Point) -> Optional[int]:
    """Index of the subregion containing q, None when q falls in a face the table missed."""
    return table.signature_index.get(covering_set_at(table, q))


def locate_many(table: SubregionTable, points: np.ndarray) -> Sequence[Optional[int]]:
    ids = np.array([disk[0] for disk in table.disks])
    centers = np.array([disk[1] for disk in table.disks], dtype=float).reshape(-1, 2)
    radii = np.array([disk[2] for disk in table.disks], dtype=float)
    membership = coverage_matrix(points, centers, radii)
    return [table.signature_index.get(frozenset(int(i) for i in ids[row])) for row in membership]
