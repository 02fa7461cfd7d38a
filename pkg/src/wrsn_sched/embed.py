"""structure2vec vertex embeddings and the Q(s, v) readout, with their gradients."""
import logging
from typing import Dict, Optional, Sequence, Tuple

import attr
import numpy as np

from wrsn_sched.envs import ScheduleState
from wrsn_sched.errors import CheckpointError
from wrsn_sched.graph import build_graph
from wrsn_sched.instances import START_VERTEX, Variant

log = logging.getLogger(__name__)

FEATURE_WIDTH = 6
PARAM_NAMES = ("theta1", "theta2", "theta3", "theta4", "theta5", "theta6", "theta7")


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


@attr.s(eq=False)
class EmbeddingParams:
    theta1 = attr.ib(type=np.ndarray)
    theta2 = attr.ib(type=np.ndarray)
    theta3 = attr.ib(type=np.ndarray)
    theta4 = attr.ib(type=np.ndarray)
    theta5 = attr.ib(type=np.ndarray)
    theta6 = attr.ib(type=np.ndarray)
    theta7 = attr.ib(type=np.ndarray)
    rounds = attr.ib(default=4, type=int)

    def __attrs_post_init__(self) -> None:
        p, d_x = self.theta1.shape
        expected = {
            "theta1": (p, d_x),
            "theta2": (p, p),
            "theta3": (p, p),
            "theta4": (p, 1),
            "theta5": (1, 2 * p),
            "theta6": (p, p),
            "theta7": (p, p),
        }
        for name, shape in expected.items():
            matrix = getattr(self, name)
            if matrix.shape != shape:
                raise CheckpointError(f"{name} has shape {matrix.shape}, expected {shape}")
        if p < 1 or self.rounds < 1:
            raise CheckpointError(f"embedding width {p} and rounds {self.rounds} must be >= 1")
        if not self.is_finite():
            raise CheckpointError("parameters contain non-finite values")

    @classmethod
    def init(cls, p: int = 64, d_x: int = FEATURE_WIDTH, rounds: int = 4, rng=None, scale: float = 0.01):
        rng = rng if rng is not None else np.random.default_rng(0)
        shapes = dict(
            theta1=(p, d_x), theta2=(p, p), theta3=(p, p), theta4=(p, 1), theta5=(1, 2 * p), theta6=(p, p), theta7=(p, p)
        )
        return cls(rounds=rounds, **{name: rng.uniform(-scale, scale, shape) for name, shape in shapes.items()})

    @property
    def p(self) -> int:
        return self.theta1.shape[0]

    @property
    def d_x(self) -> int:
        return self.theta1.shape[1]

    def as_dict(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "EmbeddingParams":
        return EmbeddingParams(rounds=self.rounds, **{name: value.copy() for name, value in self.as_dict().items()})

    def is_finite(self) -> bool:
        return all(np.isfinite(value).all() for value in self.as_dict().values())

    def apply(self, grads: Dict[str, np.ndarray], learning_rate: float) -> None:
        """In-place gradient descent step."""
        for name, grad in grads.items():
            getattr(self, name)[...] -= learning_rate * grad

    def zeros_like(self) -> Dict[str, np.ndarray]:
        return {name: np.zeros_like(value) for name, value in self.as_dict().items()}


@attr.s(frozen=True, eq=False)
class GraphView:
    """Dense view of the graph seen by the learner at one state."""

    ids = attr.ib(type=Tuple[int, ...])
    features = attr.ib(type=np.ndarray)
    adjacency = attr.ib(type=np.ndarray)
    weights = attr.ib(type=np.ndarray)

    def index(self, vertex: int) -> int:
        return self.ids.index(vertex)


@attr.s(frozen=True, eq=False)
class Embedding:
    mu = attr.ib(type=np.ndarray)
    pooled = attr.ib(type=np.ndarray)
    edge_messages = attr.ib(type=np.ndarray, repr=False)
    rounds = attr.ib(type=Tuple[Tuple[np.ndarray, np.ndarray, np.ndarray], ...], repr=False)


def encode(state: ScheduleState) -> GraphView:
    """Vertex features [selected, x, y, residual, slack or prize, distance to head] and weights.

    Vertices are the start vertex followed by the requesters in id order. Mobile node
    positions are taken at the state's clock.
    """
    instance = state.instance
    area = instance.area
    diameter = area.diameter
    ids = (START_VERTEX,) + instance.requester_ids()
    clock = state.clock if np.isfinite(state.clock) else instance.horizon_end

    points = np.empty((len(ids), 2))
    points[0] = instance.charger.depot
    for row, node_id in enumerate(ids[1:], start=1):
        node = instance.node(node_id)
        if node.trajectory is not None:
            points[row] = node.trajectory.positions_at(np.array([min(clock, instance.horizon_end)]))[0]
        else:
            points[row] = node.position

    features = np.zeros((len(ids), FEATURE_WIDTH))
    charged = state.charged
    features[0, 0] = 1.0
    features[:, 1] = (points[:, 0] - area.x_min) / area.width
    features[:, 2] = (points[:, 1] - area.y_min) / area.height
    longest = max((instance.node(i).deadline or 0.0 for i in ids[1:]), default=0.0) or 1.0
    top = float(instance.n * instance.n)
    for row, node_id in enumerate(ids[1:], start=1):
        node = instance.node(node_id)
        features[row, 0] = 1.0 if node_id in charged else 0.0
        features[row, 3] = node.residual / node.battery_capacity
        if instance.variant is Variant.P3_KCOVERAGE and node.deadline is not None:
            features[row, 4] = (instance.t0 + node.deadline - clock) / longest
        elif instance.variant is Variant.P2_FULLY_CHARGING:
            features[row, 4] = (node.prize or 0) / top
    head = np.array(state.head_position) if np.isfinite(state.clock) else points[0]
    features[:, 5] = np.hypot(points[:, 0] - head[0], points[:, 1] - head[1]) / diameter
    np.clip(features, -1.0, 1.0, out=features)

    weights = np.hypot(points[:, None, 0] - points[None, :, 0], points[:, None, 1] - points[None, :, 1]) / diameter
    if instance.variant is Variant.P3_KCOVERAGE:
        graph = build_graph(instance).graph
        adjacency = np.zeros((len(ids), len(ids)))
        row_of = {node_id: row for row, node_id in enumerate(ids)}
        for u, v in graph.edges:
            adjacency[row_of[u], row_of[v]] = adjacency[row_of[v], row_of[u]] = 1.0
    else:
        adjacency = 1.0 - np.eye(len(ids))
    return GraphView(ids, features, adjacency, weights * adjacency)


def embed_graph(view: GraphView, params: EmbeddingParams) -> Embedding:
    """Synchronous rounds mu <- relu(theta1 x + theta2 sum mu_u + theta3 sum relu(theta4 w)), mu_0 = 0."""
    X, A, W = view.features, view.adjacency, view.weights
    theta4 = params.theta4[:, 0]
    messages = np.einsum("vu,vuc->vc", A, _relu(W[:, :, None] * theta4[None, None, :]))
    static = X @ params.theta1.T + messages @ params.theta3.T
    mu = np.zeros((len(view.ids), params.p))
    rounds = []
    for _ in range(params.rounds):
        neighbours = A @ mu
        pre = static + neighbours @ params.theta2.T
        rounds.append((neighbours, pre, mu))
        mu = _relu(pre)
    return Embedding(mu=mu, pooled=mu.sum(axis=0), edge_messages=messages, rounds=tuple(rounds))


def q_value(embedding: Embedding, index: int, params: EmbeddingParams) -> float:
    hidden = np.concatenate((params.theta6 @ embedding.pooled, params.theta7 @ embedding.mu[index]))
    return float(params.theta5 @ _relu(hidden))


def q_values(embedding: Embedding, params: EmbeddingParams) -> np.ndarray:
    """Q for every vertex of the view at once."""
    pooled_part = np.broadcast_to(params.theta6 @ embedding.pooled, (len(embedding.mu), params.p))
    hidden = np.concatenate((pooled_part, embedding.mu @ params.theta7.T), axis=1)
    return _relu(hidden) @ params.theta5[0]


def q_for(view: GraphView, params: EmbeddingParams, vertices: Optional[Sequence[int]] = None) -> Dict[int, float]:
    values = q_values(embed_graph(view, params), params)
    wanted = view.ids if vertices is None else vertices
    return {v: float(values[view.index(v)]) for v in wanted}


def q_backward(
    view: GraphView, embedding: Embedding, index: int, params: EmbeddingParams, upstream: float = 1.0
) -> Dict[str, np.ndarray]:
    """Gradients of upstream * Q(s, v) with respect to every parameter matrix."""
    p = params.p
    A, W, X = view.adjacency, view.weights, view.features
    grads = params.zeros_like()

    h_pool = params.theta6 @ embedding.pooled
    h_vertex = params.theta7 @ embedding.mu[index]
    hidden = np.concatenate((h_pool, h_vertex))
    grads["theta5"] = upstream * _relu(hidden)[None, :]
    d_hidden = upstream * params.theta5[0] * (hidden > 0)
    d_pool, d_vertex = d_hidden[:p], d_hidden[p:]
    grads["theta6"] = np.outer(d_pool, embedding.pooled)
    grads["theta7"] = np.outer(d_vertex, embedding.mu[index])

    d_mu = np.tile(params.theta6.T @ d_pool, (len(view.ids), 1))
    d_mu[index] += params.theta7.T @ d_vertex
    d_messages = np.zeros_like(embedding.edge_messages)
    for neighbours, pre, _ in reversed(embedding.rounds):
        d_pre = d_mu * (pre > 0)
        grads["theta1"] += d_pre.T @ X
        grads["theta2"] += d_pre.T @ neighbours
        grads["theta3"] += d_pre.T @ embedding.edge_messages
        d_messages += d_pre @ params.theta3
        d_mu = A.T @ (d_pre @ params.theta2)

    active = (W[:, :, None] * params.theta4[:, 0][None, None, :]) > 0
    grads["theta4"] = np.einsum("vc,vu,vuc->c", d_messages, A * W, active)[:, None]
    return grads
