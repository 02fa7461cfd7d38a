import networkx as nx
import numpy as np
import pytest

from wrsn_sched.embed import (
    FEATURE_WIDTH,
    EmbeddingParams,
    GraphView,
    embed_graph,
    encode,
    q_backward,
    q_for,
    q_value,
    q_values,
)
from wrsn_sched.envs import make_env
from wrsn_sched.errors import CheckpointError
from wrsn_sched.instances import START_VERTEX


def _random_view(size, rng):
    weights = rng.uniform(0.1, 1.0, (size, size))
    weights = (weights + weights.T) / 2
    adjacency = 1.0 - np.eye(size)
    return GraphView(tuple(range(size)), rng.uniform(-1, 1, (size, FEATURE_WIDTH)), adjacency, weights * adjacency)


def test_encode_p2(p2_line):
    env = make_env(p2_line)
    view = encode(env.replay((1,)))
    assert view.ids == (START_VERTEX, 1, 2, 3)
    assert view.features.shape == (4, FEATURE_WIDTH)
    assert view.features[:, 0].tolist() == [1.0, 1.0, 0.0, 0.0]
    assert (view.weights == view.weights.T).all()
    assert np.diag(view.weights).tolist() == [0.0] * 4


def test_isolated_vertices():
    rng = np.random.default_rng(0)
    params = EmbeddingParams.init(p=4, rounds=3, rng=rng, scale=0.5)
    features = rng.uniform(-1, 1, (3, FEATURE_WIDTH))
    view = GraphView((0, 1, 2), features, np.zeros((3, 3)), np.zeros((3, 3)))
    embedding = embed_graph(view, params)
    assert np.allclose(embedding.mu, np.maximum(features @ params.theta1.T, 0.0))


def test_permutation_equivariance():
    rng = np.random.default_rng(1)
    params = EmbeddingParams.init(p=6, rounds=3, rng=rng, scale=0.5)
    view = _random_view(5, rng)
    perm = np.array([3, 0, 4, 1, 2])
    permuted = GraphView(
        tuple(view.ids[i] for i in perm),
        view.features[perm],
        view.adjacency[np.ix_(perm, perm)],
        view.weights[np.ix_(perm, perm)],
    )
    original, shuffled = embed_graph(view, params), embed_graph(permuted, params)
    assert np.allclose(original.mu[perm], shuffled.mu)
    assert np.allclose(original.pooled, shuffled.pooled)
    assert q_for(view, params) == pytest.approx(q_for(permuted, params))


def test_single_round_by_hand():
    theta1 = np.zeros((2, FEATURE_WIDTH))
    theta1[0, 0] = 1.0
    params = EmbeddingParams(
        theta1=theta1,
        theta2=np.ones((2, 2)),
        theta3=np.eye(2),
        theta4=np.array([[1.0], [-1.0]]),
        theta5=np.ones((1, 4)),
        theta6=np.eye(2),
        theta7=np.eye(2),
        rounds=1,
    )
    features = np.zeros((2, FEATURE_WIDTH))
    features[0, 0] = 1.0
    weights = np.array([[0.0, 0.5], [0.5, 0.0]])
    view = GraphView((0, 1), features, 1.0 - np.eye(2), weights)
    embedding = embed_graph(view, params)
    assert embedding.mu.tolist() == [[1.5, 0.0], [0.5, 0.0]]
    assert q_value(embedding, 1, params) == pytest.approx(2.5)
    assert q_value(embedding, 0, params) == pytest.approx(3.5)


def test_zero_readout():
    rng = np.random.default_rng(2)
    params = EmbeddingParams.init(p=4, rounds=2, rng=rng, scale=0.5)
    params.theta5[...] = 0.0
    values = q_values(embed_graph(_random_view(4, rng), params), params)
    assert values.tolist() == [0.0] * 4


def test_gradient_matches_finite_differences(p2_line):
    rng = np.random.default_rng(3)
    params = EmbeddingParams.init(p=4, rounds=2, rng=rng, scale=0.5)
    view = encode(make_env(p2_line).replay((2,)))
    index = view.index(3)
    grads = q_backward(view, embed_graph(view, params), index, params)
    eps = 1e-6
    for name, value in params.as_dict().items():
        numeric = np.zeros_like(value)
        for position in np.ndindex(value.shape):
            saved = value[position]
            value[position] = saved + eps
            up = q_value(embed_graph(view, params), index, params)
            value[position] = saved - eps
            down = q_value(embed_graph(view, params), index, params)
            value[position] = saved
            numeric[position] = (up - down) / (2 * eps)
        assert np.allclose(grads[name], numeric, rtol=1e-4, atol=1e-6), name


def test_parameter_shapes_are_checked():
    params = EmbeddingParams.init(p=4)
    with pytest.raises(CheckpointError):
        EmbeddingParams(**{**params.as_dict(), "theta5": np.zeros((1, 4))})
    with pytest.raises(CheckpointError):
        EmbeddingParams(**{**params.as_dict(), "theta2": np.full((4, 4), np.nan)})


def test_apply_and_copy():
    params = EmbeddingParams.init(p=2)
    clone = params.copy()
    grads = {name: np.ones_like(value) for name, value in params.as_dict().items()}
    params.apply(grads, 0.5)
    assert np.allclose(params.theta1, clone.theta1 - 0.5)
    assert not np.allclose(clone.theta1, params.theta1)


def _far_rows(view, row, rounds):
    graph = nx.from_numpy_array(view.adjacency)
    near = nx.single_source_shortest_path_length(graph, row, cutoff=rounds)
    return [other for other in range(len(view.ids)) if other not in near]


def _perturbed(view, row, rng):
    features = view.features.copy()
    features[row] = rng.uniform(-1, 1, FEATURE_WIDTH)
    return GraphView(view.ids, features, view.adjacency, view.weights)


@pytest.mark.parametrize("rounds", [1, 2, 3])
def test_features_travel_one_hop_per_round(rounds):
    rng = np.random.default_rng(rounds)
    params = EmbeddingParams.init(p=6, rounds=rounds, rng=rng, scale=0.5)
    size = 7
    adjacency = np.zeros((size, size))
    for v in range(size - 1):
        adjacency[v, v + 1] = adjacency[v + 1, v] = 1.0
    view = GraphView(tuple(range(size)), rng.uniform(-1, 1, (size, FEATURE_WIDTH)), adjacency, 0.3 * adjacency)
    far = _far_rows(view, 0, rounds)
    assert far == list(range(rounds + 1, size))
    original = embed_graph(view, params).mu
    changed = embed_graph(_perturbed(view, 0, rng), params).mu
    assert np.array_equal(original[far], changed[far])


def test_p3_embedding_is_local(make_p3):
    positions = [(10.0 * i + 5.0, 50.0) for i in range(10)]
    residuals = [500.0 + 100.0 * i for i in range(10)]
    instance = make_p3(positions, radius=150.0, residuals=residuals, depot=(0.0, 50.0))
    view = encode(make_env(instance).reset())
    rng = np.random.default_rng(4)
    for rounds in (1, 2):
        params = EmbeddingParams.init(p=6, rounds=rounds, rng=rng, scale=0.5)
        original = embed_graph(view, params).mu
        for row in range(len(view.ids)):
            far = _far_rows(view, row, rounds)
            changed = embed_graph(_perturbed(view, row, rng), params).mu
            assert np.array_equal(original[far], changed[far])
