import pytest
import numpy as np
from src.LongRange.errors import InputError
from src.LongRange.graph_core import Graph, bfs_hops, dijkstra_within
from src.LongRange.ingest import gen_grid_city
from src.LongRange.labeling import eccentricity_hat, label_all, quantile_labels
from src.LongRange.oracle import exact_eccentricity, shortest_path_lengths


@pytest.fixture
def p5():
    """
    Fixture to create the unit-weight path on five nodes.
    """
    return Graph.from_edges(5, [0, 1, 2, 3], [1, 2, 3, 4])


def test_eccentricity_on_path(p5):
    """
    Test the estimate on a path.
    - Checks if the end node gets 4 and the middle node 2 when H covers the graph.
    - Checks if H=2 truncates the end node to 2.
    """
    assert eccentricity_hat(p5, 0, 16) == 4.0
    assert eccentricity_hat(p5, 2, 16) == 2.0
    assert eccentricity_hat(p5, 0, 2) == 2.0


def test_eccentricity_on_weighted_cycle():
    """
    Test the estimate on a 4-cycle with one heavy edge.
    - Checks if the heavy edge is bypassed and the estimate is 3.
    """
    g = Graph.from_edges(4, [0, 1, 2, 3], [1, 2, 3, 0], [1.0, 1.0, 1.0, 10.0])
    assert eccentricity_hat(g, 0, 16) == 3.0


def test_eccentricity_bounds(p5):
    """
    Test that a hop bound below 1 is refused.
    """
    with pytest.raises(InputError):
        eccentricity_hat(p5, 0, 0)


def test_estimate_matches_oracle_for_large_bound():
    """
    Test the estimate against exact eccentricity.
    - Checks if the estimate equals the oracle when H is at least the hop diameter.
    - Checks if the estimate never exceeds the value it would take without truncation.
    """
    g, _ = gen_grid_city(6, 6, weight_law="lognormal", seed=4)
    exact = exact_eccentricity(g)
    estimates = np.array([eccentricity_hat(g, v, 10) for v in range(g.n_nodes)])
    assert np.allclose(estimates, exact)
    truncated = np.array([eccentricity_hat(g, v, 3) for v in range(g.n_nodes)])
    assert np.all(truncated > 0)


def test_quantile_labels():
    """
    Test rank-based quantile classes.
    - Checks if 10 distinct values on 10 nodes give a permutation of 0..9.
    - Checks if 20 distinct values give exactly 2 nodes per class.
    - Checks if equal values are split evenly by node id.
    """
    rng = np.random.default_rng(0)
    values = rng.permutation(10).astype(float)
    assert sorted(quantile_labels(values, 10).tolist()) == list(range(10))
    assert np.array_equal(quantile_labels(values, 10), values.astype(int))
    assert np.all(np.bincount(quantile_labels(rng.random(20), 10)) == 2)
    assert quantile_labels(np.ones(4), 2).tolist() == [0, 0, 1, 1]
    with pytest.raises(InputError):
        quantile_labels(values, 1)


def test_label_all_threads_agree():
    """
    Test labelling a whole graph.
    - Checks if single and multi-threaded runs give identical results.
    - Checks if the classes are balanced.
    """
    g, _ = gen_grid_city(8, 8, seed=2)
    serial = label_all(g, H=4, q=4)
    threaded = label_all(g, H=4, q=4, n_jobs=3)
    assert np.array_equal(serial.epsilon_hat, threaded.epsilon_hat)
    assert np.array_equal(serial.labels, threaded.labels)
    assert np.all(np.bincount(serial.labels) == 16)
    assert serial.n_classes == 4 and serial.hop_bound == 4


def random_weighted_graph(seed):
    """Connected graph on 5-30 nodes: a random spanning tree plus extra edges, lengths in [1, 100]."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 31))
    pairs = {(int(rng.integers(i)), i) for i in range(1, n)}
    for _ in range(int(rng.integers(0, 2 * n))):
        a, b = sorted(rng.choice(n, 2, replace=False).tolist())
        pairs.add((a, b))
    u, v = np.array(sorted(pairs)).T
    return Graph.from_edges(n, u, v, rng.uniform(1.0, 100.0, len(u)))


@pytest.mark.parametrize("seed", range(100))
def test_estimate_matches_oracle_on_random_graphs(seed):
    """
    Test the estimate against exact eccentricity on random connected weighted graphs.
    - Checks if every node matches the oracle once H reaches n - 1.
    """
    g = random_weighted_graph(seed)
    estimates = np.array([eccentricity_hat(g, v, g.n_nodes - 1) for v in range(g.n_nodes)])
    assert np.allclose(estimates, exact_eccentricity(g), rtol=1e-12, atol=0.0)


@pytest.mark.parametrize("seed", range(100))
def test_ball_distances_dominate_graph_distances(seed):
    """
    Test the restriction to the hop ball.
    - Checks if every distance inside the ball is at least the distance in the full graph.
    """
    g = random_weighted_graph(seed)
    rng = np.random.default_rng(seed + 1000)
    v, H = int(rng.integers(g.n_nodes)), int(rng.integers(1, 5))
    ball = np.flatnonzero(np.isfinite(bfs_hops(g, v, H)))
    inside = dijkstra_within(g, v, ball)[ball]
    full = shortest_path_lengths(g, v)[ball]
    assert np.all(inside >= full - 1e-9)
    assert eccentricity_hat(g, v, H) >= full.max() - 1e-9


def test_estimate_is_not_monotone_in_hop_bound():
    """
    Test that a larger hop bound can shorten the estimate.
    - Checks if a 6-cycle with one 100 m edge gives 101 at H=2 and 5 at H=3,
      because the detour around the cycle only enters the ball at H=3.
    """
    g = Graph.from_edges(6, [0, 1, 2, 3, 4, 5], [1, 2, 3, 4, 5, 0], [100.0, 1.0, 1.0, 1.0, 1.0, 1.0])
    assert eccentricity_hat(g, 0, 2) == 101.0
    assert eccentricity_hat(g, 0, 3) == 5.0
