import pytest
import numpy as np
import networkx as nx
from src.LongRange.errors import InputError
from src.LongRange.graph_core import Graph
from src.LongRange.ingest import gen_grid_city, gen_small_world
from src.LongRange.netstats import clustering, degree_stats, diameter_estimate, node_homophily, stats_report
from src.LongRange.oracle import exact_diameter, triangle_statistics


def from_networkx(graph):
    edges = np.array(sorted(tuple(sorted(e)) for e in graph.edges()), dtype=np.int64)
    return Graph.from_edges(graph.number_of_nodes(), edges[:, 0], edges[:, 1])


@pytest.fixture
def star():
    """
    Fixture to create the star S4: center 0 with three leaves.
    """
    return Graph.from_edges(4, [0, 0, 0], [1, 2, 3])


def test_degree_stats(star):
    """
    Test the degree moments.
    - Checks if the star gives mean 1.5, std 0.8660 and max 3.
    - Checks if a regular graph has zero spread.
    """
    mu, sigma, d_max = degree_stats(star)
    assert mu == pytest.approx(1.5)
    assert sigma == pytest.approx(0.8660, abs=1e-4)
    assert d_max == 3
    assert degree_stats(gen_small_world(30, 4, 0.0))[1] == 0.0
    assert degree_stats(gen_grid_city(64, 64)[0])[2] == 4


def test_clustering_small_graphs():
    """
    Test clustering on graphs with known triangles.
    - Checks if K3 gives 1 for both measures.
    - Checks if K4 minus one edge gives 5/6 and 0.75.
    - Checks if a lattice has no triangles.
    """
    assert clustering(from_networkx(nx.complete_graph(3))) == pytest.approx((1.0, 1.0))
    k4 = nx.complete_graph(4)
    k4.remove_edge(0, 1)
    average, transitivity = clustering(from_networkx(k4))
    assert average == pytest.approx(5 / 6)
    assert transitivity == pytest.approx(0.75)
    assert clustering(gen_grid_city(5, 5)[0]) == (0.0, 0.0)


def test_clustering_matches_networkx():
    """
    Test clustering against the networkx reference on a rewired ring.
    """
    g = gen_small_world(120, 6, 0.2, seed=3)
    assert clustering(g) == pytest.approx(triangle_statistics(g), abs=1e-12)


def test_diameter_estimate_on_grid():
    """
    Test the extremal-coordinate estimate.
    - Checks if the 5x5 grid gives 4 while the true diameter is 8.
    """
    g, _ = gen_grid_city(5, 5)
    assert diameter_estimate(g) == 4
    assert exact_diameter(g) == 8


def test_diameter_estimate_on_path():
    """
    Test that a path laid out on a line gives the exact diameter.
    """
    coords = np.column_stack([np.arange(6), np.zeros(6)])
    g = Graph.from_edges(6, np.arange(5), np.arange(1, 6), coords=coords)
    assert diameter_estimate(g) == 5


def test_double_sweep_lower_bound():
    """
    Test the fallback without coordinates.
    - Checks if the double sweep never exceeds the exact diameter.
    - Checks if a disconnected graph is refused.
    """
    for seed in range(5):
        g = gen_small_world(150, 4, 0.1, seed=seed)
        assert 0 < diameter_estimate(g) <= exact_diameter(g)
    with pytest.raises(InputError):
        diameter_estimate(Graph.from_edges(4, [0, 2], [1, 3]))


def test_node_homophily():
    """
    Test node homophily.
    - Checks if P4 with labels [0, 0, 1, 1] gives 0.75.
    - Checks if uniform labels give 1 and a proper 2-coloring gives 0.
    """
    p4 = Graph.from_edges(4, [0, 1, 2], [1, 2, 3])
    assert node_homophily(p4, [0, 0, 1, 1]) == pytest.approx(0.75)
    assert node_homophily(p4, [3, 3, 3, 3]) == 1.0
    assert node_homophily(p4, [0, 1, 0, 1]) == 0.0
    with pytest.raises(InputError):
        node_homophily(p4, [0, 1])


def test_stats_report(star):
    """
    Test the assembled report.
    - Checks if the fields are filled and homophily is omitted without labels.
    - Checks if the table row starts with the graph name.
    """
    report = stats_report(star)
    assert report.n_nodes == 4 and report.n_edges == 3
    assert report.node_homophily is None
    assert report.diameter_estimate == 2
    assert report.table_row("star").startswith("star")
    assert stats_report(star, [0, 1, 1, 1]).node_homophily == pytest.approx(0.0)
