import logging
import numpy as np
from dataclasses import asdict, dataclass
from scipy.sparse import csgraph

from .errors import InputError

logger = logging.getLogger(__name__)


@dataclass
class NetStatsReport:
    """Summary statistics of one graph."""
    n_nodes: int
    n_edges: int
    avg_degree: float
    std_degree: float
    max_degree: int
    avg_clustering: float
    transitivity: float
    diameter_estimate: int
    node_homophily: float = None

    def to_dict(self):
        return asdict(self)

    def table_row(self, name="graph"):
        """One formatted row: name, |V|, |E|, mu_k, sigma_k, d_max, C, transitivity, D_hat, homophily."""
        homophily = "-" if self.node_homophily is None else f"{self.node_homophily:.4f}"
        return (f"{name:<12} {self.n_nodes:>9d} {self.n_edges:>9d} {self.avg_degree:>7.3f} "
                f"{self.std_degree:>7.3f} {self.max_degree:>6d} {self.avg_clustering:>7.4f} "
                f"{self.transitivity:>7.4f} {self.diameter_estimate:>6d} {homophily:>8}")


def _pattern(g):
    a = g.adjacency.copy()
    a.data = np.ones_like(a.data)
    return a


def degree_stats(g):
    """
    Degree moments.

    Returns:
    - tuple(float, float, int): mean, population standard deviation, maximum.
    """
    degrees = g.degrees.astype(np.float64)
    if degrees.size == 0:
        return 0.0, 0.0, 0
    return float(degrees.mean()), float(degrees.std()), int(degrees.max())


def clustering(g):
    """
    Average local clustering and transitivity.

    C_v = 2 T_v / (deg (deg - 1)) with C_v = 0 for deg < 2; transitivity is
    3 x triangles over unordered connected triples.

    Returns:
    - tuple(float, float): (average clustering, transitivity)
    """
    a = _pattern(g)
    triangles = np.asarray((a @ a).multiply(a).sum(axis=1)).ravel() / 2.0
    degrees = g.degrees.astype(np.float64)
    pairs = degrees * (degrees - 1) / 2.0
    local = np.divide(triangles, pairs, out=np.zeros_like(triangles), where=pairs > 0)
    triples = pairs.sum()
    transitivity = float(triangles.sum() / triples) if triples > 0 else 0.0
    return float(local.mean()) if g.n_nodes else 0.0, transitivity


def _hop_distance(g, source, target):
    hops = csgraph.dijkstra(g.adjacency, directed=False, indices=int(source), unweighted=True)
    if not np.isfinite(hops[target]):
        raise InputError(f"Nodes {source} and {target} are disconnected")
    return int(hops[target])


def _double_sweep(g):
    first = csgraph.dijkstra(g.adjacency, directed=False, indices=0, unweighted=True)
    if not np.all(np.isfinite(first)):
        raise InputError("Diameter is undefined on a disconnected graph")
    far = int(np.argmax(first))
    second = csgraph.dijkstra(g.adjacency, directed=False, indices=far, unweighted=True)
    return int(second.max())


def diameter_estimate(g):
    """
    Lower estimate of the unweighted diameter.

    With coordinates, the hop distances between the two latitude-extremal and
    the two longitude-extremal nodes are taken (ties go to the smallest id).
    Without coordinates, a double-sweep BFS is used.

    Returns:
    - int: estimate, never above the true diameter.
    """
    if g.n_nodes < 2:
        return 0
    if g.coords is None:
        return _double_sweep(g)
    lon, lat = g.coords[:, 0], g.coords[:, 1]
    by_lat = _hop_distance(g, np.argmin(lat), np.argmax(lat))
    by_lon = _hop_distance(g, np.argmin(lon), np.argmax(lon))
    return max(by_lat, by_lon)


def node_homophily(g, labels):
    """
    Mean over nodes of the fraction of neighbors sharing the node's label.

    Nodes without neighbors are left out of the mean.
    """
    labels = np.asarray(labels)
    if len(labels) != g.n_nodes:
        raise InputError(f"Expected {g.n_nodes} labels, got {len(labels)}")
    rows = np.repeat(np.arange(g.n_nodes), g.degrees)
    same = (labels[rows] == labels[g.neighbors]).astype(np.float64)
    agree = np.bincount(rows, weights=same, minlength=g.n_nodes)
    has_neighbors = g.degrees > 0
    if not has_neighbors.any():
        return 0.0
    return float((agree[has_neighbors] / g.degrees[has_neighbors]).mean())


def stats_report(g, labels=None):
    """
    Assemble the full report for one graph.

    Parameters:
    - g (Graph): The graph.
    - labels (array-like | None): Class labels, homophily is omitted without them.

    Returns:
    - NetStatsReport
    """
    mu, sigma, d_max = degree_stats(g)
    avg_clustering, transitivity = clustering(g)
    report = NetStatsReport(
        n_nodes=g.n_nodes, n_edges=g.n_edges, avg_degree=mu, std_degree=sigma, max_degree=d_max,
        avg_clustering=avg_clustering, transitivity=transitivity, diameter_estimate=diameter_estimate(g),
        node_homophily=None if labels is None else node_homophily(g, labels))
    logger.info(f"Computed network statistics for {g}")
    return report
