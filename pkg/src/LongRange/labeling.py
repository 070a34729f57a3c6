import logging
import numpy as np
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import InputError
from .graph_core import bfs_hops, dijkstra_within

logger = logging.getLogger(__name__)

DEFAULT_HOPS = 16
DEFAULT_QUANTILES = 10


@dataclass
class EccentricityResult:
    """Per-node eccentricity estimates (meters) and their quantile class."""
    epsilon_hat: np.ndarray
    labels: np.ndarray
    hop_bound: int = DEFAULT_HOPS
    n_classes: int = DEFAULT_QUANTILES


def eccentricity_hat(g, v, H=DEFAULT_HOPS):
    """
    Hop-bounded weighted eccentricity of node v.

    Distances are computed inside the subgraph induced by the H-hop ball around
    v, so paths may not leave the ball and can exceed true graph distances.

    Parameters:
    - g (Graph): The graph.
    - v (int): Node id.
    - H (int): Hop bound, >= 1.

    Returns:
    - float: Largest finite weighted distance from v inside its ball.
    """
    if H < 1:
        raise InputError(f"Hop bound must be >= 1, got {H}")
    ball = np.flatnonzero(np.isfinite(bfs_hops(g, v, H)))
    distances = dijkstra_within(g, v, ball)
    return float(distances[ball].max())


def quantile_labels(values, q=DEFAULT_QUANTILES):
    """
    Rank-based quantile classes.

    Nodes are sorted by (value, node id) and node of rank r gets floor(r*q/n).
    """
    if q < 2:
        raise InputError(f"Number of quantiles must be >= 2, got {q}")
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    order = np.lexsort((np.arange(n), values))
    labels = np.empty(n, dtype=np.int64)
    labels[order] = np.arange(n) * q // n
    return labels


def label_all(g, H=DEFAULT_HOPS, q=DEFAULT_QUANTILES, n_jobs=1):
    """
    Estimate eccentricity for every node and bin the estimates into q classes.

    Parameters:
    - g (Graph): Connected graph.
    - H (int): Hop bound.
    - q (int): Number of classes.
    - n_jobs (int): Worker threads for the per-node estimates.

    Returns:
    - EccentricityResult
    """
    if q < 2:
        raise InputError(f"Number of quantiles must be >= 2, got {q}")
    nodes = range(g.n_nodes)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            estimates = list(pool.map(lambda v: eccentricity_hat(g, v, H), nodes, chunksize=64))
    else:
        estimates = [eccentricity_hat(g, v, H) for v in nodes]
    epsilon_hat = np.asarray(estimates, dtype=np.float64)
    labels = quantile_labels(epsilon_hat, q)
    logger.info(f"Labeled {g.n_nodes} nodes with H={H}, q={q}; "
                f"eccentricity range [{epsilon_hat.min():.2f}, {epsilon_hat.max():.2f}]")
    return EccentricityResult(epsilon_hat, labels, H, q)
