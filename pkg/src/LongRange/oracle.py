"""
Brute-force reference implementations used to validate the fast paths.

Everything here is dense or networkx based and refuses inputs above fixed size caps.
"""
import networkx as nx
import numpy as np
import torch

from .errors import DomainError, InputError

ECCENTRICITY_LIMIT = 1000
DIAMETER_LIMIT = 2000
DENSE_LIMIT = 500
JACOBIAN_LIMIT = 20000


def _check_size(n, limit, what):
    if n > limit:
        raise DomainError(f"{what} is limited to {limit} nodes, got {n}")


def to_networkx(g, weighted=True):
    """Copy a Graph into a networkx.Graph (weights under "weight")."""
    graph = nx.Graph()
    graph.add_nodes_from(range(g.n_nodes))
    u, v, w = g.edge_list()
    if weighted:
        graph.add_weighted_edges_from(zip(u.tolist(), v.tolist(), w.tolist()))
    else:
        graph.add_edges_from(zip(u.tolist(), v.tolist()))
    return graph


def shortest_path_lengths(g, source, weighted=True):
    """Single-source shortest path lengths; np.inf for unreachable nodes."""
    graph = to_networkx(g, weighted)
    if weighted:
        lengths = nx.single_source_dijkstra_path_length(graph, source)
    else:
        lengths = nx.single_source_shortest_path_length(graph, source)
    out = np.full(g.n_nodes, np.inf)
    for node, d in lengths.items():
        out[node] = d
    return out


def exact_eccentricity(g, weighted=True):
    """
    Eccentricity of every node from all-pairs shortest paths.

    Returns:
    - np.ndarray: largest finite distance from each node.
    """
    _check_size(g.n_nodes, ECCENTRICITY_LIMIT, "Exact eccentricity")
    graph = to_networkx(g, weighted)
    if weighted:
        pairs = nx.all_pairs_dijkstra_path_length(graph)
    else:
        pairs = nx.all_pairs_shortest_path_length(graph)
    out = np.zeros(g.n_nodes)
    for node, lengths in pairs:
        out[node] = max(lengths.values())
    return out


def exact_diameter(g):
    """Unweighted diameter from all-pairs BFS."""
    _check_size(g.n_nodes, DIAMETER_LIMIT, "Exact diameter")
    graph = to_networkx(g, weighted=False)
    if not nx.is_connected(graph):
        raise InputError("Diameter is undefined on a disconnected graph")
    return int(nx.diameter(graph))


def triangle_statistics(g):
    """
    Average clustering (zeros included) and transitivity from networkx.

    Returns:
    - tuple(float, float)
    """
    _check_size(g.n_nodes, DIAMETER_LIMIT, "Triangle statistics")
    graph = to_networkx(g, weighted=False)
    return float(nx.average_clustering(graph)), float(nx.transitivity(graph))


def dense_operator(g, kind="S_tilde", gamma=1.0):
    """
    Dense S_adj, S_tilde or L_sym assembled entry by entry.
    """
    _check_size(g.n_nodes, DENSE_LIMIT, "Dense operator")
    n = g.n_nodes
    a = np.zeros((n, n))
    u, v, _ = g.edge_list()
    a[u, v] = 1.0
    a[v, u] = 1.0
    if kind == "S_tilde":
        a = a + gamma * np.eye(n)
    elif kind not in ("S_adj", "L_sym"):
        raise InputError(f"Unknown operator kind {kind!r}")
    d = a.sum(axis=1)
    scale = np.array([1.0 / np.sqrt(x) if x > 0 else 0.0 for x in d])
    m = scale[:, None] * a * scale[None, :]
    return np.eye(n) - m if kind == "L_sym" else m


def dense_eigs(m, tol=1e-12):
    """
    Full symmetric eigendecomposition.

    Parameters:
    - m (np.ndarray): Symmetric matrix.
    - tol (float): Symmetry tolerance.

    Returns:
    - tuple(np.ndarray, np.ndarray): ascending eigenvalues and orthonormal eigenvectors (columns).
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"Expected a square matrix, got shape {m.shape}")
    _check_size(m.shape[0], DENSE_LIMIT, "Dense eigensolver")
    if np.max(np.abs(m - m.T), initial=0.0) > tol:
        raise InputError("Matrix is not symmetric")
    values, vectors = np.linalg.eigh(m)
    return values, vectors


def finite_diff_jacobian(model, batch, v, step=1e-5):
    """
    Central-difference Jacobian of the logits of seed v with respect to the batch features.

    Parameters:
    - model (GraphModel): fp64 model.
    - batch (EgoBatch): Batch containing v as a seed.
    - v (int): Global id of the seed.
    - step (float): Perturbation, in [1e-7, 1e-3].

    Returns:
    - np.ndarray: classes x n_local x features.
    """
    if not 1e-7 <= step <= 1e-3:
        raise InputError(f"step must be in [1e-7, 1e-3], got {step}")
    matches = np.flatnonzero(batch.seeds == v)
    if len(matches) == 0:
        raise InputError(f"Node {v} is not a seed of the batch")
    row = int(batch.seed_index[matches[0]])
    x0 = torch.as_tensor(batch.features, dtype=torch.float64).clone()
    n_local, width = x0.shape
    if n_local * width > JACOBIAN_LIMIT:
        raise DomainError(f"Finite differences are limited to {JACOBIAN_LIMIT} input entries")
    propagation = None if model.architecture == "mlp" else batch.propagation(model.gamma)

    model.eval()
    jacobian = None
    with torch.no_grad():
        for u in range(n_local):
            for j in range(width):
                plus, minus = x0.clone(), x0.clone()
                plus[u, j] += step
                minus[u, j] -= step
                delta = (model(plus, propagation)[row] - model(minus, propagation)[row]) / (2 * step)
                if jacobian is None:
                    jacobian = np.zeros((delta.shape[0], n_local, width))
                jacobian[:, u, j] = delta.numpy()
    return jacobian
