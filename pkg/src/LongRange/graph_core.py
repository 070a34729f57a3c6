import numpy as np
import scipy.sparse as sp
from dataclasses import dataclass
from scipy.sparse import csgraph

from .errors import InputError


class Graph:
    """
    Immutable undirected weighted graph stored in compressed-sparse-row layout.

    Every undirected edge is stored twice (u->v and v->u) with the same weight.
    Neighbor lists are sorted by node id and node ids are dense 0..n-1.
    """
    def __init__(self, adjacency, coords=None) -> None:
        """
        Initialize the Graph from a symmetric sparse adjacency matrix.

        Parameters:
        - adjacency (scipy.sparse matrix): n x n symmetric matrix of edge weights (meters).
        - coords (np.ndarray | None): n x 2 array of (longitude, latitude) per node.

        Raises:
        - InputError: If the matrix is not square or symmetric, has self-loops or negative weights.
        """
        adj = sp.csr_matrix(adjacency, dtype=np.float64)
        if adj.shape[0] != adj.shape[1]:
            raise InputError(f"Adjacency must be square, got shape {adj.shape}")
        adj.sum_duplicates()
        adj.sort_indices()
        if _has_stored_diagonal(adj):
            raise InputError("Stored graph must not contain self-loops")
        if adj.nnz and adj.data.min() < 0:
            raise InputError("Edge weights must be nonnegative")
        if (adj != adj.T).nnz:
            raise InputError("Adjacency must be symmetric with equal weights in both directions")

        if coords is not None:
            coords = np.array(coords, dtype=np.float64)
            if coords.shape != (adj.shape[0], 2):
                raise InputError(f"Coordinates must have shape ({adj.shape[0]}, 2), got {coords.shape}")
            coords.flags.writeable = False

        for array in (adj.data, adj.indices, adj.indptr):
            array.flags.writeable = False
        self._adjacency = adj
        self._coords = coords
        self._degrees = np.diff(adj.indptr)
        self._degrees.flags.writeable = False

    @classmethod
    def from_edges(cls, n_nodes, u, v, weight=None, coords=None):
        """
        Build a Graph from an undirected edge list (each edge listed once).

        Parameters:
        - n_nodes (int): Number of nodes.
        - u, v (array-like[int]): Edge endpoints.
        - weight (array-like[float] | None): Edge weights; unit weights when omitted.
        - coords (np.ndarray | None): Node coordinates.

        Returns:
        - Graph
        """
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        w = np.ones(len(u)) if weight is None else np.asarray(weight, dtype=np.float64)
        if len(u) != len(v) or len(u) != len(w):
            raise InputError("Edge arrays must have equal length")
        if len(u) and (min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= n_nodes):
            raise InputError("Edge endpoint out of range")
        if np.any(u == v):
            raise InputError("Stored graph must not contain self-loops")
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        if len(np.unique(lo * n_nodes + hi)) != len(lo):
            raise InputError("Duplicate edges must be merged before building a Graph")
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        data = np.concatenate([w, w])
        adjacency = sp.coo_matrix((data, (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()
        return cls(adjacency, coords)

    def __repr__(self):
        return f"Graph(n_nodes={self.n_nodes}, n_edges={self.n_edges})"

    @property
    def adjacency(self):
        return self._adjacency

    @property
    def n_nodes(self):
        return self._adjacency.shape[0]

    @property
    def n_edges(self):
        return self._adjacency.nnz // 2

    @property
    def offsets(self):
        return self._adjacency.indptr

    @property
    def neighbors(self):
        return self._adjacency.indices

    @property
    def edge_weight(self):
        return self._adjacency.data

    @property
    def coords(self):
        return self._coords

    @property
    def degrees(self):
        return self._degrees

    def neighbors_of(self, v):
        """Return the sorted neighbor ids of node v."""
        self._check_node(v)
        return self.neighbors[self.offsets[v]:self.offsets[v + 1]]

    def edge_list(self):
        """
        List every undirected edge once.

        Returns:
        - tuple(np.ndarray, np.ndarray, np.ndarray): (u, v, weight) with u < v, sorted by (u, v).
        """
        upper = sp.triu(self._adjacency, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        return upper.row[order].astype(np.int64), upper.col[order].astype(np.int64), upper.data[order]

    def subgraph(self, nodes):
        """
        Induced subgraph on the given node ids, as a CSR matrix in the order of `nodes`.
        """
        nodes = np.asarray(nodes, dtype=np.int64)
        return self._adjacency[nodes][:, nodes].tocsr()

    def _check_node(self, v):
        if not 0 <= int(v) < self.n_nodes:
            raise InputError(f"Node id {v} out of range [0, {self.n_nodes})")


@dataclass(frozen=True)
class HopShell:
    """Nodes at unweighted distance exactly `h` from `center`."""
    center: int
    h: int
    members: np.ndarray


def _has_stored_diagonal(adj):
    rows = np.repeat(np.arange(adj.shape[0]), np.diff(adj.indptr))
    return bool(np.any(rows == adj.indices))


def bfs_hops(g, source, max_h):
    """
    Unweighted hop distance from `source`, truncated at `max_h`.

    Parameters:
    - g (Graph): The graph.
    - source (int): Source node id.
    - max_h (int): Largest hop count to resolve.

    Returns:
    - np.ndarray[float]: hop(u) for every node; np.inf beyond max_h or unreachable.

    Raises:
    - InputError: If the source is out of range or max_h is negative.
    """
    g._check_node(source)
    if max_h < 0:
        raise InputError(f"max_h must be >= 0, got {max_h}")
    return csgraph.dijkstra(g.adjacency, directed=False, indices=int(source),
                            unweighted=True, limit=float(max_h))


def dijkstra_within(g, source, allowed):
    """
    Weighted shortest-path distances from `source` over the subgraph induced by `allowed`.

    Parameters:
    - g (Graph): The graph.
    - source (int): Source node id, must be a member of `allowed`.
    - allowed (array-like[int]): Node ids that paths may use.

    Returns:
    - np.ndarray[float]: Distance per node of g; np.inf outside `allowed` or unreachable inside it.

    Raises:
    - InputError: If the source is not allowed or a weight inside the subgraph is negative.
    """
    g._check_node(source)
    allowed = np.unique(np.asarray(allowed, dtype=np.int64))
    position = np.searchsorted(allowed, source)
    if position >= len(allowed) or allowed[position] != source:
        raise InputError(f"Source {source} is not in the allowed node set")
    sub = g.subgraph(allowed)
    if sub.nnz and sub.data.min() < 0:
        raise InputError("Negative edge weight inside the allowed subgraph")
    local = csgraph.dijkstra(sub, directed=False, indices=int(position))
    distances = np.full(g.n_nodes, np.inf)
    distances[allowed] = local
    return distances


def hop_shell(g, center, h):
    """
    The h-hop shell around `center`.

    Returns:
    - HopShell: members sorted ascending by node id.
    """
    if h < 0:
        raise InputError(f"h must be >= 0, got {h}")
    hops = bfs_hops(g, center, h)
    return HopShell(int(center), int(h), np.flatnonzero(hops == h))


def hop_shells(g, center, max_h):
    """All shells h = 0..max_h around `center` from a single traversal."""
    hops = bfs_hops(g, center, max_h)
    return [HopShell(int(center), h, np.flatnonzero(hops == h)) for h in range(max_h + 1)]


def connected_components(g):
    """
    Label connected components.

    Returns:
    - tuple(int, np.ndarray): number of components and component label per node.
    """
    return csgraph.connected_components(g.adjacency, directed=False)


def is_connected(g):
    return g.n_nodes > 0 and connected_components(g)[0] == 1
