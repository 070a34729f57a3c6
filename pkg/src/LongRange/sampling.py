import numpy as np
import scipy.sparse as sp
import torch
from dataclasses import dataclass, field

from .errors import InputError


@dataclass
class EgoBatch:
    """
    H-hop ego networks of a set of seed nodes, one disjoint block per seed.

    Block k occupies local rows `offsets[k]:offsets[k + 1]` and holds the nodes of
    `seeds[k]`'s own ball in ascending global order. The adjacency is block
    diagonal, so no message crosses from one ego network into another and a seed
    only ever sees its own H hops, whatever the model depth. A node shared by two
    balls appears once per block. `nodes[i]` is the global id of local row i,
    `hops[i]` its hop count from the block's seed and `seed_index[k]` the local
    row of `seeds[k]`.
    """
    seeds: np.ndarray
    nodes: np.ndarray
    adjacency: sp.csr_matrix
    hops: np.ndarray
    seed_index: np.ndarray
    offsets: np.ndarray
    H: int
    features: np.ndarray = None
    _propagation: dict = field(default_factory=dict, repr=False)

    @property
    def n_local(self):
        return len(self.nodes)

    @property
    def n_blocks(self):
        return len(self.seeds)

    def block(self, k):
        """Local rows of the ego network of `seeds[k]`."""
        return np.arange(self.offsets[k], self.offsets[k + 1])

    def local(self, global_ids, block=0):
        """Local rows of global node ids inside one ego network."""
        global_ids = np.asarray(global_ids, dtype=np.int64)
        start, stop = self.offsets[block], self.offsets[block + 1]
        members = self.nodes[start:stop]
        position = np.searchsorted(members, global_ids)
        if np.any(position >= len(members)) or np.any(members[np.minimum(position, len(members) - 1)] != global_ids):
            raise InputError(f"Node is not part of the ego network of seed {self.seeds[block]}")
        return start + position

    def feature_tensor(self, dtype=torch.float64):
        if self.features is None:
            raise InputError("Batch was sampled without features")
        return torch.as_tensor(self.features, dtype=dtype)

    def propagation(self, gamma=1.0):
        """
        Sparse (gI+D)^-1/2 (gI+A) (gI+D)^-1/2 over the batch as a torch COO tensor.

        Degrees are those of the ego subgraphs. Cached per gamma.
        """
        if gamma not in self._propagation:
            pattern = self.adjacency.copy()
            pattern.data = np.ones_like(pattern.data)
            n = self.n_local
            looped = (pattern + gamma * sp.identity(n, format="csr")).tocoo()
            degree = np.asarray(looped.sum(axis=1)).ravel()
            values = looped.data / np.sqrt(degree[looped.row] * degree[looped.col])
            index = torch.as_tensor(np.vstack([looped.row, looped.col]), dtype=torch.long)
            self._propagation[gamma] = torch.sparse_coo_tensor(
                index, torch.as_tensor(values, dtype=torch.float64), (n, n)).coalesce()
        return self._propagation[gamma]


def _grow(g, seed, H, cap_per_hop, rng):
    visited = {int(seed): 0}
    frontier = np.array([seed], dtype=np.int64)
    for h in range(1, H + 1):
        if len(frontier) == 0:
            break
        candidates = np.unique(g.adjacency[frontier].indices)
        candidates = np.array([c for c in candidates if c not in visited], dtype=np.int64)
        if cap_per_hop is not None and len(candidates) > cap_per_hop:
            candidates = np.sort(rng.choice(candidates, cap_per_hop, replace=False))
        for c in candidates:
            visited[int(c)] = h
        frontier = candidates
    return visited


def sample_ego(g, seeds, H, cap_per_hop=None, seed=0, features=None):
    """
    Grow an H-hop ego network around every seed and stack them into one batch.

    Each seed expands breadth first. When more than `cap_per_hop` new nodes are
    discovered at a hop, a uniform subset of that size is kept (without
    replacement) and only the kept nodes are expanded further. The ego networks
    are kept apart as diagonal blocks of the batch adjacency.

    Parameters:
    - g (Graph): The graph.
    - seeds (array-like[int]): Seed node ids.
    - H (int): Hop radius, >= 1.
    - cap_per_hop (int | None): Per-hop cap; None samples exhaustively.
    - seed (int): Sampling seed.
    - features (np.ndarray | None): Global feature matrix, gathered per block.

    Returns:
    - EgoBatch
    """
    if H < 1:
        raise InputError(f"H must be >= 1, got {H}")
    if cap_per_hop is not None and cap_per_hop < 1:
        raise InputError(f"cap_per_hop must be >= 1, got {cap_per_hop}")
    seeds = np.asarray(seeds, dtype=np.int64)
    if len(seeds) == 0:
        raise InputError("At least one seed is required")
    for s in seeds:
        g._check_node(s)

    rng = np.random.default_rng(seed)
    members, hop_counts, blocks, seed_rows = [], [], [], []
    start = 0
    for s in seeds:
        ball = _grow(g, s, H, cap_per_hop, rng)
        nodes = np.fromiter(ball.keys(), dtype=np.int64, count=len(ball))
        hops = np.fromiter(ball.values(), dtype=np.int64, count=len(ball))
        order = np.argsort(nodes)
        nodes, hops = nodes[order], hops[order]
        members.append(nodes)
        hop_counts.append(hops)
        blocks.append(g.subgraph(nodes))
        seed_rows.append(start + int(np.searchsorted(nodes, s)))
        start += len(nodes)

    nodes = np.concatenate(members)
    offsets = np.concatenate([[0], np.cumsum([len(m) for m in members])]).astype(np.int64)
    return EgoBatch(seeds=seeds, nodes=nodes, adjacency=sp.block_diag(blocks, format="csr"),
                    hops=np.concatenate(hop_counts), seed_index=np.asarray(seed_rows, dtype=np.int64),
                    offsets=offsets, H=int(H),
                    features=None if features is None else np.asarray(features)[nodes])
