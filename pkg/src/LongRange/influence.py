import logging
import networkx as nx
import numpy as np
import pandas as pd
import torch
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import DomainError, InputError
from .gnn import backward, forward
from .graph_core import Graph, hop_shells
from .sampling import sample_ego

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 2000


@dataclass
class NodeInfluence:
    """Influence I(v, u) of every node u in the H-ball of `center` on its logits."""
    center: int
    nodes: np.ndarray
    hops: np.ndarray
    scores: np.ndarray

    def dense(self, n_nodes):
        out = np.zeros(n_nodes)
        out[self.nodes] = self.scores
        return out


@dataclass
class InfluenceProfile:
    """Average total influence per hop and the influence-weighted receptive field."""
    H_max: int
    T_bar: np.ndarray
    T_bar_normalized: np.ndarray
    R: float
    n_sampled: int
    n_excluded: int
    seed: int

    def to_frame(self):
        return pd.DataFrame({"h": np.arange(self.H_max + 1), "T_bar": self.T_bar,
                             "T_bar_normalized": self.T_bar_normalized})

    def summary(self):
        return {"R": self.R, "H_max": self.H_max, "n_sampled": self.n_sampled,
                "n_excluded": self.n_excluded, "seed": self.seed}


def influence_pair(model, g, X, v, H):
    """
    Jacobian influence of the H-ball nodes on node v.

    One backward sweep per output class i gives dH_vi/dX_uj; the score is
    I(v, u) = sum_i sum_j |dH_vi/dX_uj|. Nodes outside the ball have zero influence.

    Parameters:
    - model (GraphModel): The model.
    - g (Graph): The graph.
    - X (np.ndarray): Global node features.
    - v (int): Target node.
    - H (int): Ball radius.

    Returns:
    - NodeInfluence
    """
    batch = sample_ego(g, [v], H, features=X)
    model.eval()
    logits, tape = forward(model, batch)
    n_classes = logits.shape[1]
    scores = torch.zeros(batch.n_local, dtype=torch.float64)
    for i in range(n_classes):
        selector = torch.zeros_like(logits)
        selector[0, i] = 1.0
        grads = backward(tape, selector, retain=i < n_classes - 1)
        scores += grads.features.abs().sum(dim=1)
    return NodeInfluence(int(v), batch.nodes, batch.hops, scores.detach().numpy())


def total_influence(model, g, X, v, H):
    """
    Influence summed over hop shells: T_h(v) for h = 0..H, with T_0(v) = I(v, v).

    Returns:
    - np.ndarray: length H + 1.
    """
    scores = influence_pair(model, g, X, v, H)
    return np.bincount(scores.hops, weights=scores.scores, minlength=H + 1)


def receptive_field(model, g, X, H, n_samples=DEFAULT_SAMPLES, seed=0, n_jobs=1):
    """
    Average total influence per hop and the receptive field R over sampled nodes.

    R_v = sum_h h T_h(v) / sum_h T_h(v) and R is the mean of R_v. Nodes with zero
    total influence have no R_v; they are left out of R and counted.

    Parameters:
    - model (GraphModel): The model.
    - g (Graph): The graph.
    - X (np.ndarray): Global node features.
    - H (int): Ball radius.
    - n_samples (int): Number of nodes drawn without replacement (capped at n).
    - seed (int): Sampling seed.
    - n_jobs (int): Worker threads.

    Returns:
    - InfluenceProfile
    """
    if n_samples < 1:
        raise InputError(f"n_samples must be >= 1, got {n_samples}")
    # Step 1: Per-hop totals of every sampled node
    sampled = np.random.default_rng(seed).choice(g.n_nodes, min(n_samples, g.n_nodes), replace=False)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            shells = list(pool.map(lambda v: total_influence(model, g, X, v, H), sampled))
    else:
        shells = [total_influence(model, g, X, v, H) for v in sampled]
    T = np.vstack(shells)

    # Step 2: R over nodes with nonzero total influence
    totals = T.sum(axis=1)
    kept = totals > 0
    n_excluded = int((~kept).sum())
    if n_excluded:
        logger.warning(f"{n_excluded} of {len(sampled)} sampled nodes have zero total influence and are left out of R")
    hops = np.arange(H + 1)
    R = float(np.mean(T[kept] @ hops / totals[kept])) if kept.any() else 0.0

    # Step 3: Average decay curve, normalized by the self influence
    T_bar = T.mean(axis=0)
    normalized = T_bar / T_bar[0] if T_bar[0] > 0 else np.zeros_like(T_bar)
    return InfluenceProfile(int(H), T_bar, normalized, R, len(sampled), n_excluded, int(seed))


def influence_dataframe(profiles):
    """
    Long table of normalized decay curves, one block per named profile.

    Parameters:
    - profiles (dict[str, InfluenceProfile])

    Returns:
    - pd.DataFrame: columns name, h, T_bar, T_bar_normalized.
    """
    frames = [profile.to_frame().assign(name=name) for name, profile in profiles.items()]
    if not frames:
        return pd.DataFrame(columns=["name", "h", "T_bar", "T_bar_normalized"])
    return pd.concat(frames, ignore_index=True)[["name", "h", "T_bar", "T_bar_normalized"]]


def _lattice(D_dims, W):
    lattice = nx.convert_node_labels_to_integers(nx.grid_graph(dim=[W] * D_dims), ordering="sorted")
    edges = np.array(sorted(tuple(sorted(e)) for e in lattice.edges()), dtype=np.int64)
    return Graph.from_edges(lattice.number_of_nodes(), edges[:, 0], edges[:, 1])


def dilution_experiment(D_dims=2, W=41, h_range=range(1, 11), epsilon=0.0):
    """
    Shell and ball averages of a hand-made influence field on a D-dimensional lattice.

    Around the lattice center, each shell h holds one distinguished node (its
    smallest id) with influence 1 while every other node carries `epsilon`.
    Sum aggregation keeps the distinguished contribution whole, mean aggregation
    dilutes it by the shell or ball size.

    Parameters:
    - D_dims (int): Lattice dimension, 1 to 3.
    - W (int): Lattice width.
    - h_range (iterable[int]): Shell radii, all >= 1.
    - epsilon (float): Background influence.

    Returns:
    - pd.DataFrame: h, shell_size, I_sum, I_mean, I_mean_h, ball_size, ball_mean, T_h.

    Raises:
    - DomainError: If a shell reaches the lattice boundary.
    """
    if D_dims not in (1, 2, 3):
        raise InputError(f"D_dims must be 1, 2 or 3, got {D_dims}")
    h_range = list(h_range)
    if not h_range or min(h_range) < 1:
        raise InputError("h_range must contain radii >= 1")
    middle = W // 2
    interior = min(middle, W - 1 - middle)
    if max(h_range) > interior:
        raise DomainError(f"Shell h={max(h_range)} is truncated by the boundary of a width-{W} lattice")
    g = _lattice(D_dims, W)
    center = sum(middle * W ** (D_dims - 1 - i) for i in range(D_dims))

    shells = hop_shells(g, center, max(h_range))
    ball_sizes = np.cumsum([len(s.members) for s in shells])
    rows = []
    for h in h_range:
        shell = shells[h].members
        ball_size = int(ball_sizes[h])
        field = np.full(len(shell), epsilon)
        field[0] = 1.0
        i_sum = float(field.sum())
        i_mean = i_sum / len(shell)
        ball_mean = (1.0 + epsilon * (ball_size - 1)) / ball_size
        rows.append({"h": h, "shell_size": len(shell), "I_sum": i_sum, "I_mean": i_mean,
                     "I_mean_h": i_mean * h, "ball_size": ball_size, "ball_mean": ball_mean, "T_h": i_sum})
    return pd.DataFrame(rows)


@dataclass
class CancellationResult:
    points: np.ndarray
    net_derivative: np.ndarray
    abs_sum: np.ndarray


def _derivative(f, x):
    x = torch.tensor(float(x), dtype=torch.float64, requires_grad=True)
    y = f(x)
    if not torch.is_tensor(y) or not y.requires_grad:
        return 0.0
    (grad,) = torch.autograd.grad(y, x, allow_unused=True)
    return 0.0 if grad is None else float(grad)


def cancellation_demo(f, points):
    """
    Two paths k = f + (-f) whose Jacobian contributions cancel.

    The net derivative of k is 0 while the sum of absolute path derivatives is 2|f'(x)|.

    Parameters:
    - f (callable): Differentiable scalar function on torch tensors.
    - points (iterable[float]): Points x.

    Returns:
    - CancellationResult
    """
    points = np.asarray(list(points), dtype=np.float64)
    net, abs_sum = [], []
    for x in points:
        positive = _derivative(f, x)
        negative = _derivative(lambda t: -f(t), x)
        net.append(_derivative(lambda t: f(t) + (-f(t)), x))
        abs_sum.append(abs(positive) + abs(negative))
    return CancellationResult(points, np.asarray(net), np.asarray(abs_sum))
