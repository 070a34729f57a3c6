import logging
import math
import numpy as np
import scipy.sparse as sp
from dataclasses import dataclass, field

from .errors import DomainError, InputError
from .netstats import diameter_estimate

logger = logging.getLogger(__name__)

OPERATOR_KINDS = ("S_adj", "S_tilde", "L_sym")
DENSE_LIMIT = 500
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000

# (d_max, diameter estimate, published bound) of the reference graphs.
PUBLISHED_GRAPHS = {
    "Paris": (15, 121, 0.4741),
    "Shanghai": (8, 123, 0.6344),
    "L.A.": (9, 171, 0.6095),
    "London": (10, 404, 0.5921),
    "PascalVOC": (10, 28, 0.4857),
    "COCO": (10, 27, 0.4815),
    "Cora": (168, 19, 0.0324),
    "CiteSeer": (99, 28, 0.1143),
    "ogbn-arxiv": (13000, 25, -0.0640),
}


@dataclass(frozen=True)
class NormalizedOperator:
    """
    Sparse symmetric normalized operator over a graph's (unweighted) adjacency.

    `top_vector` is the closed-form unit eigenvector of eigenvalue 1 for
    S_adj / S_tilde (eigenvalue 0 for L_sym): entries proportional to
    sqrt(deg + gamma), with gamma = 0 for S_adj and L_sym.
    """
    kind: str
    gamma: float
    matrix: sp.csr_matrix
    top_vector: np.ndarray

    @property
    def n(self):
        return self.matrix.shape[0]


@dataclass
class EigenEstimate:
    value: float
    vector: np.ndarray
    residual: float
    iterations: int
    converged: bool


@dataclass
class VerificationResult:
    passed: bool
    value: float


@dataclass
class SpectralReport:
    """Eigenvalue estimates of S_tilde, the lower bound on lambda_{N-1} and the decay curve."""
    gamma: float
    d_max: int
    diameter: int
    lambda_N: EigenEstimate
    lambda_N_minus_1: EigenEstimate
    lambda_1: EigenEstimate
    bound_value: float = None
    decay_curve: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_dict(self):
        def estimate(e):
            return {"value": e.value, "residual": e.residual, "iterations": e.iterations, "converged": e.converged}
        return {"gamma": self.gamma, "d_max": self.d_max, "diameter_estimate": self.diameter,
                "lambda_N": estimate(self.lambda_N), "lambda_N_minus_1": estimate(self.lambda_N_minus_1),
                "lambda_1": estimate(self.lambda_1), "bound_value": self.bound_value,
                "decay_curve": [float(x) for x in self.decay_curve]}


def normalized_operator(g, kind="S_tilde", gamma=1.0):
    """
    Build S_adj = D^-1/2 A D^-1/2, S_tilde = (gI+D)^-1/2 (gI+A) (gI+D)^-1/2 or L_sym = I - S_adj.

    Parameters:
    - g (Graph): The graph; edge weights are ignored.
    - kind (str): "S_adj", "S_tilde" or "L_sym".
    - gamma (float): Self-loop weight for S_tilde, > 0.

    Returns:
    - NormalizedOperator
    """
    if kind not in OPERATOR_KINDS:
        raise InputError(f"Unknown operator kind {kind!r}; expected one of {OPERATOR_KINDS}")
    a = g.adjacency.copy()
    a.data = np.ones_like(a.data)
    n = g.n_nodes
    degrees = g.degrees.astype(np.float64)
    if kind == "S_tilde":
        if gamma <= 0:
            raise DomainError(f"gamma must be > 0, got {gamma}")
        a = a + gamma * sp.identity(n, format="csr")
        degrees = degrees + gamma
    else:
        gamma = 0.0
    inv_sqrt = np.divide(1.0, np.sqrt(degrees), out=np.zeros(n), where=degrees > 0)
    scale = sp.diags(inv_sqrt)
    matrix = (scale @ a @ scale).tocsr()
    if kind == "L_sym":
        matrix = (sp.identity(n, format="csr") - matrix).tocsr()
    top = np.sqrt(degrees)
    top = top / np.linalg.norm(top)
    return NormalizedOperator(kind, float(gamma), matrix, top)


def apply(op, x):
    """
    Matrix-free product op @ x for a vector or an n x k block.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != op.n:
        raise InputError(f"Dimension mismatch: operator has {op.n} rows, input has {x.shape[0]}")
    return op.matrix @ x


def bound_lambda(d_max, diam):
    """
    Lower bound on the second largest eigenvalue of S_tilde (gamma = 1).

    2 sqrt(d-1)/d - (2/diam) (1 + 2 sqrt(d-1)/d)

    Raises:
    - DomainError: If d_max < 2 or diam < 4.
    """
    if d_max < 2:
        raise DomainError(f"d_max must be >= 2, got {d_max}")
    if diam < 4:
        raise DomainError(f"The bound requires diam >= 4, got {diam}")
    ramanujan = 2.0 * math.sqrt(d_max - 1) / d_max
    return ramanujan - (2.0 / diam) * (1.0 + ramanujan)


def _start_vector(n, seed):
    return np.random.default_rng(seed).standard_normal(n)


def _orthogonalize(x, basis):
    for b in basis:
        x = x - (b @ x) * b
    return x


def _power_iteration(matvec, n, basis, shift, tol, max_iter, seed):
    """
    Largest eigenpair of (op + shift*I) restricted to the complement of `basis`.

    The returned value is in terms of op. Convergence is declared when the
    Rayleigh residual ||op x - lambda x|| drops below tol.
    """
    x = _orthogonalize(_start_vector(n, seed), basis)
    x /= np.linalg.norm(x)
    value, residual = 0.0, np.inf
    for iteration in range(1, max_iter + 1):
        y = matvec(x)
        value = float(x @ y)
        residual = float(np.linalg.norm(y - value * x))
        if residual <= tol:
            return EigenEstimate(value, x, residual, iteration, True)
        y = _orthogonalize(y + shift * x, basis)
        norm = np.linalg.norm(y)
        if norm == 0:
            return EigenEstimate(value, x, residual, iteration, residual <= tol)
        x = y / norm
    logger.warning(f"Power iteration did not converge in {max_iter} iterations, best residual {residual:.3e}")
    return EigenEstimate(value, x, residual, max_iter, False)


def top_eigs(op, k=2, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, seed=0):
    """
    Largest k eigenpairs by deflated power iteration.

    For S_adj and S_tilde the top pair is taken from the closed form and
    reported as exactly 1 when its residual passes tol; the following pairs are
    found by power iteration on op + I (spectrum shifted into [0, 2]) deflated
    against every earlier vector.

    Returns:
    - list[EigenEstimate]: descending by eigenvalue.
    """
    if k < 1 or k > op.n:
        raise InputError(f"k must be in [1, {op.n}], got {k}")
    matvec = op.matrix.dot
    found = []
    if op.kind in ("S_adj", "S_tilde"):
        u = op.top_vector
        residual = float(np.linalg.norm(matvec(u) - u))
        if residual <= tol:
            found.append(EigenEstimate(1.0, u, residual, 0, True))
    shift = 1.0 if op.kind != "L_sym" else 0.0
    while len(found) < k:
        basis = [e.vector for e in found]
        found.append(_power_iteration(matvec, op.n, basis, shift, tol, max_iter, seed))
    return found


def bottom_eig(op, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, seed=0):
    """Most negative eigenvalue lambda_1 of S_adj / S_tilde via power iteration on I - op."""
    if op.kind == "L_sym":
        raise InputError("bottom_eig is defined for S_adj and S_tilde")
    estimate = _power_iteration(lambda x: -op.matrix.dot(x), op.n, [], 1.0, tol, max_iter, seed)
    estimate.value = -estimate.value
    return estimate


def _check_dense_size(g):
    if g.n_nodes > DENSE_LIMIT:
        raise DomainError(f"Dense eigensolver is limited to {DENSE_LIMIT} nodes, got {g.n_nodes}")


def verify_complementarity(g, tol=DEFAULT_TOL):
    """
    Check lambda_{N+1-i}(S_adj) = 1 - lambda_i(L_sym) for every i.

    Returns:
    - VerificationResult: pass flag and maximum deviation.
    """
    _check_dense_size(g)
    s = np.linalg.eigvalsh(normalized_operator(g, "S_adj").matrix.toarray())
    lap = np.linalg.eigvalsh(normalized_operator(g, "L_sym").matrix.toarray())
    deviation = float(np.max(np.abs(s[::-1] - (1.0 - lap))))
    return VerificationResult(deviation < tol, deviation)


def verify_selfloop_shift(g, gamma=1.0, tol=0.0):
    """
    Check that self-loops raise the second largest eigenvalue:
    lambda_{N-1}(S_tilde with gamma) > lambda_{N-1}(S_adj).

    Returns:
    - VerificationResult: pass flag and the gap.
    """
    _check_dense_size(g)
    if g.n_nodes < 2:
        raise InputError("Need at least two nodes")
    with_loops = np.linalg.eigvalsh(normalized_operator(g, "S_tilde", gamma).matrix.toarray())
    plain = np.linalg.eigvalsh(normalized_operator(g, "S_adj").matrix.toarray())
    gap = float(with_loops[-2] - plain[-2])
    return VerificationResult(gap > tol, gap)


def oversmoothing_decay(g, L, gamma=1.0, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, seed=0):
    """
    Distance of S_tilde^l from its rank-one limit for l = 1..L.

    curve(l) = ||(I - u u^T) S_tilde^l||_2, estimated per l by power iteration
    on the deflated power, warm-started from the previous l.

    Returns:
    - np.ndarray: curve of length L.
    """
    if L < 1:
        raise InputError(f"L must be >= 1, got {L}")
    op = normalized_operator(g, "S_tilde", gamma)
    u = op.top_vector
    curve = np.zeros(L)
    x = _orthogonalize(_start_vector(op.n, seed), [u])
    for l in range(1, L + 1):
        x = x / np.linalg.norm(x)
        estimate = 0.0
        for _ in range(max_iter):
            y = _orthogonalize(propagate(op, x, l), [u])
            new_estimate = float(np.linalg.norm(y))
            if new_estimate == 0.0:
                estimate = 0.0
                break
            converged = abs(new_estimate - estimate) <= tol * max(new_estimate, 1.0)
            estimate, x = new_estimate, y / new_estimate
            if converged:
                break
        else:
            logger.warning(f"Decay estimate at l={l} did not converge in {max_iter} iterations")
        curve[l - 1] = estimate
        if estimate == 0.0:
            break
    return curve


def propagate(op, X, L):
    """Apply the operator L times: op^L X."""
    out = np.asarray(X, dtype=np.float64)
    for _ in range(L):
        out = apply(op, out)
    return out


def limit_projection(op, X):
    """Rank-one limit u (u^T X) of repeated propagation."""
    u = op.top_vector
    X = np.asarray(X, dtype=np.float64)
    return np.multiply.outer(u, u @ X)


def spectral_report(g, gamma=1.0, L=50, diam=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, seed=0):
    """
    Estimate lambda_N, lambda_{N-1}, lambda_1 of S_tilde, evaluate the bound and the decay curve.

    Parameters:
    - g (Graph): Connected graph.
    - gamma (float): Self-loop weight.
    - L (int): Length of the decay curve, 0 to skip it.
    - diam (int | None): Diameter used by the bound; defaults to the coordinate estimate.

    Returns:
    - SpectralReport
    """
    op = normalized_operator(g, "S_tilde", gamma)
    top, second = top_eigs(op, 2, tol, max_iter, seed)
    lowest = bottom_eig(op, tol, max_iter, seed)
    d_max = int(g.degrees.max())
    diam = diameter_estimate(g) if diam is None else int(diam)
    bound = bound_lambda(d_max, diam) if d_max >= 2 and diam >= 4 else None
    if bound is None:
        logger.info(f"Bound not applicable for d_max={d_max}, diam={diam}")
    curve = oversmoothing_decay(g, L, gamma, tol, max_iter, seed) if L > 0 else np.zeros(0)
    return SpectralReport(float(gamma), d_max, diam, top, second, lowest, bound, curve)
