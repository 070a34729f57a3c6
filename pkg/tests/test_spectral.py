import pytest
import numpy as np
import networkx as nx
from src.LongRange.errors import DomainError, InputError
from src.LongRange.graph_core import Graph
from src.LongRange.ingest import gen_grid_city, gen_small_world
from src.LongRange.oracle import dense_eigs, dense_operator, exact_diameter
from src.LongRange.spectral import (PUBLISHED_GRAPHS, apply, bottom_eig, bound_lambda, limit_projection,
                                    normalized_operator, oversmoothing_decay, propagate, spectral_report,
                                    top_eigs, verify_complementarity, verify_selfloop_shift)


def path(n):
    return Graph.from_edges(n, np.arange(n - 1), np.arange(1, n))


def cycle(n):
    return Graph.from_edges(n, np.arange(n), (np.arange(n) + 1) % n)


@pytest.fixture
def grid8():
    """
    Fixture to create an 8x8 grid city with unit weights.
    """
    return gen_grid_city(8, 8, weight_law="unit", seed=0)[0]


@pytest.mark.parametrize("name", list(PUBLISHED_GRAPHS))
def test_published_bounds(name):
    """
    Test the bound against the published values.
    - Checks if every (d_max, diameter) pair reproduces its value to four decimals.
    """
    d_max, diam, expected = PUBLISHED_GRAPHS[name]
    assert bound_lambda(d_max, diam) == pytest.approx(expected, abs=5e-4)


def test_bound_domain_and_monotonicity():
    """
    Test the domain and monotonicity of the bound.
    - Checks if diam < 4 and d_max < 2 raise DomainError.
    - Checks if the bound decreases in d_max and increases in diam.
    """
    with pytest.raises(DomainError):
        bound_lambda(10, 3)
    with pytest.raises(DomainError):
        bound_lambda(1, 10)
    by_degree = [bound_lambda(d, 30) for d in range(2, 40)]
    assert np.all(np.diff(by_degree) < 0)
    by_diam = [bound_lambda(6, D) for D in range(4, 100)]
    assert np.all(np.diff(by_diam) > 0)


def test_operators_on_small_graphs():
    """
    Test the normalized operators on hand-computed cases.
    - Checks if S_tilde of P2 averages the two nodes.
    - Checks if S_adj of P3 sends e0 to (0, 1/sqrt(2), 0).
    - Checks if L_sym annihilates D^1/2 1.
    """
    p2 = normalized_operator(path(2), "S_tilde", 1.0)
    assert np.allclose(p2.matrix.toarray(), 0.5)
    assert np.allclose(apply(p2, [1.0, 0.0]), [0.5, 0.5])
    p3 = normalized_operator(path(3), "S_adj")
    assert np.allclose(apply(p3, [1.0, 0.0, 0.0]), [0.0, 1 / np.sqrt(2), 0.0])
    g = gen_small_world(40, 4, 0.3, seed=1)
    lap = normalized_operator(g, "L_sym")
    assert np.allclose(apply(lap, np.sqrt(g.degrees)), 0.0, atol=1e-12)


def test_operator_matches_dense(grid8):
    """
    Test the sparse operators against the dense entry-by-entry construction.
    """
    for kind in ("S_adj", "S_tilde", "L_sym"):
        sparse = normalized_operator(grid8, kind, 0.5).matrix.toarray()
        assert np.allclose(sparse, dense_operator(grid8, kind, 0.5), atol=1e-14)


def test_operator_errors():
    """
    Test the validation of the operator parameters.
    """
    with pytest.raises(DomainError):
        normalized_operator(path(3), "S_tilde", 0.0)
    with pytest.raises(InputError):
        normalized_operator(path(3), "S_hat")
    with pytest.raises(InputError):
        apply(normalized_operator(path(3)), np.ones(4))


def test_top_eigs_small():
    """
    Test the top eigenpairs.
    - Checks if P2 with S_tilde has eigenvalues 1 and 0.
    - Checks if C4 with S_adj has top eigenvalues 1 and 0.
    """
    first, second = top_eigs(normalized_operator(path(2), "S_tilde"), 2)
    assert first.value == 1.0
    assert second.value == pytest.approx(0.0, abs=1e-10)
    first, second = top_eigs(normalized_operator(cycle(4), "S_adj"), 2)
    assert first.value == 1.0
    assert second.value == pytest.approx(0.0, abs=1e-10)
    assert second.converged


def test_top_vector_closed_form(grid8):
    """
    Test that the top eigenvector of S_tilde is proportional to sqrt(1 + deg).
    """
    op = normalized_operator(grid8, "S_tilde")
    expected = np.sqrt(1.0 + grid8.degrees)
    assert np.allclose(op.top_vector, expected / np.linalg.norm(expected))
    assert np.allclose(apply(op, op.top_vector), op.top_vector, atol=1e-14)


def test_power_iteration_matches_dense(grid8):
    """
    Test power iteration against the dense eigensolver.
    - Checks if the second largest and the smallest eigenvalue agree to 1e-8.
    """
    op = normalized_operator(grid8, "S_tilde")
    values, _ = dense_eigs(dense_operator(grid8, "S_tilde"))
    _, second = top_eigs(op, 2)
    lowest = bottom_eig(op)
    assert second.value == pytest.approx(values[-2], abs=1e-8)
    assert lowest.value == pytest.approx(values[0], abs=1e-8)
    assert second.converged and lowest.converged


def test_power_iteration_reports_non_convergence(grid8):
    """
    Test that a too small iteration budget is flagged rather than raised.
    """
    _, second = top_eigs(normalized_operator(grid8, "S_tilde"), 2, max_iter=3)
    assert not second.converged
    assert second.iterations == 3
    assert np.isfinite(second.residual)


def test_complementarity():
    """
    Test the complementarity of S_adj and L_sym spectra.
    - Checks if P2, C4 and a random connected graph pass within 1e-10.
    """
    random_graph = next(r for r in (nx.gnp_random_graph(20, 0.3, seed=s) for s in range(100)) if nx.is_connected(r))
    edges = np.array(list(random_graph.edges()))
    graphs = [path(2), cycle(4), Graph.from_edges(20, edges[:, 0], edges[:, 1])]
    for g in graphs:
        result = verify_complementarity(g)
        assert result.passed
        assert result.value < 1e-10


def test_selfloop_shift():
    """
    Test that self-loops raise the second largest eigenvalue.
    - Checks if P3 and C4 pass with gamma = 1.
    - Checks if the gap shrinks as gamma goes to 0.
    """
    assert verify_selfloop_shift(path(3)).passed
    assert verify_selfloop_shift(cycle(4)).passed
    gaps = [verify_selfloop_shift(path(3), gamma).value for gamma in (1.0, 0.1, 0.01)]
    assert gaps[0] > gaps[1] > gaps[2] > 0
    assert gaps[0] == pytest.approx(0.5)


def test_dense_checks_are_size_limited():
    """
    Test that the dense verifications refuse large graphs.
    """
    g, _ = gen_grid_city(25, 25, weight_law="unit")
    with pytest.raises(DomainError):
        verify_complementarity(g)


def test_decay_on_two_nodes():
    """
    Test the decay curve of P2, which collapses after one step.
    """
    assert np.all(oversmoothing_decay(path(2), 5) == 0.0)


def test_decay_matches_dense(grid8):
    """
    Test the decay curve on an 8x8 grid.
    - Checks if curve(l) equals the l-th power of the largest non-top eigenvalue magnitude.
    - Checks if the ratio of consecutive values is that eigenvalue.
    """
    values, _ = dense_eigs(dense_operator(grid8, "S_tilde"))
    rate = max(abs(values[-2]), abs(values[0]))
    curve = oversmoothing_decay(grid8, 20)
    expected = rate ** np.arange(1, 21)
    assert np.allclose(curve, expected, rtol=1e-6, atol=0.0)
    assert np.allclose(curve[1:] / curve[:-1], rate, rtol=1e-6)


def test_layer_collapse(grid8):
    """
    Test that repeated propagation converges to the rank-one limit.
    - Checks if the relative deviation at 200 layers is below 1e-6.
    """
    op = normalized_operator(grid8, "S_tilde")
    X = np.random.default_rng(0).standard_normal((grid8.n_nodes, 3))
    limit = limit_projection(op, X)
    deviation = np.linalg.norm(propagate(op, X, 200) - limit) / np.linalg.norm(limit)
    assert deviation < 1e-6


def test_bound_below_measured_eigenvalue():
    """
    Test that the bound lies below the measured second eigenvalue on generated graphs.
    """
    graphs = [gen_grid_city(w, h, weight_law="unit", perturb_p=p, seed=s)[0]
              for w, h, p, s in [(10, 10, 0.0, 0), (12, 8, 0.1, 1), (16, 16, 0.2, 2)]]
    graphs += [gen_small_world(100, 4, p, seed=3) for p in (0.1, 0.3)]
    for g in graphs:
        report = spectral_report(g, L=0)
        if report.bound_value is None:
            continue
        values = np.linalg.eigvalsh(dense_operator(g, "S_tilde"))
        assert report.bound_value < values[-2]
        assert report.lambda_N_minus_1.value == pytest.approx(values[-2], abs=1e-8)


def test_spectral_report(grid8):
    """
    Test the assembled report.
    - Checks if the top eigenvalue is 1 and the curve has the requested length.
    - Checks if the bound uses the coordinate diameter estimate.
    """
    report = spectral_report(grid8, L=10)
    assert report.lambda_N.value == 1.0
    assert report.d_max == 4 and report.diameter == 7
    assert report.bound_value == pytest.approx(bound_lambda(4, 7))
    assert len(report.decay_curve) == 10
    assert report.to_dict()["lambda_N"]["converged"]


def generated_graph(index):
    """
    Member of a population of 50 connected graphs: perturbed grids for even
    indices and small-world graphs for odd ones.
    """
    rng = np.random.default_rng(index)
    if index % 2 == 0:
        width, height = (int(s) for s in rng.integers(6, 15, size=2))
        return gen_grid_city(width, height, weight_law="unit", perturb_p=float(rng.uniform(0.0, 0.3)),
                             seed=index)[0]
    k = int(rng.choice([4, 6]))
    return gen_small_world(int(rng.integers(40, 121)), k, float(rng.uniform(0.05, 0.5)), seed=index)


@pytest.mark.parametrize("index", range(50))
def test_bound_holds_on_generated_graphs(index):
    """
    Test the lower bound on a population of generated graphs.
    - Checks if the bound from d_max and the exact hop diameter lies below the dense lambda_{N-1}.
    """
    g = generated_graph(index)
    diam = exact_diameter(g)
    if diam < 4:
        pytest.skip("bound needs diam >= 4")
    values = np.linalg.eigvalsh(dense_operator(g, "S_tilde"))
    assert bound_lambda(int(g.degrees.max()), diam) < values[-2]


@pytest.mark.parametrize("index", range(50))
def test_spectral_identities_on_generated_graphs(index):
    """
    Test the spectral identities on a population of generated graphs.
    - Checks if the S_adj and L_sym spectra are complementary within 1e-10.
    - Checks if self-loops raise the second largest eigenvalue.
    """
    g = generated_graph(index)
    complementarity = verify_complementarity(g)
    assert complementarity.passed and complementarity.value < 1e-10
    shift = verify_selfloop_shift(g, gamma=1.0)
    assert shift.passed and shift.value > 0.0
