import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from techrank.exceptions import ParameterRangeError
from techrank.graph import BipartiteGraph
from techrank.walker import WalkerParams, init_weights, run, step, transition_matrices

from conftest import random_biadjacency, random_graph, tolerant_ranks
from techrank.stats import spearman

SMALL = BipartiteGraph.from_matrix([[1, 1], [0, 1]])


def loop_transitions(m, alpha, beta):
    """Transition probabilities written out entry by entry."""
    n_c, n_t = m.shape
    k_c = m.sum(axis=1)
    k_t = m.sum(axis=0)
    g_ct = np.zeros((n_c, n_t))
    g_tc = np.zeros((n_c, n_t))
    for c in range(n_c):
        for t in range(n_t):
            if m[c, t]:
                g_ct[c, t] = k_c[c] ** -beta / sum(m[d, t] * k_c[d] ** -beta for d in range(n_c))
                g_tc[c, t] = k_t[t] ** -alpha / sum(m[c, s] * k_t[s] ** -alpha for s in range(n_t))
    return g_ct, g_tc


def test_init_is_degrees():
    s = init_weights(SMALL)
    np.testing.assert_array_equal(s.w_c, [2, 1])
    np.testing.assert_array_equal(s.w_t, [1, 2])


def test_hand_transition_values():
    tm = transition_matrices(SMALL, 0.0, 1.0)
    np.testing.assert_allclose(tm.g_ct.toarray()[:, 1], [1 / 3, 2 / 3])
    tm0 = transition_matrices(SMALL, 0.0, 0.0)
    np.testing.assert_allclose(tm0.g_ct.toarray()[:, 1], [0.5, 0.5])
    np.testing.assert_allclose(tm0.g_tc.toarray(), [[0.5, 0.5], [0, 1]])


def test_first_step_by_hand():
    s1 = step(init_weights(SMALL), transition_matrices(SMALL, 0.0, 0.0))
    np.testing.assert_allclose(s1.w_c, [2, 1])
    np.testing.assert_allclose(s1.w_t, [1, 2])
    assert s1.iteration == 1


def test_matches_loop_transitions(rng):
    m = random_biadjacency(rng, 7, 5, p=0.4)
    g = BipartiteGraph.from_matrix(m)
    for alpha, beta in [(0.0, 0.0), (-1.3, 0.7), (1.92, -0.36)]:
        tm = transition_matrices(g, alpha, beta)
        g_ct, g_tc = loop_transitions(m, alpha, beta)
        np.testing.assert_allclose(tm.g_ct.toarray(), g_ct, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(tm.g_tc.toarray(), g_tc, rtol=1e-12, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 25), st.integers(1, 15), st.floats(0.05, 0.8),
    st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 2**31),
)
def test_stochastic_and_mass_exchange(n_c, n_t, p, alpha, beta, seed):
    g = BipartiteGraph.from_matrix(random_biadjacency(np.random.default_rng(seed), n_c, n_t, p=p))
    tm = transition_matrices(g, alpha, beta)
    np.testing.assert_allclose(tm.g_ct.sum(axis=0).A1, 1.0, atol=1e-12)
    np.testing.assert_allclose(tm.g_tc.sum(axis=1).A1, 1.0, atol=1e-12)
    s = init_weights(g)
    for _ in range(5):
        nxt = step(s, tm)
        assert nxt.w_c.sum() == pytest.approx(s.w_t.sum(), rel=1e-9)
        assert nxt.w_t.sum() == pytest.approx(s.w_c.sum(), rel=1e-9)
        s = nxt


def test_complete_graph_converges_immediately():
    g = BipartiteGraph.from_matrix(np.ones((4, 3)))
    s = run(g, WalkerParams())
    assert s.converged and s.iteration == 1


def test_degrees_are_fixed_point_without_damping(rng):
    g = random_graph(rng, 12, 6, p=0.3)
    s = run(g, WalkerParams(alpha=0.0, beta=0.0))
    assert s.iteration == 1
    np.testing.assert_allclose(s.w_c, g.company_degrees)


def test_star_graph():
    g = BipartiteGraph.from_matrix(np.ones((1, 5)))
    s = run(g, WalkerParams(alpha=0.7, beta=-0.4))
    assert s.converged
    np.testing.assert_allclose(s.technologies_share, 0.2)


def test_permutation_equivariance(rng):
    m = random_biadjacency(rng, 9, 6, p=0.35)
    pc, pt = rng.permutation(9), rng.permutation(6)
    params = WalkerParams(alpha=0.4, beta=-0.8)
    a = run(BipartiteGraph.from_matrix(m), params)
    b = run(BipartiteGraph.from_matrix(m[pc][:, pt]), params)
    np.testing.assert_allclose(b.w_c, a.w_c[pc], rtol=1e-10)
    np.testing.assert_allclose(b.w_t, a.w_t[pt], rtol=1e-10)


def test_deterministic(rng):
    g = random_graph(rng, 20, 8, p=0.25)
    params = WalkerParams(alpha=-1.0, beta=1.0)
    a, b = run(g, params), run(g, params)
    assert np.array_equal(a.w_c, b.w_c) and a.iteration == b.iteration


def test_trajectory_and_layer_iterations(rng):
    g = random_graph(rng, 15, 7, p=0.3, connected=True)
    s = run(g, WalkerParams(alpha=0.5, beta=0.5, record_trajectory=True))
    assert len(s.trajectory) == s.iteration + 1
    np.testing.assert_allclose(s.trajectory[0][0], s.trajectory[0][0].clip(0, 1))
    assert s.converged
    # a layer can dip below tolerance before the other one settles
    assert max(s.iterations_c, s.iterations_t) <= s.iteration


def test_non_convergence_reported(rng):
    g = random_graph(rng, 15, 7, p=0.3, connected=True)
    s = run(g, WalkerParams(alpha=1.5, beta=-1.5, max_iterations=2))
    assert not s.converged and s.iteration == 2


def power_iteration_oracle(m, tol=1e-14, max_iter=200_000):
    """Dominant eigenvector of the two-step company operator at alpha=beta=0."""
    n_c, n_t = m.shape
    k_c = m.sum(axis=1)
    k_t = m.sum(axis=0)
    op = np.zeros((n_c, n_c))
    for c in range(n_c):
        for d in range(n_c):
            # c <- t <- d: column-normalized then row-normalized hop
            op[c, d] = sum(m[c, t] / k_t[t] * m[d, t] / k_c[d] for t in range(n_t))
    v = np.full(n_c, 1.0 / n_c)
    for _ in range(max_iter):
        w = op @ v
        w /= w.sum()
        if np.abs(w - v).max() < tol:
            return w
        v = w
    return v


def test_eigenvector_oracle(rng):
    for _ in range(5):
        n_c, n_t = int(rng.integers(5, 40)), int(rng.integers(3, 15))
        g = random_graph(rng, n_c, n_t, p=0.3, connected=True)
        s = run(g, WalkerParams(alpha=0.0, beta=0.0))
        oracle = power_iteration_oracle(g.toarray())
        assert spearman(tolerant_ranks(s.companies_share), tolerant_ranks(oracle)) == 1.0


def test_bad_parameters():
    with pytest.raises(ParameterRangeError):
        WalkerParams(alpha=float("nan"))
    with pytest.raises(ValueError):
        WalkerParams(tolerance=0)
    with pytest.raises(ValueError):
        WalkerParams(max_iterations=0)
    huge = BipartiteGraph.from_matrix(np.ones((2, 3)))
    with pytest.raises(ParameterRangeError):
        transition_matrices(huge, 1e6, 0.0)


def test_step_size_mismatch():
    tm = transition_matrices(SMALL, 0, 0)
    with pytest.raises(ValueError):
        step(init_weights(BipartiteGraph.from_matrix(np.ones((3, 2)))), tm)


def test_iterations_follow_spectral_gap(rng):
    # each layer alternates between two chains, so one application of the
    # two-step operator takes two iterations
    ratios = []
    for _ in range(20):
        g = random_graph(rng, 10, 26, n_edges=45, connected=True)
        params = WalkerParams(alpha=-0.36, beta=1.92)
        tm = transition_matrices(g, params.alpha, params.beta)
        lam = np.sort(np.abs(np.linalg.eigvals(tm.g_ct.toarray() @ tm.g_tc.toarray().T)))[-2]
        s = run(g, params)
        if s.converged and lam > 0.5:
            ratios.append(s.iteration / (2 * np.log(params.tolerance) / np.log(lam)))
    assert len(ratios) >= 10
    assert 0.5 < np.median(ratios) < 1.5


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 20), st.integers(2, 12), st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 2**31))
def test_converged_state_is_stable(n_c, n_t, alpha, beta, seed):
    g = BipartiteGraph.from_matrix(random_biadjacency(np.random.default_rng(seed), n_c, n_t, p=0.3))
    params = WalkerParams(alpha=alpha, beta=beta)
    s = run(g, params)
    if not s.converged:
        return
    assert np.all(np.isfinite(s.w_c)) and s.w_c.min() >= 0 and s.w_t.min() >= 0
    nxt = step(s, transition_matrices(g, alpha, beta))
    assert np.abs(nxt.companies_normalized - s.companies_normalized).max() <= params.tolerance
    assert np.abs(nxt.technologies_normalized - s.technologies_normalized).max() <= params.tolerance


def test_two_company_layer_is_not_falsely_converged():
    # min-max normalization pins a two-entry layer to [0, 1]; the confirmation
    # step must catch the technology layer still moving
    m = random_biadjacency(np.random.default_rng(0), 2, 5, p=0.3)
    g = BipartiteGraph.from_matrix(m)
    s = run(g, WalkerParams(alpha=0.0, beta=1.0))
    nxt = step(s, transition_matrices(g, 0.0, 1.0))
    assert s.iteration > 1
    assert np.abs(nxt.technologies_normalized - s.technologies_normalized).max() <= 1e-8


def test_star_with_private_technology():
    # technology 0 is shared by everyone, technology 1 belongs to company 0 only
    m = np.zeros((5, 2))
    m[:, 0] = 1
    m[0, 1] = 1
    s = run(BipartiteGraph.from_matrix(m), WalkerParams(alpha=0.0, beta=0.0))
    w = s.companies_normalized
    assert np.all(w[0] > w[1:])
