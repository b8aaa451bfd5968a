import math

import numpy as np
import pytest

from bispec.model import (BipartiteGraph, ModelError, assortative_pi, build_model, population_quantities,
                          rank_one_pi, sample_graph)


def test_round_robin_labels():
    m = build_model(4, 4, 2, 2, [[1, 0], [0, 1]])
    assert m.z1.tolist() == [1, 2, 1, 2]
    assert m.row_sizes.tolist() == [2, 2]
    assert m.col_sizes.tolist() == [2, 2]
    assert m.alpha == 1.0


def test_uniform_model_pmax():
    m = build_model(2, 2, 2, 2, [[0.5, 0.5], [0.5, 0.5]])
    assert m.pmax == 0.5


def test_explicit_labels_with_empty_community():
    with pytest.raises(ModelError, match="community 3 is empty"):
        build_model(3, 3, 3, 1, [[0.1], [0.1], [0.1]], "explicit", z1=[1, 1, 2], z2=[1, 1, 1])


@pytest.mark.parametrize("bad", [[[1.2, 0], [0, 1]], [[-0.1, 0], [0, 1]], [[np.nan, 0], [0, 1]]])
def test_pi_outside_unit_interval(bad):
    with pytest.raises(ModelError):
        build_model(4, 4, 2, 2, bad)


def test_dirichlet_labels_nonempty_and_reproducible():
    a = build_model(30, 50, 4, 3, np.full((4, 3), 0.1), "dirichlet-random", seed=5)
    b = build_model(30, 50, 4, 3, np.full((4, 3), 0.1), "dirichlet-random", seed=5)
    assert np.array_equal(a.z1, b.z1) and np.array_equal(a.z2, b.z2)
    assert a.row_sizes.min() >= 1 and a.col_sizes.min() >= 1
    assert math.isfinite(a.alpha) and a.alpha >= 1


def test_balance_ratio():
    m = build_model(6, 4, 2, 2, np.full((2, 2), 0.1), "explicit", z1=[1, 1, 1, 1, 2, 2], z2=[1, 2, 1, 2])
    # community sizes 4 and 2 against the balanced size 3
    assert m.alpha_rows == pytest.approx(1.5)
    assert m.alpha_cols == 1.0


def test_P_reconstruction_entrywise(rng):
    Pi = rng.random((3, 2))
    m = build_model(7, 9, 3, 2, Pi, "dirichlet-random", seed=1)
    P = m.P()
    for i in range(7):
        for j in range(9):
            assert P[i, j] == Pi[m.z1[i] - 1, m.z2[j] - 1]
    assert np.array_equal(P, m.Z1() @ Pi @ m.Z2().T)


def test_zero_and_full_probabilities():
    m0 = build_model(5, 7, 2, 2, np.zeros((2, 2)))
    m1 = build_model(5, 7, 2, 2, np.ones((2, 2)))
    for seed in range(3):
        assert sample_graph(m0, seed).nnz == 0
        assert sample_graph(m1, seed).nnz == 35
        assert np.array_equal(sample_graph(m1, seed).to_dense(), np.ones((5, 7)))


def test_sampler_determinism():
    m = build_model(40, 300, 2, 3, np.array([[0.1, 0.02, 0.3], [0.05, 0.2, 0.01]]))
    a, b = sample_graph(m, 99), sample_graph(m, 99)
    assert np.array_equal(a.indptr, b.indptr) and np.array_equal(a.indices, b.indices)
    assert not np.array_equal(sample_graph(m, 100).indices, a.indices)


def test_edge_count_within_four_sigma():
    Pi = np.array([[0.3, 0.05], [0.1, 0.2]])
    m = build_model(100, 1000, 2, 2, Pi)
    P = m.P()
    mean, sd = P.sum(), math.sqrt((P * (1 - P)).sum())
    for seed in range(5):
        assert abs(sample_graph(m, seed).nnz - mean) <= 4 * sd


def test_single_entry_frequency():
    m = build_model(1, 1, 1, 1, [[0.3]])
    hits = sum(sample_graph(m, s).nnz for s in range(10000))
    sd = math.sqrt(10000 * 0.3 * 0.7)
    assert abs(hits - 3000) <= 4 * sd


def test_blockwise_frequencies_match_pi():
    Pi = np.array([[0.02, 0.3], [0.6, 0.0]])
    m = build_model(60, 400, 2, 2, Pi)
    A = sample_graph(m, 3).to_dense()
    for k in range(2):
        for l in range(2):
            block = A[np.ix_(m.z1 == k + 1, m.z2 == l + 1)]
            sd = math.sqrt(block.size * Pi[k, l] * (1 - Pi[k, l]))
            assert abs(block.sum() - block.size * Pi[k, l]) <= 4 * sd + 1e-12


def test_graph_invariants_enforced():
    with pytest.raises(ValueError, match="strictly increasing"):
        BipartiteGraph.from_rows(1, 3, [[2, 1]])
    with pytest.raises(ValueError, match="strictly increasing"):
        BipartiteGraph.from_rows(1, 3, [[1, 1]])
    with pytest.raises(ValueError, match="outside"):
        BipartiteGraph.from_rows(1, 3, [[3]])
    g = BipartiteGraph.from_rows(2, 3, [[0, 2], [0, 1]])
    assert [r.tolist() for r in g.rows] == [[0, 2], [0, 1]]


def test_rank_one_example_and_separation():
    # Pi = s [[1, 1], [c, c]] gives Pi Pi^T = 2 s^2 [[1, c], [c, c^2]]; p = 2 s^2 = 0.01
    m = build_model(100, 40, 2, 2, rank_one_pi(0.5, math.sqrt(0.005)))
    PPt = m.Pi @ m.Pi.T
    assert PPt == pytest.approx(np.array([[0.01, 0.005], [0.005, 0.0025]]), abs=1e-15)
    pq = population_quantities(m)
    assert pq.r == 1
    # exact separation sqrt(2 / (n1 (1 + c^2))) |1 - c|, checked against a dense eigensolve
    assert pq.separation == pytest.approx(0.06324555320336758, abs=1e-10)


@pytest.mark.parametrize("c", [0.1, 0.5, 2.0])
def test_rank_one_family_matches_dense_oracle(c):
    n1 = 100
    m = build_model(n1, 40, 2, 2, rank_one_pi(c, 0.1))
    pq = population_quantities(m)
    P = m.P()
    w, v = np.linalg.eigh(P @ P.T)
    u = v[:, -1]
    assert pq.r == 1 == int(np.sum(w > 1e-8 * w[-1]))
    assert pq.separation == pytest.approx(abs(u[0] - u[1]), abs=1e-12)
    assert pq.separation == pytest.approx(math.sqrt(2 / (n1 * (1 + c * c))) * abs(1 - c), rel=1e-12)
    if c < 1:
        assert pq.separation >= abs(1 - c) / math.sqrt(n1)


def test_identity_like_pi():
    m = build_model(10, 20, 2, 2, [[0.4, 0], [0, 0.4]])
    pq = population_quantities(m)
    assert pq.r == 2
    assert len(np.unique(np.round(pq.Ustar, 12), axis=0)) == 2


def test_population_eigs_match_dense(rng):
    Pi = rng.random((2, 3))
    m = build_model(6, 11, 2, 3, Pi, "dirichlet-random", seed=4)
    pq = population_quantities(m)
    P = m.P()
    Bstar = P @ P.T
    assert np.allclose(pq.Bstar, Bstar, atol=1e-12)
    w, v = np.linalg.eigh(Bstar)
    w, v = w[::-1], v[:, ::-1]
    assert pq.r == 2
    assert np.allclose(pq.LambdaStar, w[:2], atol=1e-10)
    assert np.allclose(pq.Ustar @ pq.Ustar.T, v[:, :2] @ v[:, :2].T, atol=1e-10)
    assert pq.next_eigenvalue <= 1e-8 * w[0]


@pytest.mark.parametrize("seed", range(5))
def test_population_invariants(seed):
    r = np.random.default_rng(seed)
    K, L = r.integers(1, 5), r.integers(1, 5)
    m = build_model(int(r.integers(K, 40)), int(r.integers(L, 60)), K, L, r.random((K, L)),
                    "dirichlet-random", seed=seed)
    pq = population_quantities(m)
    U, lam = pq.Ustar, pq.LambdaStar
    assert np.allclose(U.T @ U, np.eye(pq.r), atol=1e-10)
    assert np.linalg.norm(pq.Bstar @ U - U * lam) <= 1e-8 * lam[0]
    assert np.all(np.diff(lam) <= 0) and lam[-1] > 0
    assert np.all(np.linalg.eigvalsh(pq.Bstar) >= -1e-9 * lam[0])
    assert np.allclose(pq.Bstar, pq.Bstar.T)
    if K > 1 and pq.r == K:
        assert pq.separation > 0


def test_degenerate_model():
    with pytest.raises(ModelError, match="degenerate"):
        population_quantities(build_model(4, 4, 2, 2, np.zeros((2, 2))))


def test_assortative_pi_shape():
    Pi = assortative_pi(3, 2, 0.2, 0.5)
    assert Pi.tolist() == [[0.2, 0.1], [0.1, 0.2], [0.1, 0.1]]
