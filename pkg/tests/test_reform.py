import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import linalg

from spgls.dataset import Dataset
from spgls.errors import DataError
from spgls.reform import (
    build_matrices,
    build_spectral,
    congruence_v1,
    eig_sym,
    reduced_lmi,
    to_original,
    v1_matrix,
)

from oracles import random_instance

gammas = st.floats(1e-4, 1e4)
seeds = st.integers(0, 2**32 - 1)


def dense_A(d):
    # Gram matrix of [X | z - y | -y]
    M = np.column_stack([d.X, d.z - d.y, -d.y])
    return M.T @ M


def full_congruence(sf):
    k = sf.n + 1
    V2 = np.eye(k + 1)
    V2[:k, :k] = sf.H
    return v1_matrix(sf.n, sf.gamma) @ V2


def test_w1_matrices(w1):
    gm = build_matrices(*w1)
    np.testing.assert_array_equal(gm.A, [[1, 0, -1], [0, 0, 0], [-1, 0, 1]])
    np.testing.assert_array_equal(gm.B, [[0, 0, 0], [0, 1, 1], [0, 1, 1]])
    np.testing.assert_array_equal(gm.C, [[1, 0, 0], [0, 0, -0.5], [0, -0.5, 0]])


def test_zero_labels_leave_gram_block():
    gm = build_matrices(Dataset([[1.0]], [0.0], [0.0]), 1.0)
    np.testing.assert_array_equal(gm.A, np.diag([1.0, 0.0, 0.0]))


@pytest.mark.parametrize("gamma", [0.0, -1.0, math.inf, math.nan])
def test_bad_gamma(w1, gamma):
    with pytest.raises(DataError):
        build_matrices(w1[0], gamma)


@given(seeds)
def test_blockwise_matches_dense_gram(seed):
    d, g = random_instance(np.random.default_rng(seed))
    gm = build_matrices(d, g)
    A = dense_A(d)
    np.testing.assert_allclose(gm.A, A, rtol=1e-12, atol=1e-12 * np.abs(A).max())
    assert np.array_equal(gm.A, gm.A.T)
    assert np.linalg.eigvalsh(gm.A)[0] >= -1e-10 * np.trace(gm.A)


def test_w1_abar(w1):
    gm = build_matrices(*w1)
    Abar, _, _ = congruence_v1(gm)
    V = v1_matrix(1, 1.0)
    np.testing.assert_allclose(Abar, V.T @ gm.A @ V, atol=1e-15)
    np.testing.assert_allclose(Abar, [[1, 1, -1], [1, 1, -1], [-1, -1, 1]], atol=1e-15)


@given(gammas, st.integers(1, 6))
def test_congruence_closed_forms(gamma, n):
    d = Dataset(np.ones((1, n)), [1.0], [2.0])
    gm = build_matrices(d, gamma)
    V = v1_matrix(n, gamma)
    eps = np.finfo(float).eps
    Bbar = V.T @ gm.B @ V
    Cbar = V.T @ gm.C @ V
    want_B = np.zeros((n + 2, n + 2))
    want_B[-1, -1] = 4.0
    want_C = np.diag(np.r_[np.full(n + 1, 1 / gamma), -1.0])
    assert np.max(np.abs(Bbar - want_B)) <= 8 * eps * 4
    assert np.max(np.abs(Cbar - want_C)) <= 8 * eps * max(1 / gamma, 1.0)
    _, B2, C2 = congruence_v1(gm)
    assert np.count_nonzero(B2) == 1 and B2[-1, -1] == 4.0
    assert np.count_nonzero(C2 - np.diag(np.diag(C2))) == 0 and C2[-1, -1] == -1.0


def test_eig_sym_examples(rng):
    vals, _ = eig_sym(np.eye(3))
    np.testing.assert_array_equal(vals, [1, 1, 1])
    vals, vecs = eig_sym(np.array([[1.0, 1.0], [1.0, 1.0]]))
    np.testing.assert_allclose(vals, [0, 2], atol=1e-15)
    M = rng.standard_normal((50, 50))
    M = M + M.T
    vals, vecs = eig_sym(M)
    assert np.all(np.diff(vals) >= 0)
    assert np.linalg.norm(vecs @ np.diag(vals) @ vecs.T - M) <= 1e-10 * np.linalg.norm(M)
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(50), atol=1e-12)
    # deterministic sign: first significant entry of each column is nonnegative
    for j in range(50):
        col = vecs[:, j]
        assert col[np.argmax(np.abs(col) > 1e-12 * np.abs(col).max())] >= 0


def test_eig_sym_agrees_with_scipy(rng):
    M = rng.standard_normal((20, 20))
    M = M @ M.T
    np.testing.assert_allclose(eig_sym(M)[0], linalg.eigvalsh(M), rtol=1e-10, atol=1e-12)


def test_w1_spectral(w1):
    sf = build_spectral(build_matrices(*w1))
    np.testing.assert_allclose(sf.d, [0, 2], atol=1e-15)
    np.testing.assert_allclose(np.abs(sf.b), [0, math.sqrt(2)], atol=1e-15)
    assert sf.c == pytest.approx(1.0)


def test_zero_labels_spectral():
    X = np.array([[1.0, 2.0], [0.0, 1.0], [3.0, 1.0]])
    sf = build_spectral(build_matrices(Dataset(X, np.zeros(3), np.zeros(3)), 0.5))
    np.testing.assert_array_equal(sf.b, 0.0)
    assert sf.c == 0.0


def test_spectral_timings(w1):
    t = {}
    build_spectral(build_matrices(*w1), t)
    assert t["eig"] >= 0


@given(seeds)
def test_spectral_decomposition_contract(seed):
    d, g = random_instance(np.random.default_rng(seed))
    gm = build_matrices(d, g)
    sf = build_spectral(gm)
    Abar, _, _ = congruence_v1(gm)
    k = d.n + 1
    A11 = Abar[:k, :k]
    assert sf.b.shape == (k,) and sf.d.shape == (k,)
    scale = max(np.linalg.norm(A11), 1e-300)
    assert np.linalg.norm(sf.H @ np.diag(sf.d) @ sf.H.T - A11) <= 1e-10 * scale
    np.testing.assert_allclose(sf.H.T @ Abar[:k, k], sf.b, atol=1e-12 * (1 + np.abs(Abar).max()))
    assert sf.c == Abar[k, k]


@given(seeds, st.floats(-5, 5), st.floats(-5, 5))
def test_congruence_preserves_lmi(seed, mu, lam):
    rng = np.random.default_rng(seed)
    d, g = random_instance(rng)
    gm = build_matrices(d, g)
    sf = build_spectral(gm)
    V = full_congruence(sf)
    M = gm.lmi(mu, lam)
    R = reduced_lmi(sf, mu, lam)
    np.testing.assert_allclose(V.T @ M @ V, R, atol=1e-9 * (1 + np.abs(M).max()) * np.abs(V).max() ** 2)
    # inertia: signs of the smallest eigenvalues agree away from singularity
    em, er = np.linalg.eigvalsh(M)[0], np.linalg.eigvalsh(R)[0]
    if min(abs(em), abs(er)) > 1e-8 * (1 + np.abs(M).max()) * np.abs(V).max() ** 2:
        assert np.sign(em) == np.sign(er)


@given(seeds)
def test_to_original_is_the_congruence(seed):
    rng = np.random.default_rng(seed)
    d, g = random_instance(rng)
    sf = build_spectral(build_matrices(d, g))
    y = rng.standard_normal(sf.n + 2)
    np.testing.assert_allclose(to_original(sf, y), full_congruence(sf) @ y, rtol=1e-12, atol=1e-12)
