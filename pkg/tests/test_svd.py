"""Truncated adjacency SVD checked against numpy's dense decomposition."""

from __future__ import annotations

import math

import numpy as np
import pytest

from linkpred.graph import build_graph, RawEdgeList
from linkpred.heuristics import compute_svd

from conftest import graph_from_text, synthetic_social_graph


def dense_adj(g) -> np.ndarray:
    A = np.zeros((g.node_count, g.node_count))
    for u in range(g.node_count):
        A[u, g.out_neighbors(u)] = 1.0
    return A


def dense_truncated(A: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    U, S, Vt = np.linalg.svd(A)
    U, S, Vt = U[:, :k], S[:k], Vt[:k, :]
    for j in range(k):
        i = np.argmax(np.abs(U[:, j]))
        if U[i, j] < 0:
            U[:, j] = -U[:, j]
            Vt[j, :] = -Vt[j, :]
    return U, S, Vt


def cyclic_shift_graph(n: int, shift: int):
    arcs = np.array([[i, (i + shift) % n] for i in range(n)], dtype=np.int64)
    return build_graph(RawEdgeList(edges=arcs, directed=True))


def test_permutation_matrix_flat_spectrum():
    # adjacency of a cyclic shift is orthogonal, every singular value is 1
    g = cyclic_shift_graph(12, 3)
    f = compute_svd(g, k=6, seed=0)
    np.testing.assert_allclose(f.S, np.ones(6), atol=1e-9)
    A = dense_adj(g)
    Ak = f.U @ np.diag(f.S) @ f.V
    assert abs(np.sum(Ak ** 2) - 6.0) < 1e-6
    assert abs(np.sum((A - Ak) ** 2) - 6.0) < 1e-6


def test_rank_one_bipartite_factors():
    rows = [f"{u} {v}" for u in (0, 1) for v in (2, 3, 4)]
    g = graph_from_text("\n".join(rows))
    f = compute_svd(g, k=2, seed=1)
    np.testing.assert_allclose(f.S, [math.sqrt(6.0), 0.0], atol=1e-9)
    u_expect = np.zeros(5)
    v_expect = np.zeros(5)
    for raw in (0, 1):
        u_expect[g.id_map[raw]] = 1.0 / math.sqrt(2.0)
    for raw in (2, 3, 4):
        v_expect[g.id_map[raw]] = 1.0 / math.sqrt(3.0)
    np.testing.assert_allclose(f.U[:, 0], u_expect, atol=1e-9)
    np.testing.assert_allclose(f.V[0, :], v_expect, atol=1e-9)


def test_matches_dense_svd_random():
    # singular values agree with numpy's dense SVD to 1e-6 relative for
    # N <= 64; singular vectors converge an order slower, so the subspace
    # is held to near-optimal approximation error instead
    k = 6
    for n, seed in [(30, 10), (40, 0), (40, 1), (40, 2), (48, 11), (64, 7),
                    (64, 5)]:
        g = synthetic_social_graph(n, seed=seed)
        f = compute_svd(g, k=k, seed=0)
        A = dense_adj(g)
        S_full = np.linalg.svd(A, compute_uv=False)
        assert S_full[k - 1] - S_full[k] > 0.05, "graph lacks a spectral gap"
        np.testing.assert_allclose(f.S, S_full[:k], rtol=1e-6, atol=1e-9)
        err = np.linalg.norm(A - f.U @ np.diag(f.S) @ f.V)
        best = np.linalg.norm(S_full[k:])
        assert err <= best * (1.0 + 1e-6)


def test_factor_orthonormality():
    g = synthetic_social_graph(40, seed=13)
    f = compute_svd(g, k=6, seed=0)
    np.testing.assert_allclose(f.U.T @ f.U, np.eye(6), atol=1e-9)
    np.testing.assert_allclose(f.V @ f.V.T, np.eye(6), atol=1e-9)
    assert (np.diff(f.S) <= 1e-12).all()
    assert (f.S >= -1e-12).all()


def test_deterministic_and_sign_fixed():
    g = synthetic_social_graph(40, seed=14)
    f1 = compute_svd(g, k=6, seed=42)
    f2 = compute_svd(g, k=6, seed=42)
    assert np.array_equal(f1.U, f2.U)
    assert np.array_equal(f1.S, f2.S)
    assert np.array_equal(f1.V, f2.V)
    for j in range(6):
        i = np.argmax(np.abs(f1.U[:, j]))
        assert f1.U[i, j] >= 0


def test_seed_changes_nothing_material():
    # different test matrices land on the same values up to estimator noise
    g = synthetic_social_graph(40, seed=15)
    f1 = compute_svd(g, k=6, seed=0)
    f2 = compute_svd(g, k=6, seed=99)
    np.testing.assert_allclose(f1.S, f2.S, rtol=1e-5)


def test_rank_larger_than_graph_rejected():
    g = graph_from_text("0 1\n1 2\n")
    with pytest.raises(ValueError):
        compute_svd(g, k=10, seed=0)
