"""The 56-dimensional heuristic edge feature vector.

Per-pair features (similarities, common neighborhoods, Adamic-Adar, shortest
alternative path, follows-back) run in a numba kernel over CSR adjacency;
whole-graph scores (PageRank, Katz, HITS, truncated SVD) are power/subspace
iterations over a sparse adjacency matrix, computed once per graph and reused
for every pair.

Feature layout (index -> meaning):
    0-3    jaccard/cosine of follower (in) and followee (out) sets
    4-5    PageRank of source, destination
    6      shortest path barring the direct edge (sentinel when absent)
    7      same weak component
    8      destination follows source back
    9      Adamic-Adar index over undirected neighborhoods
    10-15  Katz, authority, hub for source and destination
    16-21  follower/followee counts and common-follower/followee counts
    22-27  inverse-root degree weights w_in, w_out and four combinations
    28-53  truncated-SVD rows/columns of both endpoints plus two dot products
    54-55  in-degree product, out-degree product
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit

from linkpred.graph import ComponentLabels, DiGraph, weakly_connected_components
from linkpred.sampling import LabeledEdge

HEURISTIC_DIM = 56

FEATURE_NAMES = (
    ["jaccard_followers", "jaccard_followees", "cosine_followers", "cosine_followees",
     "pagerank_src", "pagerank_dst",
     "shortest_path", "same_community", "follows_back", "adamic_adar",
     "katz_src", "katz_dst", "auth_src", "auth_dst", "hub_src", "hub_dst",
     "n_followers_src", "n_followees_src", "n_followers_dst", "n_followees_dst",
     "n_common_followers", "n_common_followees",
     "w_in", "w_out", "w_in_plus_w_out", "w_in_times_w_out",
     "two_w_in_plus_w_out", "w_in_plus_two_w_out"]
    + [f"svd_u_src_{i}" for i in range(6)]
    + [f"svd_u_dst_{i}" for i in range(6)]
    + [f"svd_v_src_{i}" for i in range(6)]
    + [f"svd_v_dst_{i}" for i in range(6)]
    + ["svd_dot_u", "svd_dot_v", "indegree_product", "outdegree_product"]
)
assert len(FEATURE_NAMES) == HEURISTIC_DIM


class ConvergenceWarning(UserWarning):
    """Iterative score did not reach tolerance within max_iters."""


class KatzDivergenceError(RuntimeError):
    """Katz iteration blew up; the attenuation factor is too large."""


@dataclass
class HeuristicConfig:
    pagerank_damping: float = 0.85
    pagerank_tol: float = 1e-6
    katz_alpha: float = 0.1
    katz_beta: float = 1.0
    katz_tol: float = 1e-6
    hits_tol: float = 1e-8
    max_iters: int = 1000
    svd_rank: int = 6
    svd_seed: int = 0
    missing_path_sentinel: float = -1.0
    path_max_depth: int = 5  # BFS cap for the shortest-path feature

    def __post_init__(self):
        if not 0.0 < self.pagerank_damping < 1.0:
            raise ValueError("pagerank_damping must be in (0, 1)")
        if self.svd_rank < 1:
            raise ValueError("svd_rank must be >= 1")
        for name in ("pagerank_tol", "katz_tol", "hits_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class NodeScores:
    """Whole-graph centralities, all over the same (training) graph."""

    pagerank: np.ndarray
    katz: np.ndarray
    hub: np.ndarray
    authority: np.ndarray


@dataclass
class SvdFactors:
    """Rank-k factors of the binary adjacency matrix: A ~ U diag(S) V."""

    U: np.ndarray  # (N, k), columns orthonormal
    S: np.ndarray  # (k,), non-negative descending
    V: np.ndarray  # (k, N), rows orthonormal; column j belongs to node j


def adjacency_csr(g: DiGraph) -> sp.csr_matrix:
    """Binary adjacency as scipy CSR, A[u, v] = 1 iff arc u->v."""
    n = g.node_count
    src = np.repeat(np.arange(n), np.diff(g.out_indptr))
    data = np.ones(len(g.out_indices), dtype=np.float64)
    return sp.csr_matrix((data, (src, g.out_indices)), shape=(n, n))


# -- centralities -----------------------------------------------------------------

def compute_pagerank(g: DiGraph, cfg: HeuristicConfig | None = None) -> np.ndarray:
    """Damped PageRank by power iteration with uniform dangling redistribution.

    PR(v) = (1-d)/N + d * (sum over in-neighbors u of PR(u)/outdeg(u)
            + dangling mass / N), iterated until the L1 change drops below
    pagerank_tol. The result sums to 1.
    """
    cfg = cfg or HeuristicConfig()
    n = g.node_count
    if n < 1:
        raise ValueError("graph has no nodes")
    d = cfg.pagerank_damping
    A = adjacency_csr(g)
    outdeg = g.out_degrees().astype(np.float64)
    dangling = outdeg == 0
    safe_deg = np.where(dangling, 1.0, outdeg)

    r = np.full(n, 1.0 / n)
    for _ in range(cfg.max_iters):
        contrib = r / safe_deg
        contrib[dangling] = 0.0
        spread = A.T @ contrib
        r_new = (1.0 - d) / n + d * (spread + r[dangling].sum() / n)
        if np.abs(r_new - r).sum() < cfg.pagerank_tol:
            r = r_new
            break
        r = r_new
    else:
        warnings.warn("PageRank did not converge; returning last iterate",
                      ConvergenceWarning)
    return r / r.sum()


def compute_katz(g: DiGraph, cfg: HeuristicConfig | None = None) -> np.ndarray:
    """Katz centrality: iterate x <- alpha * A^T x + beta * 1 until the L1
    change falls below katz_tol * N, then L2-normalize.

    Convergence needs alpha below the reciprocal spectral radius; if the
    iterate norm exceeds 1e12 a KatzDivergenceError is raised.
    """
    cfg = cfg or HeuristicConfig()
    n = g.node_count
    A = adjacency_csr(g)
    x = np.zeros(n)
    for _ in range(cfg.max_iters):
        x_new = cfg.katz_alpha * (A.T @ x) + cfg.katz_beta
        if np.abs(x_new).max() > 1e12:
            raise KatzDivergenceError(
                f"katz iteration diverged (alpha={cfg.katz_alpha}); "
                "reduce katz_alpha below 1/spectral_radius(A)")
        if np.abs(x_new - x).sum() < n * cfg.katz_tol:
            x = x_new
            break
        x = x_new
    else:
        warnings.warn("Katz did not converge; returning last iterate",
                      ConvergenceWarning)
    norm = np.linalg.norm(x)
    return x / norm if norm > 0 else x


def compute_hits(g: DiGraph, cfg: HeuristicConfig | None = None
                 ) -> tuple[np.ndarray, np.ndarray]:
    """HITS hub/authority scores by alternating L1-normalized updates
    a <- A^T h, h <- A a. Returns (hub, authority), each summing to 1."""
    cfg = cfg or HeuristicConfig()
    if g.arc_count == 0:
        raise ValueError("HITS requires at least one edge")
    n = g.node_count
    A = adjacency_csr(g)
    h = np.full(n, 1.0 / n)
    a = np.full(n, 1.0 / n)
    for _ in range(cfg.max_iters):
        a_new = A.T @ h
        s = a_new.sum()
        if s > 0:
            a_new /= s
        h_new = A @ a_new
        s = h_new.sum()
        if s > 0:
            h_new /= s
        if (np.abs(a_new - a).sum() < cfg.hits_tol
                and np.abs(h_new - h).sum() < cfg.hits_tol):
            a, h = a_new, h_new
            break
        a, h = a_new, h_new
    else:
        warnings.warn("HITS did not converge; returning last iterate",
                      ConvergenceWarning)
    return h, a


def compute_svd(g: DiGraph, k: int, seed: int) -> SvdFactors:
    """Rank-k truncated SVD of the adjacency matrix by randomized subspace
    iteration (Gaussian test matrix, oversampling 8, 7 power iterations).

    Left singular vectors are sign-fixed so their largest-magnitude entry is
    non-negative, making the factors deterministic for a given seed.
    """
    n = g.node_count
    if k > n:
        raise ValueError(f"svd rank {k} exceeds node count {n}")
    A = adjacency_csr(g)
    rng = np.random.default_rng(seed)
    ell = min(n, k + 8)

    Q, _ = np.linalg.qr(A @ rng.standard_normal((n, ell)))
    for _ in range(7):
        Z, _ = np.linalg.qr(A.T @ Q)
        Q, _ = np.linalg.qr(A @ Z)
    B = Q.T @ A  # (ell, n) dense
    Ub, S, Vt = np.linalg.svd(np.asarray(B), full_matrices=False)
    U = Q @ Ub[:, :k]
    S = S[:k]
    Vt = Vt[:k, :]

    # sign convention keyed to the dominant entry of each left vector
    for j in range(k):
        i = np.argmax(np.abs(U[:, j]))
        if U[i, j] < 0:
            U[:, j] = -U[:, j]
            Vt[j, :] = -Vt[j, :]
    return SvdFactors(U=U, S=S, V=Vt)


# -- per-pair primitives -------------------------------------------------------------

def set_similarity(a, b) -> tuple[float, float]:
    """(jaccard, cosine) overlap of two id sets; both 0 if either is empty."""
    sa, sb = set(a), set(b)
    if not sa or not sb:
        return 0.0, 0.0
    inter = len(sa & sb)
    jaccard = inter / len(sa | sb)
    cosine = inter / math.sqrt(len(sa) * len(sb))
    return jaccard, cosine


def adamic_adar(g: DiGraph, u: int, v: int) -> float:
    """Sum of 1/ln(degree) over common undirected neighbors; neighbors of
    degree <= 1 are skipped (ln 1 = 0)."""
    if u == v:
        raise ValueError("adamic_adar needs distinct nodes")
    common = np.intersect1d(g.und_neighbors(u), g.und_neighbors(v),
                            assume_unique=True)
    total = 0.0
    deg = g.und_degrees()
    for w in common:
        dw = int(deg[w])
        if dw > 1:
            total += 1.0 / math.log(dw)
    return total


def weight_features(g: DiGraph, u: int, v: int) -> np.ndarray:
    """Inverse-root degree weights of the candidate edge u->v.

    w_in = 1/sqrt(1 + indeg(v)), w_out = 1/sqrt(1 + outdeg(u)), followed by
    w_in+w_out, w_in*w_out, 2*w_in+w_out, w_in+2*w_out.
    """
    w_in = 1.0 / math.sqrt(1.0 + len(g.in_neighbors(v)))
    w_out = 1.0 / math.sqrt(1.0 + len(g.out_neighbors(u)))
    return np.array([w_in, w_out, w_in + w_out, w_in * w_out,
                     2.0 * w_in + w_out, w_in + 2.0 * w_out])


# -- numba kernel for batched pair topology ------------------------------------------

@njit(cache=True)
def _intersect_size(indptr, indices, a, b):
    i, j = indptr[a], indptr[b]
    ia_end, ib_end = indptr[a + 1], indptr[b + 1]
    count = 0
    while i < ia_end and j < ib_end:
        x, y = indices[i], indices[j]
        if x == y:
            count += 1
            i += 1
            j += 1
        elif x < y:
            i += 1
        else:
            j += 1
    return count


@njit(cache=True)
def _row_contains(indptr, indices, row, value):
    lo, hi = indptr[row], indptr[row + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        if indices[mid] < value:
            lo = mid + 1
        else:
            hi = mid
    return lo < indptr[row + 1] and indices[lo] == value


@njit(cache=True)
def _pair_topology(out_indptr, out_indices, in_indptr, in_indices,
                   und_indptr, und_indices, src, dst, max_depth, n_nodes):
    """Per-pair: jaccard/cosine for followers and followees, common counts,
    Adamic-Adar, follows-back, and BFS distance along out-edges with the
    direct edge barred (-2 marks 'no path within max_depth').

    Column order: jac_fer, jac_fee, cos_fer, cos_fee, ncom_fer, ncom_fee,
    adamic_adar, follows_back, distance.
    """
    m = len(src)
    out = np.zeros((m, 9))
    visited = np.zeros(n_nodes, dtype=np.int64)
    frontier = np.empty(n_nodes, dtype=np.int64)
    nxt = np.empty(n_nodes, dtype=np.int64)
    stamp = 0
    for e in range(m):
        u, v = src[e], dst[e]

        n_fer_u = in_indptr[u + 1] - in_indptr[u]
        n_fer_v = in_indptr[v + 1] - in_indptr[v]
        n_fee_u = out_indptr[u + 1] - out_indptr[u]
        n_fee_v = out_indptr[v + 1] - out_indptr[v]

        com_fer = _intersect_size(in_indptr, in_indices, u, v)
        com_fee = _intersect_size(out_indptr, out_indices, u, v)
        if n_fer_u > 0 and n_fer_v > 0:
            out[e, 0] = com_fer / (n_fer_u + n_fer_v - com_fer)
            out[e, 2] = com_fer / math.sqrt(n_fer_u * n_fer_v)
        if n_fee_u > 0 and n_fee_v > 0:
            out[e, 1] = com_fee / (n_fee_u + n_fee_v - com_fee)
            out[e, 3] = com_fee / math.sqrt(n_fee_u * n_fee_v)
        out[e, 4] = com_fer
        out[e, 5] = com_fee

        # adamic-adar over sorted undirected rows
        aa = 0.0
        i, j = und_indptr[u], und_indptr[v]
        iu_end, iv_end = und_indptr[u + 1], und_indptr[v + 1]
        while i < iu_end and j < iv_end:
            x, y = und_indices[i], und_indices[j]
            if x == y:
                dw = und_indptr[x + 1] - und_indptr[x]
                if dw > 1:
                    aa += 1.0 / math.log(dw)
                i += 1
                j += 1
            elif x < y:
                i += 1
            else:
                j += 1
        out[e, 6] = aa

        out[e, 7] = 1.0 if _row_contains(out_indptr, out_indices, v, u) else 0.0

        # BFS along out-edges, direct hop u->v barred
        stamp += 1
        visited[u] = stamp
        frontier[0] = u
        fsize = 1
        depth = 0
        dist = -2.0
        while fsize > 0 and depth < max_depth and dist < 0.0:
            nsize = 0
            for fi in range(fsize):
                node = frontier[fi]
                for ptr in range(out_indptr[node], out_indptr[node + 1]):
                    w = out_indices[ptr]
                    if depth == 0 and w == v:
                        continue  # barred direct edge
                    if visited[w] != stamp:
                        visited[w] = stamp
                        if w == v:
                            dist = depth + 1.0
                            break
                        nxt[nsize] = w
                        nsize += 1
                if dist > 0.0:
                    break
            tmp = frontier
            frontier = nxt
            nxt = tmp
            fsize = nsize
            depth += 1
        out[e, 8] = dist
    return out


# -- featurization -------------------------------------------------------------------

@dataclass
class GraphArtifacts:
    """Everything featurize needs, precomputed once per training graph."""

    scores: NodeScores
    svd: SvdFactors
    components: ComponentLabels


def precompute_artifacts(g: DiGraph, cfg: HeuristicConfig | None = None) -> GraphArtifacts:
    cfg = cfg or HeuristicConfig()
    hub, auth = compute_hits(g, cfg)
    scores = NodeScores(
        pagerank=compute_pagerank(g, cfg),
        katz=compute_katz(g, cfg),
        hub=hub,
        authority=auth,
    )
    svd = compute_svd(g, cfg.svd_rank, cfg.svd_seed)
    comps = weakly_connected_components(g)
    return GraphArtifacts(scores=scores, svd=svd, components=comps)


def featurize_pairs(g: DiGraph, artifacts: GraphArtifacts, src: np.ndarray,
                    dst: np.ndarray, cfg: HeuristicConfig | None = None) -> np.ndarray:
    """Feature matrix (len(src), 56) for node pairs over a fixed graph.

    All artifacts must come from the same graph g (the training graph).
    """
    cfg = cfg or HeuristicConfig()
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if len(src) and (min(src.min(), dst.min()) < 0
                     or max(src.max(), dst.max()) >= g.node_count):
        raise ValueError("pair endpoint outside graph")
    k = artifacts.svd.U.shape[1]

    m = len(src)
    F = np.zeros((m, 32 + 4 * k), dtype=np.float64)
    if m == 0:
        return F

    topo = _pair_topology(g.out_indptr, g.out_indices, g.in_indptr, g.in_indices,
                          g.und_indptr, g.und_indices, src, dst,
                          cfg.path_max_depth, g.node_count)

    indeg = g.in_degrees().astype(np.float64)
    outdeg = g.out_degrees().astype(np.float64)
    sc = artifacts.scores

    F[:, 0:4] = topo[:, 0:4]                       # jaccard/cosine
    F[:, 4] = sc.pagerank[src]
    F[:, 5] = sc.pagerank[dst]
    F[:, 6] = np.where(topo[:, 8] < 0, cfg.missing_path_sentinel, topo[:, 8])
    F[:, 7] = (artifacts.components.label[src]
               == artifacts.components.label[dst]).astype(np.float64)
    F[:, 8] = topo[:, 7]                           # follows back
    F[:, 9] = topo[:, 6]                           # adamic-adar
    F[:, 10] = sc.katz[src]
    F[:, 11] = sc.katz[dst]
    F[:, 12] = sc.authority[src]
    F[:, 13] = sc.authority[dst]
    F[:, 14] = sc.hub[src]
    F[:, 15] = sc.hub[dst]
    F[:, 16] = indeg[src]
    F[:, 17] = outdeg[src]
    F[:, 18] = indeg[dst]
    F[:, 19] = outdeg[dst]
    F[:, 20] = topo[:, 4]
    F[:, 21] = topo[:, 5]

    w_in = 1.0 / np.sqrt(1.0 + indeg[dst])
    w_out = 1.0 / np.sqrt(1.0 + outdeg[src])
    F[:, 22] = w_in
    F[:, 23] = w_out
    F[:, 24] = w_in + w_out
    F[:, 25] = w_in * w_out
    F[:, 26] = 2.0 * w_in + w_out
    F[:, 27] = w_in + 2.0 * w_out

    U, V = artifacts.svd.U, artifacts.svd.V
    F[:, 28:28 + k] = U[src]
    F[:, 28 + k:28 + 2 * k] = U[dst]
    F[:, 28 + 2 * k:28 + 3 * k] = V[:, src].T
    F[:, 28 + 3 * k:28 + 4 * k] = V[:, dst].T
    F[:, 28 + 4 * k] = np.einsum("ij,ij->i", U[src], U[dst])
    F[:, 29 + 4 * k] = np.einsum("ij,ij->i", V[:, src].T, V[:, dst].T)

    F[:, 30 + 4 * k] = indeg[src] * indeg[dst]
    F[:, 31 + 4 * k] = outdeg[src] * outdeg[dst]

    if not np.isfinite(F).all():
        raise ValueError("non-finite heuristic feature computed")
    return F


def featurize_edge(g: DiGraph, scores: NodeScores, svd: SvdFactors,
                   comps: ComponentLabels, u: int, v: int,
                   cfg: HeuristicConfig | None = None) -> np.ndarray:
    """Single 56-entry heuristic vector for the candidate edge u->v."""
    g._check_node(u)
    g._check_node(v)
    artifacts = GraphArtifacts(scores=scores, svd=svd, components=comps)
    return featurize_pairs(g, artifacts,
                           np.array([u]), np.array([v]), cfg)[0]


def featurize_dataset(g: DiGraph, edges: list[LabeledEdge],
                      cfg: HeuristicConfig | None = None,
                      artifacts: GraphArtifacts | None = None
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Batch driver: (|edges| x 56) feature matrix plus the label vector.

    Precomputes centralities, SVD factors and components once (or reuses the
    given artifacts, e.g. to share one training graph across splits).
    """
    cfg = cfg or HeuristicConfig()
    if artifacts is None:
        artifacts = precompute_artifacts(g, cfg)
    src = np.array([e.src for e in edges], dtype=np.int64)
    dst = np.array([e.dst for e in edges], dtype=np.int64)
    y = np.array([e.label for e in edges], dtype=np.int64)
    if len(edges) == 0:
        return np.zeros((0, HEURISTIC_DIM)), y
    X = featurize_pairs(g, artifacts, src, dst, cfg)
    return X, y


def save_features_csv(path, X: np.ndarray, y: np.ndarray,
                      names: list[str] | None = None) -> None:
    """CSV with header h0..h{d-1},label; %.17g keeps float64 exact."""
    d = X.shape[1]
    header = ",".join(names if names is not None else [f"h{i}" for i in range(d)])
    data = np.column_stack([X, y.astype(np.float64)])
    np.savetxt(path, data, delimiter=",", header=header + ",label",
               comments="", fmt="%.17g")


def load_features_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        return np.zeros((0, 0)), np.zeros(0, dtype=np.int64)
    return data[:, :-1], data[:, -1].astype(np.int64)
