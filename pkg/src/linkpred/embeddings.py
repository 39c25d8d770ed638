"""Random-walk node embeddings and edge representations.

Walks follow out-edges (a sink truncates its walk), with optional
second-order return/in-out biases; the skip-gram trainer is a from-scratch
SGNS loop over the walk corpus with a unigram^0.75 negative table.
Single-threaded training is bit-reproducible; multi-threaded training does
unsynchronized parameter updates and trades determinism for speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange

from linkpred.graph import DiGraph
from linkpred.heuristics import HEURISTIC_DIM

MIN_LR = 1e-4
NEGATIVE_TABLE_SIZE = 1_000_000

# java-style 48-bit LCG, the word2vec negative-sampling convention
_LCG_MULT = np.uint64(25214903917)
_LCG_ADD = np.uint64(11)
_SEED_STRIDE = np.uint64(0x9E3779B97F4A7C15)


@dataclass
class WalkConfig:
    walks_per_node: int = 10
    walk_length: int = 80
    p: float = 1.0  # return bias: weight 1/p to step back to the previous node
    q: float = 1.0  # in-out bias: weight 1/q to leave the previous neighborhood
    seed: int = 0

    def __post_init__(self):
        if self.p <= 0 or self.q <= 0:
            raise ValueError("p and q must be positive")
        if self.walk_length < 2:
            raise ValueError("walk_length must be at least 2")
        if self.walks_per_node < 1:
            raise ValueError("walks_per_node must be at least 1")


@dataclass
class SkipGramConfig:
    dim: int = 64
    window: int = 5
    negatives_per_positive: int = 5
    initial_lr: float = 0.025  # decays linearly to MIN_LR over all tokens
    epochs: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.window < 1 or self.negatives_per_positive < 1:
            raise ValueError("dim, window and negatives_per_positive must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.initial_lr <= 0:
            raise ValueError("initial_lr must be positive")


@dataclass
class EmbeddingMatrix:
    """Center vectors feed downstream models; context vectors exist only so
    training can resume or be inspected."""

    vectors: np.ndarray
    context_vectors: np.ndarray
    epoch_losses: np.ndarray | None = None

    def __post_init__(self):
        if self.vectors.shape != self.context_vectors.shape:
            raise ValueError("center and context shapes differ")
        if not np.isfinite(self.vectors).all():
            raise ValueError("non-finite embedding entries")

    @property
    def node_count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


# -- walk kernels --------------------------------------------------------------------

@njit(cache=True)
def _walks_first_order(indptr, indices, starts, walk_length, seed):
    n_walks = len(starts)
    out = np.full((n_walks, walk_length), -1, dtype=np.int64)
    lengths = np.empty(n_walks, dtype=np.int64)
    np.random.seed(seed)
    for w in range(n_walks):
        cur = starts[w]
        out[w, 0] = cur
        n = 1
        for _ in range(walk_length - 1):
            lo = indptr[cur]
            deg = indptr[cur + 1] - lo
            if deg == 0:
                break
            cur = indices[lo + np.int64(np.random.random() * deg)]
            out[w, n] = cur
            n += 1
        lengths[w] = n
    return out, lengths


@njit(cache=True)
def _has_arc(indptr, indices, row, value):
    lo, hi = indptr[row], indptr[row + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        if indices[mid] < value:
            lo = mid + 1
        else:
            hi = mid
    return lo < indptr[row + 1] and indices[lo] == value


@njit(cache=True)
def _walks_second_order(indptr, indices, starts, walk_length, p, q, seed):
    n_walks = len(starts)
    out = np.full((n_walks, walk_length), -1, dtype=np.int64)
    lengths = np.empty(n_walks, dtype=np.int64)
    max_deg = 0
    for v in range(len(indptr) - 1):
        d = indptr[v + 1] - indptr[v]
        if d > max_deg:
            max_deg = d
    cum = np.empty(max_deg, dtype=np.float64)
    np.random.seed(seed)
    for w in range(n_walks):
        cur = starts[w]
        prev = np.int64(-1)
        out[w, 0] = cur
        n = 1
        for _ in range(walk_length - 1):
            lo = indptr[cur]
            deg = indptr[cur + 1] - lo
            if deg == 0:
                break
            if prev < 0:
                nxt = indices[lo + np.int64(np.random.random() * deg)]
            else:
                total = 0.0
                for j in range(deg):
                    x = indices[lo + j]
                    if x == prev:
                        weight = 1.0 / p
                    elif _has_arc(indptr, indices, prev, x):
                        weight = 1.0
                    else:
                        weight = 1.0 / q
                    total += weight
                    cum[j] = total
                r = np.random.random() * total
                j = 0
                while cum[j] < r:
                    j += 1
                nxt = indices[lo + j]
            out[w, n] = nxt
            n += 1
            prev = cur
            cur = nxt
        lengths[w] = n
    return out, lengths


def generate_walks(g: DiGraph, cfg: WalkConfig) -> list[np.ndarray]:
    """walks_per_node truncated random walks from every node, following
    out-edges, in a freshly shuffled node order each round."""
    rng = np.random.default_rng(cfg.seed)
    starts = np.concatenate([rng.permutation(g.node_count)
                             for _ in range(cfg.walks_per_node)])
    kernel_seed = int(rng.integers(0, 2 ** 31 - 1))
    if cfg.p == 1.0 and cfg.q == 1.0:
        mat, lengths = _walks_first_order(g.out_indptr, g.out_indices, starts,
                                          cfg.walk_length, kernel_seed)
    else:
        mat, lengths = _walks_second_order(g.out_indptr, g.out_indices, starts,
                                           cfg.walk_length, cfg.p, cfg.q,
                                           kernel_seed)
    return [mat[i, :lengths[i]].copy() for i in range(len(starts))]


# -- skip-gram with negative sampling --------------------------------------------------

@njit(cache=True)
def _train_walk(tokens, start, end, vectors, context, table, window,
                negatives, initial_lr, min_lr, total_tokens, global_offset,
                state):
    """SGNS updates for one walk; returns (summed loss, pair count)."""
    dim = vectors.shape[1]
    table_len = np.uint64(table.shape[0])
    grad_u = np.empty(dim, dtype=np.float64)
    loss = 0.0
    pairs = 0
    for i in range(start, end):
        c = tokens[i]
        frac = (global_offset + i - start) / total_tokens
        lr = initial_lr * (1.0 - frac)
        if lr < min_lr:
            lr = min_lr
        lo = i - window if i - window >= start else start
        hi = i + window if i + window < end else end - 1
        for j in range(lo, hi + 1):
            if j == i:
                continue
            o = tokens[j]
            for d in range(dim):
                grad_u[d] = 0.0
            # positive target
            dot = 0.0
            for d in range(dim):
                dot += vectors[c, d] * context[o, d]
            if dot > 35.0:
                dot = 35.0
            elif dot < -35.0:
                dot = -35.0
            sig = 1.0 / (1.0 + math.exp(-dot))
            loss -= math.log(sig)
            g_pos = lr * (1.0 - sig)
            for d in range(dim):
                grad_u[d] += g_pos * context[o, d]
                context[o, d] += g_pos * vectors[c, d]
            # sampled negatives
            for _ in range(negatives):
                state = state * _LCG_MULT + _LCG_ADD
                n = table[(state >> np.uint64(16)) % table_len]
                if n == o:
                    continue
                dot = 0.0
                for d in range(dim):
                    dot += vectors[c, d] * context[n, d]
                if dot > 35.0:
                    dot = 35.0
                elif dot < -35.0:
                    dot = -35.0
                sig = 1.0 / (1.0 + math.exp(-dot))
                loss -= math.log(1.0 - sig + 1e-12)
                g_neg = lr * (0.0 - sig)
                for d in range(dim):
                    grad_u[d] += g_neg * context[n, d]
                    context[n, d] += g_neg * vectors[c, d]
            for d in range(dim):
                vectors[c, d] += grad_u[d]
            pairs += 1
    return loss, pairs


@njit(cache=True)
def _walk_state(base_seed, walk_index):
    state = np.uint64(base_seed) + np.uint64(walk_index) * _SEED_STRIDE
    for _ in range(3):
        state = state * _LCG_MULT + _LCG_ADD
    return state


@njit(cache=True)
def _sgns_epoch_seq(tokens, offsets, vectors, context, table, window,
                    negatives, initial_lr, min_lr, total_tokens,
                    epoch_token_offset, epoch_walk_offset, base_seed):
    loss = 0.0
    pairs = 0
    for w in range(len(offsets) - 1):
        state = _walk_state(base_seed, epoch_walk_offset + w)
        l, c = _train_walk(tokens, offsets[w], offsets[w + 1], vectors,
                           context, table, window, negatives, initial_lr,
                           min_lr, total_tokens,
                           epoch_token_offset + offsets[w], state)
        loss += l
        pairs += c
    return loss, pairs


@njit(cache=True, parallel=True)
def _sgns_epoch_par(tokens, offsets, vectors, context, table, window,
                    negatives, initial_lr, min_lr, total_tokens,
                    epoch_token_offset, epoch_walk_offset, base_seed):
    n_walks = len(offsets) - 1
    losses = np.zeros(n_walks)
    counts = np.zeros(n_walks, dtype=np.int64)
    for w in prange(n_walks):
        state = _walk_state(base_seed, epoch_walk_offset + w)
        l, c = _train_walk(tokens, offsets[w], offsets[w + 1], vectors,
                           context, table, window, negatives, initial_lr,
                           min_lr, total_tokens,
                           epoch_token_offset + offsets[w], state)
        losses[w] = l
        counts[w] = c
    return losses.sum(), counts.sum()


def _negative_table(tokens: np.ndarray, node_count: int) -> np.ndarray:
    """Sampling table over unigram counts raised to 0.75."""
    weights = np.bincount(tokens, minlength=node_count).astype(np.float64) ** 0.75
    cum = np.cumsum(weights)
    cum /= cum[-1]
    grid = (np.arange(NEGATIVE_TABLE_SIZE) + 0.5) / NEGATIVE_TABLE_SIZE
    return np.searchsorted(cum, grid).astype(np.int64)


def train_skipgram(walks: list[np.ndarray], cfg: SkipGramConfig,
                   node_count: int | None = None,
                   threads: int = 1) -> EmbeddingMatrix:
    """Skip-gram with negative sampling over a walk corpus.

    For every (center, context) pair within the window the loss
    -log sigmoid(u_c . v_o) - sum_n log sigmoid(-u_c . v_n) is minimized by
    SGD with a linearly decaying learning rate; negatives come from the
    unigram^0.75 corpus distribution. threads=1 is deterministic; more
    threads run hogwild updates over whole walks.
    """
    if not walks or all(len(w) == 0 for w in walks):
        raise ValueError("walk corpus is empty")
    tokens = np.concatenate(walks).astype(np.int64)
    lengths = np.array([len(w) for w in walks], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    inferred = int(tokens.max()) + 1
    if node_count is None:
        node_count = inferred
    elif node_count < inferred:
        raise ValueError("node_count smaller than largest walk token")

    rng = np.random.default_rng(cfg.seed)
    vectors = ((rng.random((node_count, cfg.dim), dtype=np.float32) - 0.5)
               / cfg.dim)
    context = np.zeros_like(vectors)
    table = _negative_table(tokens, node_count)
    base_seed = int(rng.integers(0, 2 ** 62))

    total_tokens = len(tokens) * cfg.epochs
    n_walks = len(walks)
    epoch_losses = np.zeros(cfg.epochs)
    threads = max(1, min(threads, numba.config.NUMBA_NUM_THREADS))
    for epoch in range(cfg.epochs):
        args = (tokens, offsets, vectors, context, table, cfg.window,
                cfg.negatives_per_positive, cfg.initial_lr, MIN_LR,
                total_tokens, epoch * len(tokens), epoch * n_walks, base_seed)
        if threads == 1:
            loss, pairs = _sgns_epoch_seq(*args)
        else:
            numba.set_num_threads(threads)
            loss, pairs = _sgns_epoch_par(*args)
        epoch_losses[epoch] = loss / max(pairs, 1)
    return EmbeddingMatrix(vectors=vectors, context_vectors=context,
                           epoch_losses=epoch_losses)


# -- edge representations ---------------------------------------------------------------

def edge_embedding(emb: EmbeddingMatrix, u: int, v: int) -> np.ndarray:
    """Hadamard product of the two nodes' center vectors."""
    n = emb.node_count
    if not (0 <= u < n and 0 <= v < n):
        raise ValueError("node id outside embedding matrix")
    return emb.vectors[u] * emb.vectors[v]


def combine_features(h: np.ndarray, r: np.ndarray,
                     dim: int | None = None) -> np.ndarray:
    """Concatenate a 56-entry heuristic vector with an edge embedding,
    heuristics first."""
    h = np.asarray(h, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if h.shape != (HEURISTIC_DIM,):
        raise ValueError(f"heuristic vector must have {HEURISTIC_DIM} entries")
    if dim is None:
        dim = len(r)
    if len(r) != dim:
        raise ValueError(f"edge embedding has {len(r)} entries, declared {dim}")
    return np.concatenate([h, r])


# -- persistence ------------------------------------------------------------------------

def save_embeddings(path, emb: EmbeddingMatrix) -> None:
    """Word-vector text layout: `N dim` header, then id plus dim reals."""
    with open(path, "w") as fh:
        fh.write(f"{emb.node_count} {emb.dim}\n")
        for i, row in enumerate(emb.vectors):
            vals = " ".join(f"{x:.9g}" for x in row)
            fh.write(f"{i} {vals}\n")


def load_embeddings(path) -> EmbeddingMatrix:
    with open(path) as fh:
        first = fh.readline().split()
        if len(first) != 2:
            raise ValueError("embedding file must start with 'N dim'")
        n, dim = int(first[0]), int(first[1])
        vectors = np.zeros((n, dim), dtype=np.float32)
        seen = 0
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise ValueError("embedding row has wrong arity")
            idx = int(parts[0])
            vectors[idx] = [float(x) for x in parts[1:]]
            seen += 1
    if seen != n:
        raise ValueError(f"expected {n} embedding rows, found {seen}")
    return EmbeddingMatrix(vectors=vectors, context_vectors=np.zeros_like(vectors))
