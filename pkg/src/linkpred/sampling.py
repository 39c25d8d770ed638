"""Train/test edge splitting and distance-filtered negative sampling.

The split removes positive edges into a test set only when neither endpoint
would drop to zero incident train edges, so the training graph keeps the full
node set. Negatives are node pairs at undirected distance >= 3 in the original
graph, sampled uniformly with rejection.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from linkpred.graph import DiGraph, gather_neighbors


class ShortfallWarning(UserWarning):
    """Requested sample size could not be met within the constraints."""


@dataclass(frozen=True)
class LabeledEdge:
    src: int
    dst: int
    label: int  # 1 = positive (existing edge), 0 = negative (absent pair)

    def __post_init__(self):
        if self.src == self.dst:
            raise ValueError("self-loop labeled edge")


@dataclass
class SplitDataset:
    """90/10 style split: a training graph plus labeled train/test edge sets."""

    train_graph: DiGraph
    train: list[LabeledEdge]
    test: list[LabeledEdge]
    seed: int
    test_fraction: float = 0.1
    pos_shortfall: int = 0
    neg_shortfall: int = 0
    allow_cross_component_negatives: bool = True  # infinite distance counts as >= 3


def _stage_seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def split_positive_edges(g: DiGraph, test_fraction: float, seed: int
                         ) -> tuple[np.ndarray, np.ndarray, int]:
    """Split the graph's edges into (train, test, shortfall).

    Edges are visited in seeded-shuffled order; an edge moves to the test set
    only while both endpoints still have at least 2 incident train edges, so
    no node loses its last edge. Stops at ceil(test_fraction * E). Returns
    edge arrays (K, 2) plus the count by which the target was missed.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    edges = g.edges()
    n_edges = len(edges)
    if n_edges == 0:
        raise ValueError("graph has no edges")
    target = math.ceil(test_fraction * n_edges)

    rng = np.random.default_rng(seed)
    order = rng.permutation(n_edges)

    incident = np.bincount(edges.reshape(-1), minlength=g.node_count)
    test_mask = np.zeros(n_edges, dtype=bool)
    taken = 0
    for i in order:
        if taken >= target:
            break
        u, v = edges[i]
        if incident[u] >= 2 and incident[v] >= 2:
            test_mask[i] = True
            incident[u] -= 1
            incident[v] -= 1
            taken += 1

    shortfall = target - taken
    if shortfall:
        warnings.warn(
            f"positive split shortfall: wanted {target} test edges, got {taken}",
            ShortfallWarning,
        )
    return edges[~test_mask], edges[test_mask], shortfall


def negative_pair_ok(g: DiGraph, u: int, v: int) -> bool:
    """Candidate-negative filter: distinct nodes, not an edge, and undirected
    distance >= 3 (a depth-2 undirected BFS from u must not reach v)."""
    if u == v or g.has_edge(u, v):
        return False
    first = g.und_neighbors(u)
    i = np.searchsorted(first, v)
    if i < len(first) and first[i] == v:
        return False
    if len(first):
        second = gather_neighbors(g.und_indptr, g.und_indices, first)
        if v in second:
            return False
    return True


def sample_negative_edges(g: DiGraph, count: int, seed: int
                          ) -> tuple[np.ndarray, int]:
    """Sample `count` distinct non-edges at undirected distance >= 3.

    Uniform-with-rejection over node pairs using a seeded RNG; pairs in
    disconnected components (infinite distance) are accepted. For undirected
    graphs pairs are canonicalized to u < v. Gives up after 100 * count
    attempts, returning what was found plus the shortfall.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if g.node_count == 0:
        raise ValueError("graph has no nodes")
    rng = np.random.default_rng(seed)
    found: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    budget = 100 * count
    attempts = 0
    while len(found) < count and attempts < budget:
        attempts += 1
        u = int(rng.integers(g.node_count))
        v = int(rng.integers(g.node_count))
        if not g.directed and u > v:
            u, v = v, u
        if (u, v) in seen:
            continue
        if negative_pair_ok(g, u, v):
            seen.add((u, v))
            found.append((u, v))

    shortfall = count - len(found)
    if shortfall:
        warnings.warn(
            f"negative sampling shortfall: wanted {count}, got {len(found)} "
            f"after {attempts} attempts",
            ShortfallWarning,
        )
    pairs = np.array(found, dtype=np.int64).reshape(-1, 2)
    return pairs, shortfall


def assemble_dataset(g: DiGraph, test_fraction: float, seed: int) -> SplitDataset:
    """Full data preparation: positive split, negative sampling sized to the
    positive edge count, and a matching train/test split of the negatives.

    The training graph is rebuilt from train positives over the full node set.
    Deterministic for a given (graph, fraction, seed).
    """
    s_split, s_neg, s_shuffle = _stage_seeds(seed, 3)

    train_pos, test_pos, pos_short = split_positive_edges(g, test_fraction, s_split)
    total_pos = len(train_pos) + len(test_pos)

    negs, neg_short = sample_negative_edges(g, total_pos, s_neg)
    rng = np.random.default_rng(s_shuffle)
    negs = negs[rng.permutation(len(negs))]
    frac_real = len(test_pos) / total_pos if total_pos else 0.0
    n_neg_test = int(round(len(negs) * frac_real))
    test_neg, train_neg = negs[:n_neg_test], negs[n_neg_test:]

    train_graph = DiGraph(g.node_count, train_pos, g.directed, raw_ids=g.raw_ids)

    def to_labeled(pos: np.ndarray, neg: np.ndarray) -> list[LabeledEdge]:
        out = [LabeledEdge(int(u), int(v), 1) for u, v in pos]
        out += [LabeledEdge(int(u), int(v), 0) for u, v in neg]
        return out

    return SplitDataset(
        train_graph=train_graph,
        train=to_labeled(train_pos, train_neg),
        test=to_labeled(test_pos, test_neg),
        seed=seed,
        test_fraction=test_fraction,
        pos_shortfall=pos_short,
        neg_shortfall=neg_short,
    )


# -- persistence ----------------------------------------------------------------

def save_labeled_edges(path: str | Path, edges: list[LabeledEdge], seed: int,
                       test_fraction: float, extra: dict | None = None) -> None:
    """Write `src dst label` lines behind a header recording provenance."""
    n_pos = sum(e.label for e in edges)
    fields = {
        "seed": seed,
        "fraction": test_fraction,
        "positives": n_pos,
        "negatives": len(edges) - n_pos,
        "allow_cross_component_negatives": 1,
    }
    if extra:
        fields.update(extra)
    header = " ".join(f"{k}={v}" for k, v in fields.items())
    with open(path, "w") as f:
        f.write(f"# {header}\n")
        for e in edges:
            f.write(f"{e.src} {e.dst} {e.label}\n")


def load_labeled_edges(path: str | Path) -> tuple[list[LabeledEdge], dict]:
    """Inverse of save_labeled_edges; returns (edges, header fields)."""
    edges: list[LabeledEdge] = []
    meta: dict = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
                continue
            u, v, y = line.split()
            edges.append(LabeledEdge(int(u), int(v), int(y)))
    return edges, meta
