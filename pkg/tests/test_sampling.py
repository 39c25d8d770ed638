"""Edge splitting and negative sampling: contracts, oracles, seed stability."""

import warnings
from collections import deque

import numpy as np
import pytest

from linkpred.graph import DiGraph
from linkpred.sampling import (
    LabeledEdge,
    ShortfallWarning,
    assemble_dataset,
    load_labeled_edges,
    negative_pair_ok,
    sample_negative_edges,
    save_labeled_edges,
    split_positive_edges,
)

from conftest import graph_from_text, synthetic_social_graph


def und_distance_oracle(g: DiGraph, src: int, dst: int) -> int | None:
    """Independent undirected BFS over python sets."""
    adj = {u: set(g.und_neighbors(u).tolist()) for u in range(g.node_count)}
    if src == dst:
        return 0
    seen = {src}
    q = deque([(src, 0)])
    while q:
        node, d = q.popleft()
        for w in adj[node]:
            if w == dst:
                return d + 1
            if w not in seen:
                seen.add(w)
                q.append((w, d + 1))
    return None


# -- split_positive_edges -----------------------------------------------------

def test_split_cycle_keeps_every_node(directed_cycle):
    g = directed_cycle(10)
    train, test, shortfall = split_positive_edges(g, 0.1, seed=3)
    assert shortfall == 0
    assert len(test) == 1 and len(train) == 9
    incident = np.bincount(train.reshape(-1), minlength=10)
    assert (incident >= 1).all()


def test_split_star_cannot_remove_any_edge(star_graph):
    # oracle: enumerate single-edge removals; each one strands a leaf
    edges = star_graph.edges()
    for i in range(len(edges)):
        rest = np.delete(edges, i, axis=0)
        incident = np.bincount(rest.reshape(-1), minlength=6)
        assert (incident == 0).any()
    with pytest.warns(ShortfallWarning):
        train, test, shortfall = split_positive_edges(star_graph, 0.4, seed=0)
    assert len(test) == 0
    assert shortfall == 2  # target ceil(0.4 * 5) = 2


def test_split_deterministic_and_disjoint():
    g = synthetic_social_graph(120, seed=5)
    a = split_positive_edges(g, 0.1, seed=11)
    b = split_positive_edges(g, 0.1, seed=11)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    train = {tuple(e) for e in a[0].tolist()}
    test = {tuple(e) for e in a[1].tolist()}
    assert not train & test
    assert len(train) + len(test) == g.edge_count


def test_split_rejects_bad_fraction(directed_cycle):
    with pytest.raises(ValueError):
        split_positive_edges(directed_cycle(4), 0.0, seed=0)
    with pytest.raises(ValueError):
        split_positive_edges(directed_cycle(4), 1.0, seed=0)


# -- sample_negative_edges ----------------------------------------------------

def test_negatives_count_zero(triangle):
    pairs, shortfall = sample_negative_edges(triangle, 0, seed=1)
    assert len(pairs) == 0 and shortfall == 0


def test_negative_filter_on_path_graph():
    # undirected path 0-1-2-3-4: (0,4) at distance 4 passes, (0,2) at 2 fails
    g = graph_from_text("0 1\n1 2\n2 3\n3 4", directed=False)
    assert negative_pair_ok(g, 0, 4)
    assert not negative_pair_ok(g, 0, 2)
    assert not negative_pair_ok(g, 0, 1)
    assert not negative_pair_ok(g, 2, 2)
    assert und_distance_oracle(g, 0, 4) == 4
    assert und_distance_oracle(g, 0, 2) == 2


def test_negatives_match_positive_count():
    g = synthetic_social_graph(150, seed=9)
    pairs, shortfall = sample_negative_edges(g, g.edge_count, seed=2)
    assert shortfall == 0
    assert len(pairs) == g.edge_count


def test_negatives_distance_oracle_and_distinct():
    for seed in range(3):
        g = synthetic_social_graph(90, seed=seed)
        pairs, _ = sample_negative_edges(g, 60, seed=seed + 100)
        seen = set()
        for u, v in pairs.tolist():
            assert (u, v) not in seen
            seen.add((u, v))
            assert not g.has_edge(u, v)
            d = und_distance_oracle(g, u, v)
            assert d is None or d >= 3


def test_negatives_shortfall_on_dense_graph():
    # complete graph: every pair is an edge, nothing qualifies
    n = 6
    arcs = [(u, v) for u in range(n) for v in range(n) if u != v]
    g = DiGraph(n, arcs, directed=True)
    with pytest.warns(ShortfallWarning):
        pairs, shortfall = sample_negative_edges(g, 5, seed=0)
    assert len(pairs) == 0 and shortfall == 5


def test_negatives_deterministic():
    g = synthetic_social_graph(100, seed=3)
    a, _ = sample_negative_edges(g, 40, seed=7)
    b, _ = sample_negative_edges(g, 40, seed=7)
    assert np.array_equal(a, b)


def test_negatives_undirected_canonical():
    g = graph_from_text("0 1\n1 2\n2 3\n3 4\n4 5\n5 6", directed=False)
    pairs, _ = sample_negative_edges(g, 4, seed=5)
    assert all(u < v for u, v in pairs.tolist())


# -- assemble_dataset -----------------------------------------------------------

def test_assemble_cycle_counts(directed_cycle):
    ds = assemble_dataset(directed_cycle(10), 0.1, seed=21)
    train_pos = sum(e.label for e in ds.train)
    test_pos = sum(e.label for e in ds.test)
    assert train_pos == 9 and test_pos == 1
    assert len(ds.train) - train_pos == 9  # negatives mirror positives
    assert len(ds.test) - test_pos == 1


def test_assemble_deterministic(directed_cycle):
    a = assemble_dataset(directed_cycle(10), 0.1, seed=4)
    b = assemble_dataset(directed_cycle(10), 0.1, seed=4)
    assert a.train == b.train and a.test == b.test


def test_assemble_invariants_many_seeds():
    """Split invariants across 100 seeded runs on 5 synthetic graphs."""
    graphs = [synthetic_social_graph(40 + 15 * i, seed=i, m=3) for i in range(4)]
    graphs.append(DiGraph(30, [(i, (i + 1) % 30) for i in range(30)], directed=True))
    for gi, g in enumerate(graphs):
        full_edges = {tuple(e) for e in g.edges().tolist()}
        for seed in range(gi * 20, gi * 20 + 20):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ShortfallWarning)
                ds = assemble_dataset(g, 0.1, seed=seed)
            # node preservation
            assert ds.train_graph.node_count == g.node_count
            incident = np.bincount(
                np.array([(e.src, e.dst) for e in ds.train if e.label]).reshape(-1),
                minlength=g.node_count)
            assert (incident >= 1).all()
            # test positives absent from the train graph
            for e in ds.test:
                if e.label:
                    assert not ds.train_graph.has_edge(e.src, e.dst)
                    assert (e.src, e.dst) in full_edges
            # disjointness
            train_set = {(e.src, e.dst, e.label) for e in ds.train}
            test_set = {(e.src, e.dst, e.label) for e in ds.test}
            assert not train_set & test_set
            # balance within each side
            for side in (ds.train, ds.test):
                pos = sum(e.label for e in side)
                neg = len(side) - pos
                if pos and neg:
                    assert 0.9 <= pos / neg <= 1.1


def test_assemble_negative_distance_oracle():
    g = synthetic_social_graph(70, seed=12)
    ds = assemble_dataset(g, 0.1, seed=0)
    for e in ds.train + ds.test:
        if e.label == 0:
            d = und_distance_oracle(g, e.src, e.dst)
            assert d is None or d >= 3


# -- persistence ------------------------------------------------------------------

def test_labeled_edge_rejects_self_loop():
    with pytest.raises(ValueError):
        LabeledEdge(3, 3, 1)


def test_save_load_round_trip(tmp_path):
    edges = [LabeledEdge(0, 1, 1), LabeledEdge(2, 5, 0)]
    p = tmp_path / "train.txt"
    save_labeled_edges(p, edges, seed=9, test_fraction=0.1)
    loaded, meta = load_labeled_edges(p)
    assert loaded == edges
    assert meta["seed"] == "9"
    assert meta["positives"] == "1" and meta["negatives"] == "1"
    assert meta["allow_cross_component_negatives"] == "1"
