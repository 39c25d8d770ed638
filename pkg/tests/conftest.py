"""Shared fixtures: tiny hand graphs, a synthetic social-graph generator,
and discovery of real SNAP dataset files (optional, see README)."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from linkpred.graph import DiGraph, build_graph, parse_edge_list


def dataset_dir() -> Path:
    return Path(os.environ.get("LINKPRED_DATA_DIR", Path(__file__).parent.parent / "data"))


def find_dataset(*names: str) -> Path | None:
    base = dataset_dir()
    for name in names:
        p = base / name
        if p.exists():
            return p
    return None


def require_dataset(*names: str) -> Path:
    p = find_dataset(*names)
    if p is None:
        pytest.skip(
            f"dataset not found (looked for {', '.join(names)} under {dataset_dir()}); "
            "download from SNAP and place there, see README"
        )
    return p


def synthetic_social_graph(n: int, seed: int, m: int = 5, reciprocity: float = 0.3,
                           directed: bool = True) -> DiGraph:
    """Hub-heavy directed graph via preferential attachment.

    Each new node links to m existing nodes drawn with probability
    proportional to in-degree + 1; a fraction of edges is reciprocated so
    follows-back structure exists. Deterministic for a given seed.
    """
    rng = np.random.default_rng(seed)
    n0 = m + 1
    src: list[int] = []
    dst: list[int] = []
    for u in range(n0):
        for v in range(n0):
            if u != v:
                src.append(u)
                dst.append(v)
    indeg = np.zeros(n, dtype=np.float64)
    indeg[:n0] = n0 - 1
    for u in range(n0, n):
        weights = indeg[:u] + 1.0
        targets = rng.choice(u, size=min(m, u), replace=False, p=weights / weights.sum())
        for v in targets:
            src.append(u)
            dst.append(int(v))
            indeg[v] += 1
            if rng.random() < reciprocity:
                src.append(int(v))
                dst.append(u)
                indeg[u] += 1
    arcs = np.column_stack([np.asarray(src), np.asarray(dst)])
    return DiGraph(n, arcs, directed=directed)


def graph_from_text(text: str, directed: bool = True) -> DiGraph:
    return build_graph(parse_edge_list(text, directed=directed))


@pytest.fixture
def triangle() -> DiGraph:
    # 0->1, 0->2, 2->1
    return DiGraph(3, [(0, 1), (0, 2), (2, 1)], directed=True)


@pytest.fixture
def directed_cycle():
    def make(n: int) -> DiGraph:
        arcs = [(i, (i + 1) % n) for i in range(n)]
        return DiGraph(n, arcs, directed=True)
    return make


@pytest.fixture
def star_graph() -> DiGraph:
    # center 0 -> leaves 1..5
    return DiGraph(6, [(0, i) for i in range(1, 6)], directed=True)
