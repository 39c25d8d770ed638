"""Directed graph core: SNAP edge-list parsing, immutable CSR graphs, BFS,
and weakly connected components.

Graphs are stored as sorted CSR adjacency (out, in, and an undirected union
view) over dense node ids 0..N-1. All arrays are frozen after construction,
so a graph can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, TextIO

import numpy as np


class ParseError(ValueError):
    """Malformed edge-list input; carries the 1-based line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class RawEdgeList:
    """Edge pairs exactly as read from a file. May contain duplicates and
    self-loops; cleaning happens at graph build."""

    edges: np.ndarray  # (E, 2) int64 of (source, destination) raw ids
    directed: bool

    def __len__(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class ComponentLabels:
    """Per-node component id for the undirected (weak) connectivity relation."""

    label: np.ndarray  # (N,) int64, contiguous ids from 0
    component_count: int


def parse_edge_list(text: str | Iterable[str] | TextIO, directed: bool = True) -> RawEdgeList:
    """Parse SNAP edge-list text: '#' comment lines, two whitespace-separated
    integer tokens per data line.

    Accepts a string, an open text file, or any iterable of lines. Raises
    ParseError with the offending line number on malformed input. Self-loops
    and duplicates are retained here (the parse stage does not clean).
    """
    if isinstance(text, str):
        lines: Iterable[str] = text.splitlines()
    else:
        lines = text

    src: list[int] = []
    dst: list[int] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(lineno, f"expected 2 integer tokens, got {len(parts)}: {raw!r}")
        try:
            u = int(parts[0])
            v = int(parts[1])
        except ValueError:
            raise ParseError(lineno, f"non-integer token in {raw!r}") from None
        src.append(u)
        dst.append(v)

    edges = np.empty((len(src), 2), dtype=np.int64)
    edges[:, 0] = src
    edges[:, 1] = dst
    edges.setflags(write=False)
    return RawEdgeList(edges=edges, directed=directed)


def _build_csr(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sorted CSR (indptr, indices) from arc arrays. Arcs must be pre-deduped."""
    order = np.lexsort((dst, src))
    indices = dst[order].astype(np.int64)
    counts = np.bincount(src, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, indices


def _dedupe_arcs(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    keep = src != dst
    src, dst = src[keep], dst[keep]
    code = src.astype(np.int64) * n + dst
    code = np.unique(code)
    return code // n, code % n


class DiGraph:
    """Immutable dense-indexed directed graph.

    Adjacency is kept three ways: out-edges, in-edges, and the undirected
    union of both (used by weak components, distance filters, and
    common-neighborhood features). For a graph built with directed=False the
    out and in views are identical and symmetric.
    """

    __slots__ = (
        "node_count", "directed", "id_map", "raw_ids",
        "out_indptr", "out_indices", "in_indptr", "in_indices",
        "und_indptr", "und_indices",
    )

    def __init__(self, node_count: int, arcs: np.ndarray, directed: bool,
                 raw_ids: Optional[np.ndarray] = None):
        """Build from cleaned-or-not dense arcs (A, 2). Self-loops are dropped
        and duplicates collapsed; for undirected graphs each arc is inserted
        in both directions. Prefer build_graph() for raw-id input.
        """
        n = int(node_count)
        if n < 0:
            raise ValueError("node_count must be non-negative")
        arcs = np.asarray(arcs, dtype=np.int64).reshape(-1, 2)
        if len(arcs) and (arcs.min() < 0 or arcs.max() >= n):
            raise ValueError("arc endpoint outside 0..node_count-1")

        src, dst = arcs[:, 0], arcs[:, 1]
        if not directed and len(src):
            src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
        if len(src):
            src, dst = _dedupe_arcs(n, src, dst)

        self.node_count = n
        self.directed = bool(directed)
        self.out_indptr, self.out_indices = _build_csr(n, src, dst)
        self.in_indptr, self.in_indices = _build_csr(n, dst, src)
        if directed and len(src):
            u_src = np.concatenate([src, dst])
            u_dst = np.concatenate([dst, src])
            u_src, u_dst = _dedupe_arcs(n, u_src, u_dst)
            self.und_indptr, self.und_indices = _build_csr(n, u_src, u_dst)
        else:
            self.und_indptr, self.und_indices = self.out_indptr, self.out_indices

        if raw_ids is None:
            raw_ids = np.arange(n, dtype=np.int64)
        self.raw_ids = np.asarray(raw_ids, dtype=np.int64)
        self.id_map = {int(r): i for i, r in enumerate(self.raw_ids)}

        for a in (self.out_indptr, self.out_indices, self.in_indptr,
                  self.in_indices, self.und_indptr, self.und_indices, self.raw_ids):
            a.setflags(write=False)

    # -- queries ------------------------------------------------------------

    @property
    def arc_count(self) -> int:
        """Stored directed arcs (for undirected graphs, twice the edge count)."""
        return len(self.out_indices)

    @property
    def edge_count(self) -> int:
        """Logical edges: arcs if directed, unordered pairs if undirected."""
        return self.arc_count if self.directed else self.arc_count // 2

    def out_neighbors(self, u: int) -> np.ndarray:
        return self.out_indices[self.out_indptr[u]:self.out_indptr[u + 1]]

    def in_neighbors(self, u: int) -> np.ndarray:
        return self.in_indices[self.in_indptr[u]:self.in_indptr[u + 1]]

    def und_neighbors(self, u: int) -> np.ndarray:
        return self.und_indices[self.und_indptr[u]:self.und_indptr[u + 1]]

    def out_degrees(self) -> np.ndarray:
        return np.diff(self.out_indptr)

    def in_degrees(self) -> np.ndarray:
        return np.diff(self.in_indptr)

    def und_degrees(self) -> np.ndarray:
        return np.diff(self.und_indptr)

    def has_edge(self, u: int, v: int) -> bool:
        """True iff arc u->v is present (binary search in the sorted row)."""
        row = self.out_neighbors(u)
        i = np.searchsorted(row, v)
        return i < len(row) and row[i] == v

    def has_und_edge(self, u: int, v: int) -> bool:
        row = self.und_neighbors(u)
        i = np.searchsorted(row, v)
        return i < len(row) and row[i] == v

    def edges(self) -> np.ndarray:
        """Logical edge list (E, 2) in sorted dense order. For undirected
        graphs each pair appears once with u < v."""
        n = self.node_count
        src = np.repeat(np.arange(n, dtype=np.int64), np.diff(self.out_indptr))
        pairs = np.column_stack([src, self.out_indices])
        if not self.directed:
            pairs = pairs[pairs[:, 0] < pairs[:, 1]]
        return pairs

    def _check_node(self, u: int) -> None:
        if not (0 <= u < self.node_count):
            raise ValueError(f"node id {u} outside 0..{self.node_count - 1}")


def build_graph(raw: RawEdgeList) -> DiGraph:
    """Clean a raw edge list into a DiGraph.

    Raw ids are mapped to dense 0..N-1 in first-appearance order (reading
    pairs left to right, line by line), then self-loops are dropped and
    duplicate edges collapsed. Raises ValueError on an empty edge list.
    """
    if len(raw.edges) == 0:
        raise ValueError("empty edge list: a graph with zero edges is unusable")

    flat = raw.edges.reshape(-1)
    uniq, first_pos = np.unique(flat, return_index=True)
    order = np.argsort(first_pos, kind="stable")
    raw_ids = uniq[order]
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[order] = np.arange(len(uniq))
    dense_flat = rank[np.searchsorted(uniq, flat)]
    arcs = dense_flat.reshape(-1, 2)
    return DiGraph(len(raw_ids), arcs, raw.directed, raw_ids=raw_ids)


def gather_neighbors(indptr: np.ndarray, indices: np.ndarray,
                     frontier: np.ndarray) -> np.ndarray:
    """Concatenated neighbor lists of all frontier nodes, fully vectorized."""
    starts = indptr[frontier]
    lens = indptr[frontier + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return indices[:0]
    # positions within the concatenation, shifted to each row's start
    offsets = np.repeat(np.cumsum(lens) - lens, lens)
    idx = np.arange(total, dtype=np.int64) - offsets + np.repeat(starts, lens)
    return indices[idx]


def bfs_distance(g: DiGraph, src: int, dst: int, max_depth: Optional[int] = None,
                 exclude_direct_edge: bool = False,
                 ignore_direction: bool = False) -> Optional[int]:
    """Shortest-path length from src to dst, or None if unreachable within
    max_depth (None = unbounded).

    Follows out-edges unless ignore_direction. With exclude_direct_edge the
    one-hop transition src->dst is barred, so the result is the length of the
    shortest alternative path.
    """
    g._check_node(src)
    g._check_node(dst)
    if src == dst:
        return 0
    if ignore_direction:
        indptr, indices = g.und_indptr, g.und_indices
    else:
        indptr, indices = g.out_indptr, g.out_indices

    cap = g.node_count if max_depth is None else int(max_depth)
    visited = np.zeros(g.node_count, dtype=bool)
    visited[src] = True
    frontier = np.array([src], dtype=np.int64)
    depth = 0
    while len(frontier) and depth < cap:
        nbrs = gather_neighbors(indptr, indices, frontier)
        if depth == 0 and exclude_direct_edge:
            nbrs = nbrs[nbrs != dst]
        nbrs = nbrs[~visited[nbrs]]
        if len(nbrs) == 0:
            return None
        visited[nbrs] = True
        if visited[dst]:
            return depth + 1
        frontier = np.unique(nbrs)
        depth += 1
    return None


def weakly_connected_components(g: DiGraph) -> ComponentLabels:
    """Label nodes by weakly connected component (undirected reachability).

    Labels are contiguous from 0 in order of first discovery, so the result
    is deterministic for a given graph.
    """
    n = g.node_count
    labels = np.full(n, -1, dtype=np.int64)
    current = 0
    for start in range(n):
        if labels[start] >= 0:
            continue
        labels[start] = current
        frontier = np.array([start], dtype=np.int64)
        while len(frontier):
            nbrs = gather_neighbors(g.und_indptr, g.und_indices, frontier)
            nbrs = np.unique(nbrs[labels[nbrs] < 0])
            labels[nbrs] = current
            frontier = nbrs
        current += 1
    labels.setflags(write=False)
    return ComponentLabels(label=labels, component_count=current)
