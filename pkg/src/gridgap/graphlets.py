"""Enumeration and classification of connected 4-node induced subgraphs.

A power grid is reduced to a simple undirected graph (buses as nodes,
lines as edges, parallel circuits merged).  Every connected induced
subgraph on 4 nodes falls into one of six isomorphism classes; the census
counts how often each class occurs and expresses the counts as
percentages of the total.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum


class GraphletError(Exception):
    pass


class DisconnectedQuad(GraphletError):
    """The four nodes do not induce a connected subgraph."""


class GraphTooLarge(GraphletError):
    """Brute-force enumeration refused; the subset count is too big."""


class GraphletType(Enum):
    """The six isomorphism classes of connected 4-node simple graphs."""

    T1_STAR = 1      # 3 edges, degrees (3,1,1,1)
    T2_PATH = 2      # 3 edges, degrees (2,2,1,1)
    T3_PAW = 3       # 4 edges, degrees (3,2,2,1): triangle plus pendant
    T4_CYCLE = 4     # 4 edges, degrees (2,2,2,2)
    T5_DIAMOND = 5   # 5 edges
    T6_COMPLETE = 6  # 6 edges, K4


class UndirectedGraph:
    """Simple undirected graph with dense node ids 0..n-1.

    Adjacency lists are kept sorted so that enumeration order is
    reproducible regardless of edge insertion order.
    """

    def __init__(self, n: int, edges=()):
        if n < 0:
            raise GraphletError("node count must be non-negative")
        self.n = n
        adj = [set() for _ in range(n)]
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise GraphletError(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise GraphletError(f"self-loop at node {u}")
            adj[u].add(v)
            adj[v].add(u)
        self.adjacency = [sorted(s) for s in adj]
        self._adj_sets = [frozenset(s) for s in adj]

    def num_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._adj_sets[u]

    def neighbors(self, u: int):
        return self.adjacency[u]

    def edges(self):
        for u in range(self.n):
            for v in self.adjacency[u]:
                if u < v:
                    yield (u, v)


def graph_from_edge_list(text: str) -> UndirectedGraph:
    """Build a graph from `u v` lines with 1-based node ids.

    Blank lines and `#` comments are skipped.  Node ids need not be
    contiguous; they are compacted preserving numeric order.
    """
    pairs = []
    ids = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphletError(f"line {lineno}: expected `u v`, got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise GraphletError(f"line {lineno}: non-integer node id") from exc
        pairs.append((u, v))
        ids.update((u, v))
    index = {node: i for i, node in enumerate(sorted(ids))}
    edges = {(min(index[u], index[v]), max(index[u], index[v]))
             for u, v in pairs if u != v}
    return UndirectedGraph(len(index), sorted(edges))


@dataclass
class GraphletCensus:
    counts: dict = field(default_factory=dict)

    def __post_init__(self):
        for t in GraphletType:
            self.counts.setdefault(t, 0)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def percentages(self) -> dict:
        total = self.total
        if total == 0:
            return {t: 0.0 for t in GraphletType}
        return {t: 100.0 * c / total for t, c in self.counts.items()}

    def __eq__(self, other):
        if not isinstance(other, GraphletCensus):
            return NotImplemented
        return self.counts == other.counts


def classify_quad(g: UndirectedGraph, quad) -> GraphletType:
    """Classify the induced subgraph on four nodes.

    Classification needs only the induced edge count and the sorted
    degree sequence; those two invariants separate all six classes.
    """
    nodes = tuple(quad)
    if len(set(nodes)) != 4:
        raise GraphletError(f"quad must contain 4 distinct nodes, got {quad}")
    deg = {u: 0 for u in nodes}
    m = 0
    for u, v in itertools.combinations(nodes, 2):
        if g.has_edge(u, v):
            m += 1
            deg[u] += 1
            deg[v] += 1
    degseq = sorted(deg.values(), reverse=True)
    # on 4 nodes, connectivity is equivalent to >=3 edges with no isolated node
    if m < 3 or degseq[-1] == 0:
        raise DisconnectedQuad(f"nodes {quad} do not induce a connected subgraph")
    if m == 3:
        return GraphletType.T1_STAR if degseq == [3, 1, 1, 1] else GraphletType.T2_PATH
    if m == 4:
        return GraphletType.T3_PAW if degseq == [3, 2, 2, 1] else GraphletType.T4_CYCLE
    if m == 5:
        return GraphletType.T5_DIAMOND
    return GraphletType.T6_COMPLETE


def enumerate_quads(g: UndirectedGraph):
    """Yield every connected 4-node induced subgraph exactly once.

    Classic exclusive-neighborhood enumeration: each subgraph is grown
    from its minimum-labelled node (the root); candidate extensions are
    restricted to nodes with labels above the root, and a node enters the
    extension set only when it is an exclusive neighbor of the newest
    subgraph member (not adjacent to, nor equal to, any earlier member).
    Each subgraph is therefore produced from a unique growth sequence.
    """
    adj = g._adj_sets
    for root in range(g.n):
        ext = [u for u in g.adjacency[root] if u > root]
        yield from _extend(g, adj, (root,), ext, root)


def _extend(g, adj, sub, ext, root):
    if len(sub) == 4:
        yield frozenset(sub)
        return
    # each candidate is removed before recursing so later iterations
    # cannot regrow the same subgraph through a different order
    ext = list(ext)
    while ext:
        w = ext.pop()
        closed = set(sub)
        for u in sub:
            closed.update(adj[u])
        new_ext = ext + [u for u in g.adjacency[w] if u > root and u not in closed]
        yield from _extend(g, adj, sub + (w,), new_ext, root)


def census(g: UndirectedGraph) -> GraphletCensus:
    result = GraphletCensus()
    for quad in enumerate_quads(g):
        result.counts[classify_quad(g, quad)] += 1
    return result


def brute_force_census(g: UndirectedGraph, max_nodes: int = 64) -> GraphletCensus:
    """Independent oracle: test all C(n,4) subsets for connectivity."""
    if g.n > max_nodes:
        raise GraphTooLarge(f"{g.n} nodes exceeds the {max_nodes}-node guard")
    result = GraphletCensus()
    for quad in itertools.combinations(range(g.n), 4):
        try:
            t = classify_quad(g, quad)
        except DisconnectedQuad:
            continue
        result.counts[t] += 1
    return result
