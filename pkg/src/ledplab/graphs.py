"""Graph representation, exact subgraph-count oracles, and generators.

Graphs are undirected, simple, on vertices 0..n-1, stored as a dense
symmetric 0/1 matrix with zero diagonal. Counting routines are exact
combinatorial enumerations; everything downstream is validated against
them.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Iterator

import numpy as np

__all__ = [
    "Graph",
    "VertexPartition",
    "count_triangles",
    "count_four_cycles",
    "erdos_renyi",
    "empty_graph",
    "complete_graph",
    "complete_bipartite",
    "cycle_graph",
    "path_graph",
    "star_graph",
    "graph_to_text",
    "graph_from_text",
]


class GraphFormatError(ValueError):
    """Raised when graph text input violates the edge-list format."""


class Graph:
    """Undirected simple graph with an explicit adjacency matrix.

    The adjacency matrix is frozen after construction, so instances can
    be shared across workers without copying.
    """

    __slots__ = ("n", "adjacency")

    def __init__(self, adjacency: np.ndarray):
        a = np.asarray(adjacency, dtype=np.uint8)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {a.shape}")
        if a.shape[0] == 0:
            raise ValueError("graph must have at least one vertex")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0):
            raise ValueError("adjacency diagonal must be zero")
        if not np.all((a == 0) | (a == 1)):
            raise ValueError("adjacency entries must be 0 or 1")
        a = a.copy()
        a.setflags(write=False)
        self.n = a.shape[0]
        self.adjacency = a

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        a = np.zeros((n, n), dtype=np.uint8)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop ({i},{j}) not allowed")
            a[i, j] = 1
            a[j, i] = 1
        return cls(a)

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.adjacency[i, j])

    def edge_count(self) -> int:
        return int(self.adjacency.sum()) // 2

    def edges(self) -> Iterator[tuple[int, int]]:
        idx = np.argwhere(np.triu(self.adjacency, k=1))
        for i, j in idx:
            yield int(i), int(j)

    def __eq__(self, other):
        return isinstance(other, Graph) and np.array_equal(self.adjacency, other.adjacency)

    def __hash__(self):
        return hash((self.n, self.adjacency.tobytes()))

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.edge_count()})"


@dataclass(frozen=True)
class VertexPartition:
    """Disjoint labeled vertex groups covering a prefix or all of [n]."""

    parts: tuple[tuple[int, ...], ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.parts) != len(self.labels):
            raise ValueError("one label per part required")
        seen: set[int] = set()
        for part in self.parts:
            overlap = seen.intersection(part)
            if overlap:
                raise ValueError(f"parts must be disjoint, repeated vertices {sorted(overlap)}")
            seen.update(part)

    def part(self, label: str) -> tuple[int, ...]:
        return self.parts[self.labels.index(label)]


def count_triangles(g: Graph) -> int:
    """Exact number of unordered vertex triples forming a triangle.

    Enumerates edges and counts common neighbors beyond the edge's top
    endpoint; each triangle is found exactly once at its lowest pair.
    """
    a = g.adjacency
    total = 0
    for i in range(g.n - 2):
        row_i = a[i]
        for j in range(i + 1, g.n - 1):
            if row_i[j]:
                total += int(np.count_nonzero(row_i[j + 1 :] & a[j, j + 1 :]))
    return total


def count_four_cycles(g: Graph) -> int:
    """Exact number of distinct 4-cycles (each cycle counted once).

    For every vertex pair, choosing two of their common neighbors fixes
    a 4-cycle with that pair as a diagonal; each cycle has two diagonals,
    hence the halving.
    """
    a = g.adjacency.astype(np.int64)
    codeg = a @ a
    total = 0
    for i in range(g.n - 1):
        for j in range(i + 1, g.n):
            c = int(codeg[i, j])
            total += c * (c - 1) // 2
    assert total % 2 == 0
    return total // 2


def triangles_per_triple(g: Graph) -> Iterator[tuple[int, int, int]]:
    """Yield every triangle as its sorted vertex triple (test helper)."""
    a = g.adjacency
    for i, j, k in combinations(range(g.n), 3):
        if a[i, j] and a[j, k] and a[i, k]:
            yield (i, j, k)


def erdos_renyi(n: int, p: float, rng: np.random.Generator) -> Graph:
    """G(n, p): each possible edge present independently with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability must be in [0, 1], got {p}")
    a = np.zeros((n, n), dtype=np.uint8)
    iu = np.triu_indices(n, k=1)
    bits = (rng.random(len(iu[0])) < p).astype(np.uint8)
    a[iu] = bits
    a += a.T
    return Graph(a)


def empty_graph(n: int) -> Graph:
    return Graph(np.zeros((n, n), dtype=np.uint8))


def complete_graph(n: int) -> Graph:
    a = np.ones((n, n), dtype=np.uint8)
    np.fill_diagonal(a, 0)
    return Graph(a)


def complete_bipartite(n1: int, n2: int) -> Graph:
    a = np.zeros((n1 + n2, n1 + n2), dtype=np.uint8)
    a[:n1, n1:] = 1
    a[n1:, :n1] = 1
    return Graph(a)


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise ValueError("cycle needs at least 3 vertices")
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(leaves: int) -> Graph:
    """Hub vertex 0 joined to `leaves` leaf vertices."""
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def graph_to_text(g: Graph) -> str:
    """Serialize as: first line n, then one 'i j' pair per edge, i < j."""
    lines = [str(g.n)]
    lines.extend(f"{i} {j}" for i, j in g.edges())
    return "\n".join(lines) + "\n"


def graph_from_text(text: str) -> Graph:
    lines = [ln for ln in text.split("\n") if ln.strip()]
    if not lines:
        raise GraphFormatError("empty graph text")
    try:
        n = int(lines[0])
    except ValueError:
        raise GraphFormatError(f"first line must be the vertex count, got {lines[0]!r}")
    if n <= 0:
        raise GraphFormatError(f"vertex count must be positive, got {n}")
    a = np.zeros((n, n), dtype=np.uint8)
    for ln in lines[1:]:
        fields = ln.split()
        if len(fields) != 2:
            raise GraphFormatError(f"edge line must be 'i j', got {ln!r}")
        try:
            i, j = int(fields[0]), int(fields[1])
        except ValueError:
            raise GraphFormatError(f"edge endpoints must be integers, got {ln!r}")
        if not (0 <= i < j < n):
            raise GraphFormatError(f"edge ({i},{j}) violates 0 <= i < j < {n}")
        if a[i, j]:
            raise GraphFormatError(f"duplicate edge ({i},{j})")
        a[i, j] = 1
        a[j, i] = 1
    return Graph(a)


def load_graph(path) -> Graph:
    with open(path, "r", encoding="ascii") as fh:
        return graph_from_text(fh.read())


def save_graph(g: Graph, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(graph_to_text(g))
