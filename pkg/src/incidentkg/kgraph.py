"""Weighted undirected knowledge graph over entity types.

Edges carry the NPMI score of the surviving relation between two types.
Maximal cliques are read as n-ary relations; minimal-hop paths from a source
node drive relevance scoring. Shortest paths are hop-count paths: the edge
weights never define path cost, they only break ties (larger weight sum
first, then lexicographically smallest node sequence), which keeps every
query deterministic under edge reordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, TextIO

from .errors import DataError
from .relations import ScoredRelation, canonical_pair

GRAPH_HEADER = "#kgraph v1"


@dataclass(frozen=True)
class KnowledgeGraph:
    nodes: tuple[str, ...]
    edges: dict[tuple[str, str], float]
    _adjacency: dict[str, dict[str, float]] = field(
        repr=False, compare=False, default_factory=dict
    )

    def __post_init__(self):
        adjacency: dict[str, dict[str, float]] = {node: {} for node in self.nodes}
        for (a, b), weight in self.edges.items():
            adjacency[a][b] = weight
            adjacency[b][a] = weight
        object.__setattr__(self, "_adjacency", adjacency)

    def __contains__(self, node: str) -> bool:
        return node in self._adjacency

    def neighbors(self, node: str) -> dict[str, float]:
        return self._adjacency[node]

    def weight(self, a: str, b: str) -> float:
        try:
            return self.edges[canonical_pair(a, b)]
        except KeyError:
            raise KeyError(f"no edge between {a!r} and {b!r}") from None

    def has_edge(self, a: str, b: str) -> bool:
        return canonical_pair(a, b) in self.edges


def build_graph(relations: Iterable[ScoredRelation]) -> KnowledgeGraph:
    """One node per type in any relation, one weighted edge per relation.

    Relations must already be NPMI-filtered, so weights lie in [0, 1].
    """
    edges: dict[tuple[str, str], float] = {}
    nodes: set[str] = set()
    for relation in relations:
        pair = canonical_pair(relation.e1, relation.e2)
        if not 0.0 <= relation.npmi <= 1.0:
            raise ValueError(
                f"edge weight {relation.npmi} for {pair!r} outside [0, 1]; "
                "relations must be filtered first"
            )
        if pair in edges and edges[pair] != relation.npmi:
            raise ValueError(f"conflicting weights for pair {pair!r}")
        edges[pair] = relation.npmi
        nodes.update(pair)
    return KnowledgeGraph(nodes=tuple(sorted(nodes)), edges=dict(sorted(edges.items())))


def maximal_cliques(graph: KnowledgeGraph, min_size: int = 2) -> list[tuple[str, ...]]:
    """All maximal cliques of at least ``min_size`` members.

    Recursive enumeration with pivoting; output is canonical regardless of
    traversal order (members sorted, clique list sorted).
    """
    if min_size < 2:
        raise ValueError("min_size must be at least 2")
    adjacency = {node: set(graph.neighbors(node)) for node in graph.nodes}
    cliques: list[tuple[str, ...]] = []

    def expand(current: set[str], candidates: set[str], excluded: set[str]) -> None:
        if not candidates and not excluded:
            if len(current) >= min_size:
                cliques.append(tuple(sorted(current)))
            return
        pivot = max(sorted(candidates | excluded), key=lambda v: len(adjacency[v] & candidates))
        for v in sorted(candidates - adjacency[pivot]):
            expand(current | {v}, candidates & adjacency[v], excluded & adjacency[v])
            candidates = candidates - {v}
            excluded = excluded | {v}

    expand(set(), set(graph.nodes), set())
    cliques.sort()
    return cliques


@dataclass(frozen=True)
class PathEntry:
    hops: int
    path: tuple[str, ...]
    weight_sum: float


@dataclass(frozen=True)
class PathMap:
    """Minimal-hop paths from one source to every reachable node."""

    source: str
    entries: dict[str, PathEntry]

    def __contains__(self, node: str) -> bool:
        return node in self.entries

    def __getitem__(self, node: str) -> PathEntry:
        return self.entries[node]


def shortest_paths_from(graph: KnowledgeGraph, source: str) -> PathMap:
    """BFS hop distances plus one chosen path per reachable node.

    Among minimal-hop paths the chosen one maximizes the edge weight sum;
    remaining ties go to the lexicographically smallest node sequence.
    """
    if source not in graph:
        raise ValueError(f"unknown source node {source!r}")

    hops: dict[str, int] = {source: 0}
    levels: list[list[str]] = [[source]]
    frontier = [source]
    while frontier:
        next_frontier = []
        for node in frontier:
            for neighbor in sorted(graph.neighbors(node)):
                if neighbor not in hops:
                    hops[neighbor] = hops[node] + 1
                    next_frontier.append(neighbor)
        if next_frontier:
            levels.append(sorted(next_frontier))
        frontier = next_frontier

    entries: dict[str, PathEntry] = {source: PathEntry(0, (source,), 0.0)}
    for depth, level in enumerate(levels[1:], start=1):
        for node in level:
            best: tuple[float, tuple[str, ...]] | None = None
            for neighbor, weight in graph.neighbors(node).items():
                if hops.get(neighbor) != depth - 1:
                    continue
                parent = entries[neighbor]
                candidate = (parent.weight_sum + weight, parent.path + (node,))
                if (
                    best is None
                    or candidate[0] > best[0]
                    or (candidate[0] == best[0] and candidate[1] < best[1])
                ):
                    best = candidate
            assert best is not None
            entries[node] = PathEntry(hops=depth, path=best[1], weight_sum=best[0])
    return PathMap(source=source, entries=entries)


def export_graph(graph: KnowledgeGraph) -> str:
    """Graph artifact: header line, then one ``e1 TAB e2 TAB weight`` per edge.

    Weights are printed with 17 significant digits, enough to round-trip a
    double exactly. Tabs are forbidden in node names.
    """
    for node in graph.nodes:
        if "\t" in node or "\n" in node:
            raise ValueError(f"node name {node!r} contains forbidden whitespace")
    lines = [GRAPH_HEADER]
    for (a, b), weight in sorted(graph.edges.items()):
        lines.append(f"{a}\t{b}\t{weight:.17g}")
    return "".join(line + "\n" for line in lines)


def import_graph(stream: TextIO) -> KnowledgeGraph:
    """Parse a graph file back into a KnowledgeGraph; inverse of export_graph."""
    lines = stream.read().splitlines()
    if not lines or lines[0] != GRAPH_HEADER:
        raise DataError(f"expected header {GRAPH_HEADER!r}", line=1)
    edges: dict[tuple[str, str], float] = {}
    nodes: set[str] = set()
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DataError("expected 3 tab-separated fields", line=line_no)
        a, b, weight_text = parts
        if a == b:
            raise DataError(f"self-loop on {a!r}", line=line_no)
        try:
            weight = float(weight_text)
        except ValueError:
            raise DataError(f"malformed weight {weight_text!r}", line=line_no) from None
        if not 0.0 <= weight <= 1.0:
            raise DataError(f"weight {weight} outside [0, 1]", line=line_no)
        pair = canonical_pair(a, b)
        if pair in edges and edges[pair] != weight:
            raise DataError(f"conflicting weights for pair {pair!r}", line=line_no)
        edges[pair] = weight
        nodes.update(pair)
    return KnowledgeGraph(nodes=tuple(sorted(nodes)), edges=dict(sorted(edges.items())))
