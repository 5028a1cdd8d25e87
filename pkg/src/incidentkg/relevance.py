"""Per-cluster entity relevance ranking.

For each title cluster, the most frequent entity that exists in the knowledge
graph becomes the primary entity; every entity reachable from it is scored by
the mean edge weight along the chosen minimal-hop path, the primary itself
scoring exactly 1.0. Averaging (not multiplying) is deliberate: edge weights
are already log-probability ratios.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .kgraph import KnowledgeGraph, shortest_paths_from
from .tagger import TaggedCorpus
from .titlecluster import ClusterAssignment


@dataclass(frozen=True)
class ClusterEntityReport:
    cluster_id: int
    member_incident_ids: tuple[str, ...]
    top_frequent: tuple[tuple[str, int], ...]
    primary_entity: str | None
    ranked_entities: tuple[tuple[str, float], ...]
    primary_missing: bool


def top_frequent_entities(
    member_ids: Iterable[str], corpus: TaggedCorpus, k: int = 5
) -> list[tuple[str, int]]:
    """Entity types ranked by total mention count across the cluster's incidents.

    Counts are raw mention occurrences (titles and descriptions alike); ties
    break lexicographically.
    """
    members = set(member_ids)
    counts: Counter[str] = Counter(
        m.entity_type.name for m in corpus.mentions if m.incident_id in members
    )
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


def select_primary_entity(
    topk: Sequence[tuple[str, int]], graph: KnowledgeGraph
) -> str | None:
    """First frequent entity that is a knowledge-graph node, or None."""
    for name, _count in topk:
        if name in graph:
            return name
    return None


def relation_score(graph: KnowledgeGraph, path: Sequence[str]) -> float:
    """Mean edge weight along a path; a single-node path scores 1.0."""
    if len(path) < 1:
        raise ValueError("path must contain at least one node")
    if len(path) == 1:
        return 1.0
    total = 0.0
    for a, b in zip(path, path[1:]):
        if not graph.has_edge(a, b):
            raise ValueError(f"path nodes {a!r} and {b!r} are not adjacent")
        total += graph.weight(a, b)
    return total / (len(path) - 1)


def related_entities(
    graph: KnowledgeGraph,
    cluster_id: int,
    member_ids: Sequence[str],
    corpus: TaggedCorpus,
    k: int = 5,
) -> ClusterEntityReport:
    """Rank the top-k entities related to one cluster.

    The primary entity is scored 1.0 and always ranks first; other reachable
    entities are scored on their chosen minimal-hop path and sorted by score
    descending, ties lexicographic.
    """
    topk = top_frequent_entities(member_ids, corpus, k=5)
    primary = select_primary_entity(topk, graph)
    if primary is None:
        return ClusterEntityReport(
            cluster_id=cluster_id,
            member_incident_ids=tuple(member_ids),
            top_frequent=tuple(topk),
            primary_entity=None,
            ranked_entities=(),
            primary_missing=True,
        )
    paths = shortest_paths_from(graph, primary)
    others = [
        (node, relation_score(graph, entry.path))
        for node, entry in paths.entries.items()
        if node != primary
    ]
    others.sort(key=lambda item: (-item[1], item[0]))
    ranked = [(primary, 1.0)] + others[: max(k - 1, 0)]
    return ClusterEntityReport(
        cluster_id=cluster_id,
        member_incident_ids=tuple(member_ids),
        top_frequent=tuple(topk),
        primary_entity=primary,
        ranked_entities=tuple(ranked),
        primary_missing=False,
    )


def build_reports(
    graph: KnowledgeGraph,
    assignment: ClusterAssignment,
    corpus: TaggedCorpus,
    k: int = 5,
) -> list[ClusterEntityReport]:
    """One report per cluster id; NOISE incidents take part in none of them."""
    return [
        related_entities(graph, cluster_id, assignment.members(cluster_id), corpus, k=k)
        for cluster_id in range(assignment.n_clusters)
    ]


def format_reports(reports: Iterable[ClusterEntityReport], corpus: TaggedCorpus) -> str:
    """Human-readable report: per cluster, member titles, the primary entity,
    and one ``entity TAB score`` line per ranked entity (two decimals)."""
    blocks = []
    for report in reports:
        lines = [f"== cluster {report.cluster_id} ({len(report.member_incident_ids)} incidents) =="]
        for incident_id in report.member_incident_ids:
            lines.append(f"title: {corpus.incident_set.get(incident_id).title}")
        if report.primary_missing:
            lines.append("primary: NONE (no frequent entity in the knowledge graph)")
        else:
            lines.append(f"primary: {report.primary_entity}")
            for name, score in report.ranked_entities:
                lines.append(f"{name}\t{score:.2f}")
        blocks.append("".join(line + "\n" for line in lines))
    return "\n".join(blocks)
