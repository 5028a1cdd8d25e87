"""Title embedding and density-based clustering.

Incident titles are embedded as the mean of pretrained word vectors over
their tokens, then clustered with DBSCAN. The neighborhood radius can be
picked from the elbow of a k-distance profile. Titles with no in-vocabulary
token are unembeddable: they are assigned NOISE up front and never enter any
neighborhood, because a zero vector is an artifact of the lookup, not a
semantic position.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from ._kernels import METRICS, pairwise_distances
from .corpus import IncidentSet, tokenize
from .errors import DataError

logger = logging.getLogger(__name__)

NOISE = -1
_UNSET = -2


@dataclass(frozen=True)
class EmbeddingTable:
    dimension: int
    vectors: dict[str, np.ndarray]
    duplicate_tokens: int = 0

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, token: str) -> bool:
        return token in self.vectors


def load_embeddings(stream: TextIO, expected_dim: int) -> EmbeddingTable:
    """Parse a pretrained-vector text file: ``token v1 v2 ... vd`` per line.

    A line whose value count differs from ``expected_dim`` is an error naming
    the line. Duplicate tokens keep the last vector and are counted with a
    warning.
    """
    if expected_dim < 1:
        raise ValueError("expected_dim must be at least 1")
    vectors: dict[str, np.ndarray] = {}
    duplicates = 0
    for line_no, line in enumerate(stream, start=1):
        parts = line.split()
        if not parts:
            continue
        token, values = parts[0], parts[1:]
        if len(values) != expected_dim:
            raise DataError(
                f"expected {expected_dim} values for token {token!r}, got {len(values)}",
                line=line_no,
            )
        try:
            vector = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError:
            raise DataError(f"malformed vector value for token {token!r}", line=line_no) from None
        if token in vectors:
            duplicates += 1
        vectors[token] = vector
    if duplicates:
        logger.warning("embedding table had %d duplicate tokens; last value wins", duplicates)
    return EmbeddingTable(dimension=expected_dim, vectors=vectors, duplicate_tokens=duplicates)


@dataclass(frozen=True)
class TitleVector:
    incident_id: str
    vector: np.ndarray
    coverage: float

    @property
    def embeddable(self) -> bool:
        return self.coverage > 0.0


def embed_title(title: str, table: EmbeddingTable, incident_id: str = "") -> TitleVector:
    """Mean of the vectors of in-vocabulary (lowercased) title tokens.

    Coverage is the fraction of tokens found in the table; zero coverage
    yields a zero vector and marks the title unembeddable.
    """
    tokens = [tok.lower for tok in tokenize(title)]
    found = [table.vectors[tok] for tok in tokens if tok in table.vectors]
    if not found:
        return TitleVector(
            incident_id=incident_id,
            vector=np.zeros(table.dimension, dtype=np.float64),
            coverage=0.0,
        )
    vector = np.mean(np.stack(found), axis=0)
    return TitleVector(incident_id=incident_id, vector=vector, coverage=len(found) / len(tokens))


def embed_titles(incident_set: IncidentSet, table: EmbeddingTable) -> list[TitleVector]:
    return [embed_title(inc.title, table, incident_id=inc.id) for inc in incident_set]


@dataclass(frozen=True)
class ClusteringConfig:
    epsilon: float
    min_pts: int = 4
    metric: str = "cosine-distance"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.min_pts < 1:
            raise ValueError("min_pts must be at least 1")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}; expected one of {METRICS}")


@dataclass(frozen=True)
class ClusterAssignment:
    """incident_id -> cluster label; NOISE is -1, ids are contiguous from 0."""

    labels: dict[str, int]

    @property
    def n_clusters(self) -> int:
        return max((label for label in self.labels.values() if label != NOISE), default=-1) + 1

    def members(self, cluster_id: int) -> list[str]:
        return [iid for iid, label in self.labels.items() if label == cluster_id]


def kdistance_profile(
    vectors: Iterable[TitleVector], k: int, metric: str = "cosine-distance"
) -> list[float]:
    """Distance of each embeddable point to its k-th nearest other point, descending."""
    points = [v for v in vectors if v.embeddable]
    if not 1 <= k < len(points):
        raise ValueError(f"k={k} out of range for {len(points)} embeddable vectors")
    dist = pairwise_distances(np.stack([v.vector for v in points]), metric)
    np.fill_diagonal(dist, np.inf)
    kth = np.partition(dist, k - 1, axis=1)[:, k - 1]
    return sorted((float(v) for v in kth), reverse=True)


def suggest_epsilon(profile: list[float]) -> float:
    """Elbow of a descending k-distance profile.

    The elbow is the interior index with the largest discrete second
    difference; ties go to the smallest index. Advisory only, callers may
    override.
    """
    if len(profile) < 3:
        raise ValueError("profile must have at least 3 points to have curvature")
    best_index = 1
    best_curvature = -np.inf
    for i in range(1, len(profile) - 1):
        curvature = profile[i - 1] - 2.0 * profile[i] + profile[i + 1]
        if curvature > best_curvature:
            best_curvature = curvature
            best_index = i
    return float(profile[best_index])


def _neighborhoods(
    vectors: list[TitleVector], config: ClusteringConfig
) -> tuple[list[int], np.ndarray, np.ndarray]:
    """(embeddable indices, within-epsilon boolean matrix, core mask)."""
    ids = [v.incident_id for v in vectors]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate incident ids among title vectors")
    embeddable = [i for i, v in enumerate(vectors) if v.embeddable]
    if not embeddable:
        return [], np.zeros((0, 0), dtype=bool), np.zeros(0, dtype=bool)
    dist = pairwise_distances(np.stack([vectors[i].vector for i in embeddable]), config.metric)
    within = dist <= config.epsilon
    core = within.sum(axis=1) >= config.min_pts
    return embeddable, within, core


def core_point_ids(vectors: list[TitleVector], config: ClusteringConfig) -> set[str]:
    """Incident ids of core points; independent of input order by definition."""
    embeddable, _within, core = _neighborhoods(vectors, config)
    return {vectors[i].incident_id for pos, i in enumerate(embeddable) if core[pos]}


def dbscan(vectors: list[TitleVector], config: ClusteringConfig) -> ClusterAssignment:
    """Density-based clustering of title vectors.

    A point is core when its closed epsilon-neighborhood (itself included)
    holds at least min_pts points. Expansion walks points in input order
    with a FIFO frontier, so border points join the first cluster whose
    expansion reaches them and cluster ids are contiguous in order of first
    appearance. Unembeddable titles are NOISE and excluded from every
    neighborhood.
    """
    embeddable, within, core = _neighborhoods(vectors, config)
    labels_all = {v.incident_id: NOISE for v in vectors}
    if not embeddable:
        return ClusterAssignment(labels=labels_all)

    neighbor_lists = [np.nonzero(row)[0] for row in within]

    m = len(embeddable)
    labels = np.full(m, _UNSET, dtype=np.int64)
    next_cluster = 0
    for i in range(m):
        if labels[i] != _UNSET:
            continue
        if not core[i]:
            labels[i] = NOISE
            continue
        cluster = next_cluster
        next_cluster += 1
        labels[i] = cluster
        frontier = deque(int(j) for j in neighbor_lists[i] if j != i)
        while frontier:
            j = frontier.popleft()
            if labels[j] == NOISE:
                labels[j] = cluster
            if labels[j] != _UNSET:
                continue
            labels[j] = cluster
            if core[j]:
                frontier.extend(int(q) for q in neighbor_lists[j] if labels[q] == _UNSET or labels[q] == NOISE)

    for position, index in enumerate(embeddable):
        labels_all[vectors[index].incident_id] = int(labels[position])
    return ClusterAssignment(labels=labels_all)


def format_clusters(assignment: ClusterAssignment) -> str:
    """Cluster artifact: incident_id, label (NOISE as -1), tab-separated."""
    return "".join(f"{iid}\t{label}\n" for iid, label in assignment.labels.items())


def parse_clusters(stream: TextIO) -> ClusterAssignment:
    labels: dict[str, int] = {}
    for line_no, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError("expected 2 tab-separated fields", line=line_no)
        incident_id, label_text = parts
        try:
            label = int(label_text)
        except ValueError:
            raise DataError(f"malformed label {label_text!r}", line=line_no) from None
        if incident_id in labels:
            raise DataError(f"duplicate incident id {incident_id!r}", line=line_no)
        labels[incident_id] = label
    return ClusterAssignment(labels=labels)


def format_kdistance(profile: list[float]) -> str:
    """k-distance artifact: rank and distance per line, for external plotting."""
    return "".join(f"{rank}\t{value:.17g}\n" for rank, value in enumerate(profile, start=1))
