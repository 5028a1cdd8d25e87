"""Sentence-level co-occurrence counting and NPMI relation scoring.

Frequencies are presence counts: a type contributes at most once per
(incident, sentence) unit no matter how many mentions it has there. That
guarantees f_joint <= min(f1, f2) and keeps NPMI inside [-1, 1].

PMI is computed as ``log((f_joint * f_total) / (f1 * f2))`` on exact integer
products rather than on pre-divided probabilities; the two forms are
algebraically identical, but the integer form returns exactly 0.0 for exact
independence and exactly 1.0 for complete co-occurrence, which the strict
``npmi < 0`` noise filter depends on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, TextIO

from .errors import DataError
from .tagger import TaggedCorpus


def canonical_pair(a: str, b: str) -> tuple[str, str]:
    """Unordered pair in lexicographic storage order."""
    if a == b:
        raise ValueError(f"self-pair {a!r} is not a relation")
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class CooccurrenceStats:
    """Per-type presence counts and pairwise joint counts over sentence units."""

    f: dict[str, int]
    f_joint: dict[tuple[str, str], int]
    f_total: int

    def merge(self, other: "CooccurrenceStats") -> "CooccurrenceStats":
        """Combine counts from two disjoint corpus shards."""
        f = dict(self.f)
        for t, n in other.f.items():
            f[t] = f.get(t, 0) + n
        f_joint = dict(self.f_joint)
        for pair, n in other.f_joint.items():
            f_joint[pair] = f_joint.get(pair, 0) + n
        return CooccurrenceStats(f=f, f_joint=f_joint, f_total=self.f_total + other.f_total)


def count_cooccurrences(corpus: TaggedCorpus) -> CooccurrenceStats:
    """Count type presences and joint presences per (incident, sentence) unit.

    Each unit contributes +1 to every distinct type present and +1 to every
    unordered pair of distinct types present; self-pairs are excluded.
    """
    unit_types: dict[tuple[str, int], set[str]] = {}
    for mention in corpus.mentions:
        key = (mention.incident_id, mention.sentence_index)
        unit_types.setdefault(key, set()).add(mention.entity_type.name)

    f: dict[str, int] = {}
    f_joint: dict[tuple[str, str], int] = {}
    for types in unit_types.values():
        ordered = sorted(types)
        for t in ordered:
            f[t] = f.get(t, 0) + 1
        for a, b in combinations(ordered, 2):
            f_joint[(a, b)] = f_joint.get((a, b), 0) + 1
    return CooccurrenceStats(f=f, f_joint=f_joint, f_total=sum(f.values()))


def _validate_counts(f1: int, f2: int, f_joint: int, f_total: int) -> None:
    if f_total <= 0:
        raise ValueError("f_total must be positive")
    if f1 <= 0 or f2 <= 0:
        raise ValueError("entity frequencies must be positive")
    if f_joint < 0:
        raise ValueError("f_joint must be non-negative")
    if f_joint > min(f1, f2):
        raise ValueError(f"f_joint={f_joint} exceeds min(f1, f2)={min(f1, f2)}")
    if max(f1, f2) > f_total:
        raise ValueError("entity frequency exceeds f_total")


def pmi_from_counts(f1: int, f2: int, f_joint: int, f_total: int) -> float:
    """Pointwise mutual information (natural log) from raw counts."""
    _validate_counts(f1, f2, f_joint, f_total)
    if f_joint == 0:
        raise ValueError("pmi is undefined for f_joint = 0; npmi handles that limit")
    return math.log((f_joint * f_total) / (f1 * f2))


def npmi_from_counts(f1: int, f2: int, f_joint: int, f_total: int) -> float:
    """Normalized PMI in [-1, 1] from raw counts.

    Defined limits: f_joint = 0 gives -1 (never co-occur); a joint
    probability of 1 gives +1 when the corresponding PMI is positive and 0
    otherwise. The result is clamped against rounding.
    """
    _validate_counts(f1, f2, f_joint, f_total)
    if f_joint == 0:
        return -1.0
    if f_joint == f_total:
        return 1.0 if f1 * f2 < f_joint * f_total else 0.0
    value = math.log((f_joint * f_total) / (f1 * f2)) / math.log(f_total / f_joint)
    return max(-1.0, min(1.0, value))


def _lookup(stats: CooccurrenceStats, entity: str) -> int:
    count = stats.f.get(entity, 0)
    if count <= 0:
        raise ValueError(f"unknown entity type {entity!r}")
    return count


def pmi(stats: CooccurrenceStats, e1: str, e2: str) -> float:
    pair = canonical_pair(e1, e2)
    return pmi_from_counts(
        _lookup(stats, e1), _lookup(stats, e2), stats.f_joint.get(pair, 0), stats.f_total
    )


def npmi(stats: CooccurrenceStats, e1: str, e2: str) -> float:
    pair = canonical_pair(e1, e2)
    return npmi_from_counts(
        _lookup(stats, e1), _lookup(stats, e2), stats.f_joint.get(pair, 0), stats.f_total
    )


@dataclass(frozen=True)
class ScoredRelation:
    """An NPMI-scored unordered entity type pair, stored in canonical order."""

    e1: str
    e2: str
    f1: int
    f2: int
    f_joint: int
    npmi: float

    @property
    def pair(self) -> tuple[str, str]:
        return (self.e1, self.e2)


def extract_binary_relations(stats: CooccurrenceStats) -> list[ScoredRelation]:
    """Score every co-occurring pair and drop the noise.

    Pairs with npmi < 0 are eliminated; the boundary npmi = 0 survives.
    Survivors are sorted by npmi descending, then f_joint descending, then
    pair lexicographically.
    """
    survivors = []
    for (a, b), joint in stats.f_joint.items():
        score = npmi_from_counts(stats.f[a], stats.f[b], joint, stats.f_total)
        if score < 0:
            continue
        survivors.append(
            ScoredRelation(e1=a, e2=b, f1=stats.f[a], f2=stats.f[b], f_joint=joint, npmi=score)
        )
    survivors.sort(key=lambda r: (-r.npmi, -r.f_joint, r.pair))
    return survivors


@dataclass(frozen=True)
class PrecisionCurve:
    """precision@n for n = 1..max_n over frequency-ranked relations."""

    points: tuple[tuple[int, float], ...]
    labels: tuple[bool, ...]


def rank_by_frequency(relations: Iterable[ScoredRelation]) -> list[ScoredRelation]:
    """Evaluation order: f_joint descending, npmi descending, pair as tiebreak."""
    return sorted(relations, key=lambda r: (-r.f_joint, -r.npmi, r.pair))


def precision_at_n(
    relations: Iterable[ScoredRelation],
    labels: Mapping[tuple[str, str], bool],
    max_n: int,
) -> PrecisionCurve:
    """Precision at each rank 1..max_n, ranking relations by co-occurrence count."""
    if max_n < 1:
        raise ValueError("max_n must be at least 1")
    ranked = rank_by_frequency(relations)
    if len(ranked) < max_n:
        raise ValueError(f"need at least {max_n} relations, have {len(ranked)}")
    flags = []
    for relation in ranked[:max_n]:
        if relation.pair not in labels:
            raise ValueError(f"missing label for pair {relation.pair!r}")
        flags.append(bool(labels[relation.pair]))
    points = []
    valid = 0
    for n, flag in enumerate(flags, start=1):
        valid += flag
        points.append((n, valid / n))
    return PrecisionCurve(points=tuple(points), labels=tuple(flags))


def format_relations(relations: Iterable[ScoredRelation]) -> str:
    """Relations artifact: e1, e2, f1, f2, f_joint, npmi (6 decimals), tab-separated."""
    return "".join(
        f"{r.e1}\t{r.e2}\t{r.f1}\t{r.f2}\t{r.f_joint}\t{r.npmi:.6f}\n" for r in relations
    )


def parse_relations(stream: TextIO) -> list[ScoredRelation]:
    """Read a relations file back; pairs are normalized to canonical order."""
    relations = []
    seen = set()
    for line_no, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 6:
            raise DataError("expected 6 tab-separated fields", line=line_no)
        e1, e2, f1_text, f2_text, joint_text, npmi_text = parts
        try:
            f1, f2, joint = int(f1_text), int(f2_text), int(joint_text)
            score = float(npmi_text)
        except ValueError:
            raise DataError("malformed counts or score", line=line_no) from None
        if e1 == e2:
            raise DataError(f"self-pair {e1!r}", line=line_no)
        if e2 < e1:
            e1, e2, f1, f2 = e2, e1, f2, f1
        if (e1, e2) in seen:
            raise DataError(f"duplicate pair ({e1!r}, {e2!r})", line=line_no)
        seen.add((e1, e2))
        relations.append(ScoredRelation(e1=e1, e2=e2, f1=f1, f2=f2, f_joint=joint, npmi=score))
    return relations


def parse_labels(stream: TextIO) -> dict[tuple[str, str], bool]:
    """Read a labels file: e1, e2, valid in {0, 1}, tab-separated."""
    labels: dict[tuple[str, str], bool] = {}
    for line_no, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DataError("expected 3 tab-separated fields", line=line_no)
        e1, e2, flag = parts
        if flag not in ("0", "1"):
            raise DataError(f"validity flag must be 0 or 1, got {flag!r}", line=line_no)
        pair = canonical_pair(e1, e2)
        if pair in labels and labels[pair] != (flag == "1"):
            raise DataError(f"conflicting labels for pair {pair!r}", line=line_no)
        labels[pair] = flag == "1"
    return labels
