"""Typed entity mention extraction.

Three mention sources feed a tagged corpus: a structural ``Key <sep> Value``
pattern extractor, user-supplied regex rules, and pre-tagged annotation files
produced by an external tagger. Sources are unioned per sentence with a
deterministic overlap resolution, so the final mention list never contains
two mentions sharing a byte.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, TextIO

from .corpus import IncidentSet, Sentence, byte_offsets, sentence_index
from .errors import DataError

KEY_VALUE_SEPARATORS = (":", "=", "->")
_KEY_WORD = r"[A-Z][A-Za-z0-9_-]*"
_KEY_VALUE_RE = re.compile(
    rf"(?<![A-Za-z0-9_-])((?:{_KEY_WORD}\s+){{0,3}}{_KEY_WORD})\s*(:|=|->)\s*"
)
_VALUE_TRIM_CHARS = ".,:;!?()[]\"'"

# Overlap resolution ranks; higher wins. Pre-tagged annotations are treated
# as ground truth, explicit rules beat the generic structural extractor.
_RANK_PATTERN = 0
_RANK_RULE = 1
_RANK_PRETAGGED = 2


def normalize_type_name(surface: str) -> str:
    """Case-folded, whitespace-collapsed key form of an entity type name."""
    return " ".join(surface.split()).casefold()


@dataclass(frozen=True)
class EntityType:
    """An entity category. Identity is the normalized key, not the spelling."""

    name: str
    key: str

    def __eq__(self, other) -> bool:
        return isinstance(other, EntityType) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __str__(self) -> str:
        return self.name


class EntityTypeRegistry:
    """Interns entity types so co-spelled variants share one canonical name.

    The first surface form registered for a normalized key becomes the
    canonical display name; later variants ("vnet id" after "VNet Id") map
    to the same type.
    """

    def __init__(self):
        self._by_key: dict[str, EntityType] = {}

    def intern(self, surface: str) -> EntityType:
        key = normalize_type_name(surface)
        if not key:
            raise ValueError("entity type name must be non-empty")
        existing = self._by_key.get(key)
        if existing is not None:
            return existing
        etype = EntityType(name=" ".join(surface.split()), key=key)
        self._by_key[key] = etype
        return etype

    def __len__(self) -> int:
        return len(self._by_key)


@dataclass(frozen=True)
class EntityMention:
    """One typed occurrence of a value at a byte span within a sentence."""

    entity_type: EntityType
    value: str
    incident_id: str
    sentence_index: int
    start: int
    end: int


@dataclass(frozen=True)
class TagRule:
    entity_type: str
    priority: int
    pattern: re.Pattern
    index: int


def load_rules(stream: TextIO) -> list[TagRule]:
    """Parse a rule file: one rule per line, tab-separated type, priority, pattern."""
    rules = []
    for line_no, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t", 2)
        if len(parts) != 3:
            raise DataError("expected 3 tab-separated fields (type, priority, pattern)", line=line_no)
        type_name, priority_text, pattern_text = parts
        if not type_name.strip():
            raise DataError("rule entity type must be non-empty", line=line_no)
        try:
            priority = int(priority_text)
        except ValueError:
            raise DataError(f"invalid priority {priority_text!r}", line=line_no) from None
        try:
            pattern = re.compile(pattern_text)
        except re.error as exc:
            raise DataError(f"invalid pattern: {exc}", line=line_no) from None
        rules.append(TagRule(entity_type=type_name, priority=priority, pattern=pattern, index=len(rules)))
    return rules


@dataclass(frozen=True)
class _Candidate:
    mention: EntityMention
    rank: int
    priority: int
    order: int


def _resolve_overlaps(candidates: list[_Candidate]) -> list[EntityMention]:
    """Greedy non-overlapping selection.

    Precedence: source rank, then rule priority, then leftmost-longest, then
    rule declaration order, then type key. Exact duplicates collapse because
    the second candidate overlaps the first.
    """
    ordered = sorted(
        candidates,
        key=lambda c: (
            -c.rank,
            -c.priority,
            c.mention.start,
            -(c.mention.end - c.mention.start),
            c.order,
            c.mention.entity_type.key,
        ),
    )
    accepted: list[EntityMention] = []
    for cand in ordered:
        m = cand.mention
        if any(m.start < other.end and other.start < m.end for other in accepted):
            continue
        accepted.append(m)
    accepted.sort(key=lambda m: (m.start, m.end))
    return accepted


def _trim_value_span(text: str, start: int, end: int) -> tuple[int, int]:
    """Shrink [start, end) over whitespace and boundary punctuation until stable."""
    while True:
        moved = False
        while start < end and text[start].isspace():
            start += 1
            moved = True
        while end > start and text[end - 1].isspace():
            end -= 1
            moved = True
        while start < end and text[start] in _VALUE_TRIM_CHARS:
            start += 1
            moved = True
        while end > start and text[end - 1] in _VALUE_TRIM_CHARS:
            end -= 1
            moved = True
        if not moved:
            return start, end


def extract_key_value_entities(
    sentence: Sentence, registry: EntityTypeRegistry | None = None
) -> list[EntityMention]:
    """Extract ``Key: Value`` style mentions from one sentence.

    A key is a run of one to four capitalized words directly before a
    separator (``:``, ``=`` or ``->``); the value runs to the next key or the
    sentence end. The key names the entity type, the value becomes the
    mention.
    """
    registry = registry if registry is not None else EntityTypeRegistry()
    text = sentence.text
    matches = list(_KEY_VALUE_RE.finditer(text))
    if not matches:
        return []
    offsets = byte_offsets(text)
    mentions = []
    for i, match in enumerate(matches):
        region_end = matches[i + 1].start(1) if i + 1 < len(matches) else len(text)
        start, end = _trim_value_span(text, match.end(), region_end)
        if start >= end:
            continue
        mentions.append(
            EntityMention(
                entity_type=registry.intern(match.group(1)),
                value=text[start:end],
                incident_id=sentence.incident_id,
                sentence_index=sentence.index,
                start=offsets[start],
                end=offsets[end],
            )
        )
    return mentions


def _rule_candidates(
    sentence: Sentence, rules: Iterable[TagRule], registry: EntityTypeRegistry
) -> list[_Candidate]:
    text = sentence.text
    offsets = byte_offsets(text)
    candidates = []
    for rule in rules:
        etype = registry.intern(rule.entity_type)
        for match in rule.pattern.finditer(text):
            if match.start() == match.end():
                continue
            candidates.append(
                _Candidate(
                    mention=EntityMention(
                        entity_type=etype,
                        value=match.group(0),
                        incident_id=sentence.incident_id,
                        sentence_index=sentence.index,
                        start=offsets[match.start()],
                        end=offsets[match.end()],
                    ),
                    rank=_RANK_RULE,
                    priority=rule.priority,
                    order=rule.index,
                )
            )
    return candidates


def apply_rules(
    sentence: Sentence,
    rules: Iterable[TagRule],
    registry: EntityTypeRegistry | None = None,
) -> list[EntityMention]:
    """Match every rule against a sentence and resolve overlapping matches.

    Overlaps are won by priority, then leftmost-longest, then rule order.
    """
    registry = registry if registry is not None else EntityTypeRegistry()
    return _resolve_overlaps(_rule_candidates(sentence, rules, registry))


def load_pretagged(
    stream: TextIO,
    incident_set: IncidentSet,
    sentences: dict[str, list[Sentence]] | None = None,
    registry: EntityTypeRegistry | None = None,
) -> list[EntityMention]:
    """Load externally produced mentions and validate them against the corpus.

    Rows are tab-separated: incident_id, sentence_index, span_start,
    span_end, entity_type, value. Spans are UTF-8 byte ranges within the
    sentence text and must reproduce the value exactly.
    """
    registry = registry if registry is not None else EntityTypeRegistry()
    if sentences is None:
        sentences = sentence_index(incident_set)
    mentions = []
    for line_no, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("\t", 5)
        if len(parts) != 6:
            raise DataError("expected 6 tab-separated fields", line=line_no)
        incident_id, sent_text, start_text, end_text, type_name, value = parts
        if incident_id not in incident_set:
            raise DataError(f"unknown incident id {incident_id!r}", line=line_no)
        try:
            sent_idx, start, end = int(sent_text), int(start_text), int(end_text)
        except ValueError:
            raise DataError("sentence index and span must be integers", line=line_no) from None
        incident_sentences = sentences[incident_id]
        if not 0 <= sent_idx < len(incident_sentences):
            raise DataError(
                f"sentence index {sent_idx} out of range for incident {incident_id!r} "
                f"({len(incident_sentences)} sentences)",
                line=line_no,
            )
        sentence = incident_sentences[sent_idx]
        encoded = sentence.text.encode("utf-8")
        if not 0 <= start < end <= len(encoded):
            raise DataError(
                f"span [{start}, {end}) out of range for sentence of {len(encoded)} bytes",
                line=line_no,
            )
        try:
            spanned = encoded[start:end].decode("utf-8")
        except UnicodeDecodeError:
            raise DataError(f"span [{start}, {end}) splits a UTF-8 sequence", line=line_no) from None
        if spanned != value:
            raise DataError(
                f"span text {spanned!r} does not match value {value!r}", line=line_no
            )
        mentions.append(
            EntityMention(
                entity_type=registry.intern(type_name),
                value=value,
                incident_id=incident_id,
                sentence_index=sent_idx,
                start=start,
                end=end,
            )
        )
    return mentions


@dataclass(frozen=True)
class TaggedCorpus:
    """An incident set plus its final, overlap-free entity mentions."""

    incident_set: IncidentSet
    mentions: tuple[EntityMention, ...]
    type_census: dict[str, int]
    sentences: dict[str, list[Sentence]] = field(repr=False)


def tag_corpus(
    incident_set: IncidentSet,
    rules: Iterable[TagRule] = (),
    pretagged: TextIO | None = None,
) -> TaggedCorpus:
    """Tag a whole corpus: pattern extraction, rules, and pre-tags, unioned.

    Mentions identical in (incident, sentence, span, type) collapse to one;
    remaining overlaps are resolved pre-tag first, then rules by priority,
    then the structural extractor. Output is ordered by incident input
    order, sentence index, span start.
    """
    rules = list(rules)
    registry = EntityTypeRegistry()
    for rule in rules:
        registry.intern(rule.entity_type)
    sentences = sentence_index(incident_set)

    pretagged_by_unit: dict[tuple[str, int], list[EntityMention]] = {}
    if pretagged is not None:
        for mention in load_pretagged(pretagged, incident_set, sentences, registry):
            key = (mention.incident_id, mention.sentence_index)
            pretagged_by_unit.setdefault(key, []).append(mention)

    final: list[EntityMention] = []
    census: dict[str, int] = {}
    for incident in incident_set:
        for sentence in sentences[incident.id]:
            candidates = [
                _Candidate(m, rank=_RANK_PATTERN, priority=0, order=order)
                for order, m in enumerate(extract_key_value_entities(sentence, registry))
            ]
            candidates.extend(_rule_candidates(sentence, rules, registry))
            for order, mention in enumerate(
                pretagged_by_unit.get((incident.id, sentence.index), [])
            ):
                candidates.append(
                    _Candidate(mention, rank=_RANK_PRETAGGED, priority=0, order=order)
                )
            for mention in _resolve_overlaps(candidates):
                final.append(mention)
                census[mention.entity_type.name] = census.get(mention.entity_type.name, 0) + 1
    return TaggedCorpus(
        incident_set=incident_set,
        mentions=tuple(final),
        type_census=census,
        sentences=sentences,
    )


def load_tagged_corpus(incident_set: IncidentSet, mentions: TextIO) -> TaggedCorpus:
    """Rebuild a TaggedCorpus from a persisted mention file (the tag artifact)."""
    registry = EntityTypeRegistry()
    sentences = sentence_index(incident_set)
    loaded = load_pretagged(mentions, incident_set, sentences, registry)
    census: dict[str, int] = {}
    for mention in loaded:
        census[mention.entity_type.name] = census.get(mention.entity_type.name, 0) + 1
    return TaggedCorpus(
        incident_set=incident_set,
        mentions=tuple(loaded),
        type_census=census,
        sentences=sentences,
    )


def format_mentions(mentions: Iterable[EntityMention]) -> str:
    """Serialize mentions in the pre-tagged file format (the tag artifact)."""
    lines = [
        f"{m.incident_id}\t{m.sentence_index}\t{m.start}\t{m.end}\t{m.entity_type.name}\t{m.value}"
        for m in mentions
    ]
    return "".join(line + "\n" for line in lines)
