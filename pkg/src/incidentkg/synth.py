"""Deterministic synthetic incident corpora with planted ground truth.

Each incident belongs to a planted topic. Its title is drawn from the
topic's keyword set (solvable by averaged-embedding clustering with the
matching toy embedding table); its description sentences emit one of the
topic's planted entity pairs, the first member always, the second at the
pair's co-presence rate, plus the topic's context entities and occasional
noise-pool mentions.

Ground truth records every pair the generator systematically co-emits:
the explicit planted pairs and all other within-topic pairs (pair members
with context entities, context entities with each other). Pairs of types
from different topics never share a sentence; noise-pool co-occurrences are
coincidences and are labeled invalid.

Everything is driven by one seeded Mersenne Twister stream (the CPython
``random`` module), so identical spec and seed regenerate byte-identical
outputs.
"""

from __future__ import annotations

import io
import itertools
import json
import random
from dataclasses import dataclass
from typing import Iterable, TextIO

from .corpus import IncidentSet, load_incidents
from .errors import ConfigError, DataError
from .relations import ScoredRelation, canonical_pair

RNG_ALGORITHM = "mersenne-twister (cpython random)"

_TYPE_FIRST_WORDS = (
    "Gate", "Route", "Vnet", "Node", "Port", "Link", "Host", "Cert",
    "Pool", "Disk", "Tunnel", "Subnet", "Zone", "Probe", "Queue", "Shard",
)
_TYPE_SECOND_WORDS = (
    "Id", "Name", "Key", "Code", "Uri", "Index", "State",
    "Count", "Range", "Label", "Owner", "Region", "Version",
)

_TITLE_WORD_POOL = (
    "vnet", "gateway", "tunnel", "subnet", "packet", "latency", "dns",
    "firewall", "routing", "peering", "balancer", "endpoint", "probe",
    "timeout", "throttle", "quota", "capacity", "allocation", "deployment",
    "provisioning", "replica", "failover", "leader", "election", "storage",
    "volume", "snapshot", "backup", "restore", "archive", "blob", "queue",
    "topic", "stream", "ingestion", "pipeline", "batch", "worker", "scheduler",
    "cron", "cache", "eviction", "session", "token", "certificate", "rotation",
    "expiry", "handshake", "cipher", "identity", "login", "directory", "sync",
    "mirror", "registry", "image", "container", "cluster", "autoscale", "drain",
    "upgrade", "patch", "rollback", "canary", "telemetry", "metric", "alert",
    "monitor", "heartbeat", "watchdog", "logging", "audit", "tracing", "span",
    "billing", "invoice", "ledger", "payment", "checkout", "catalog", "search",
    "index", "ranking", "crawler", "frontend", "render", "static", "bundle",
    "database", "replication", "sharding", "partition", "migration", "schema",
    "query", "deadlock", "vacuum", "compaction", "nameserver", "resolver",
    "listener", "socket", "keepalive", "congestion", "jitter", "bandwidth",
    "multicast", "switch", "chassis", "linecard", "optic", "transceiver",
    "datacenter", "rack", "kernel", "driver", "firmware", "bios", "hypervisor",
    "guest", "bridge", "overlay", "underlay", "encapsulation",
)

_FILLER_WORDS = (
    "observed", "failure", "during", "retry", "after", "repeated", "attempts",
    "reported", "degraded", "state", "while", "processing", "request",
    "unexpected", "response", "from", "upstream", "service", "operation",
    "returned", "errors", "intermittently", "under", "load",
)


@dataclass(frozen=True)
class SynthSpec:
    """Everything needed to regenerate one synthetic corpus."""

    seed: int
    n_incidents: int
    n_entity_types: int
    n_clusters: int
    planted_pairs: tuple[tuple[tuple[str, str], float], ...]
    context_entities: tuple[tuple[str, ...], ...]
    noise_pool: tuple[str, ...]
    noise_mention_rate: float
    vocabulary: tuple[tuple[str, ...], ...]
    min_desc_sentences: int = 2
    max_desc_sentences: int = 5
    embedding_dim: int = 100
    embedding_jitter: float = 0.03

    def __post_init__(self):
        if self.n_incidents < 1 or self.n_clusters < 1:
            raise ConfigError("n_incidents and n_clusters must be positive")
        if len(self.vocabulary) != self.n_clusters or len(self.context_entities) != self.n_clusters:
            raise ConfigError("vocabulary and context_entities must have one entry per cluster")
        if not 0.0 <= self.noise_mention_rate <= 1.0:
            raise ConfigError("noise_mention_rate must lie in [0, 1]")
        if not 1 <= self.min_desc_sentences <= self.max_desc_sentences:
            raise ConfigError("description sentence range is invalid")
        declared = self.all_types()
        if len(declared) != self.n_entity_types:
            raise ConfigError(
                f"spec declares {self.n_entity_types} types but defines {len(declared)}"
            )
        for (a, b), rate in self.planted_pairs:
            if a == b or a not in declared or b not in declared:
                raise ConfigError(f"planted pair ({a!r}, {b!r}) references undeclared types")
            if not 0.0 < rate <= 1.0:
                raise ConfigError(f"co-presence rate {rate} outside (0, 1]")

    def all_types(self) -> set[str]:
        types = set(self.noise_pool)
        for (a, b), _rate in self.planted_pairs:
            types.update((a, b))
        for group in self.context_entities:
            types.update(group)
        return types


@dataclass(frozen=True)
class GroundTruth:
    related_pairs: frozenset[tuple[str, str]]
    cluster_of: dict[str, int]
    planted_entities_of_topic: dict[int, tuple[str, ...]]


_SPEC_DEFAULTS = {
    "seed": 0,
    "n_incidents": 400,
    "n_entity_types": 104,
    "n_pairs": 40,
    "n_clusters": 8,
    "context_per_topic": 2,
    "pair_rate": 0.7,
    "noise_mention_rate": 0.1,
    "keywords_per_topic": 10,
    "min_desc_sentences": 2,
    "max_desc_sentences": 5,
    "embedding_dim": 100,
    "embedding_jitter": 0.03,
}


def make_spec(
    seed: int = 0,
    n_incidents: int = 400,
    n_entity_types: int = 104,
    n_pairs: int = 40,
    n_clusters: int = 8,
    context_per_topic: int = 2,
    pair_rate: float = 0.7,
    noise_mention_rate: float = 0.1,
    keywords_per_topic: int = 10,
    min_desc_sentences: int = 2,
    max_desc_sentences: int = 5,
    embedding_dim: int = 100,
    embedding_jitter: float = 0.03,
) -> SynthSpec:
    """Expand scalar knobs into a full SynthSpec with generated names.

    Type names and topic keyword sets are drawn deterministically from the
    seed, so a spec file carrying only counts and rates pins the corpus.
    """
    if n_pairs < n_clusters:
        raise ConfigError("need at least one planted pair per cluster")
    needed = 2 * n_pairs + n_clusters * context_per_topic
    if n_entity_types < needed + 2:
        raise ConfigError(
            f"n_entity_types={n_entity_types} too small: "
            f"{needed} planted types plus a noise pool of at least 2"
        )
    combos = [f"{a} {b}" for a, b in itertools.product(_TYPE_FIRST_WORDS, _TYPE_SECOND_WORDS)]
    if n_entity_types > len(combos):
        raise ConfigError(f"at most {len(combos)} entity types are supported")
    if n_clusters * keywords_per_topic > len(_TITLE_WORD_POOL):
        raise ConfigError("title vocabulary pool too small for the requested topics")
    if n_clusters > embedding_dim:
        raise ConfigError("embedding_dim must be at least n_clusters")

    rng = random.Random(seed)
    type_names = rng.sample(combos, n_entity_types)
    pair_types = type_names[: 2 * n_pairs]
    planted_pairs = tuple(
        ((pair_types[2 * j], pair_types[2 * j + 1]), pair_rate) for j in range(n_pairs)
    )
    context_flat = type_names[2 * n_pairs : needed]
    context_entities = tuple(
        tuple(context_flat[t * context_per_topic : (t + 1) * context_per_topic])
        for t in range(n_clusters)
    )
    noise_pool = tuple(type_names[needed:])

    title_words = list(_TITLE_WORD_POOL)
    rng.shuffle(title_words)
    vocabulary = tuple(
        tuple(title_words[t * keywords_per_topic : (t + 1) * keywords_per_topic])
        for t in range(n_clusters)
    )
    return SynthSpec(
        seed=seed,
        n_incidents=n_incidents,
        n_entity_types=n_entity_types,
        n_clusters=n_clusters,
        planted_pairs=planted_pairs,
        context_entities=context_entities,
        noise_pool=noise_pool,
        noise_mention_rate=noise_mention_rate,
        vocabulary=vocabulary,
        min_desc_sentences=min_desc_sentences,
        max_desc_sentences=max_desc_sentences,
        embedding_dim=embedding_dim,
        embedding_jitter=embedding_jitter,
    )


def read_spec_values(stream: TextIO) -> dict:
    """Read a key=value spec file; unknown keys are rejected by name."""
    values: dict[str, object] = dict(_SPEC_DEFAULTS)
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _SPEC_DEFAULTS:
            raise ConfigError(f"line {line_no}: unknown synth spec key {key!r}")
        try:
            values[key] = float(value) if isinstance(_SPEC_DEFAULTS[key], float) else int(value)
        except ValueError:
            raise ConfigError(f"line {line_no}: malformed value for {key!r}") from None
    return values


def parse_synth_spec(stream: TextIO) -> SynthSpec:
    return make_spec(**read_spec_values(stream))


def _value_for(type_name: str, rng: random.Random) -> str:
    prefix = "".join(word[0].lower() for word in type_name.split())
    return f"{prefix}-{rng.randrange(100000):05d}"


class _SentenceBuilder:
    """Accumulates one sentence's text plus mention spans (ASCII, so the
    character positions are the byte positions)."""

    def __init__(self):
        self.text = ""
        self.mentions: list[tuple[str, str, int, int]] = []

    def add_words(self, words: Iterable[str]) -> None:
        for word in words:
            self.text += (" " if self.text else "") + word

    def add_mention(self, type_name: str, value: str) -> None:
        lead = (" " if self.text else "") + type_name + ": "
        start = len(self.text) + len(lead)
        self.text += lead + value
        self.mentions.append((type_name, value, start, len(self.text)))

    def finish(self) -> str:
        return self.text + "."


def generate_corpus(spec: SynthSpec) -> tuple[IncidentSet, str, GroundTruth]:
    """Generate (incident set, pre-tagged mention stream, ground truth).

    Deterministic under the spec seed. Raises if any declared entity type
    ended up unmentioned, since downstream ground-truth checks assume the
    full taxonomy is present.
    """
    rng = random.Random(spec.seed)

    pairs_of_topic: dict[int, list[tuple[tuple[str, str], float]]] = {
        t: [] for t in range(spec.n_clusters)
    }
    for j, planted in enumerate(spec.planted_pairs):
        pairs_of_topic[j % spec.n_clusters].append(planted)
    if any(not pairs for pairs in pairs_of_topic.values()):
        raise ConfigError("every topic needs at least one planted pair")

    group_of_topic: dict[int, list[str]] = {}
    for t in range(spec.n_clusters):
        members: list[str] = []
        for (a, b), _rate in pairs_of_topic[t]:
            members.extend((a, b))
        members.extend(spec.context_entities[t])
        group_of_topic[t] = list(dict.fromkeys(members))

    related: set[tuple[str, str]] = set()
    for group in group_of_topic.values():
        for a, b in itertools.combinations(group, 2):
            related.add(canonical_pair(a, b))

    noise_cycle = list(spec.noise_pool)
    rng.shuffle(noise_cycle)
    noise_emitted = 0
    pair_cursor = {t: 0 for t in range(spec.n_clusters)}
    context_cursor = {t: 0 for t in range(spec.n_clusters)}
    pair_seen: set[tuple[str, str]] = set()

    jsonl_lines: list[str] = []
    mention_lines: list[str] = []
    cluster_of: dict[str, int] = {}
    seen_types: set[str] = set()

    for i in range(spec.n_incidents):
        topic = i % spec.n_clusters
        incident_id = f"INC-{i:05d}"
        cluster_of[incident_id] = topic

        keywords = spec.vocabulary[topic]
        title = " ".join(rng.sample(keywords, rng.randint(3, min(6, len(keywords)))))

        sentence_texts: list[str] = []
        n_sentences = rng.randint(spec.min_desc_sentences, spec.max_desc_sentences)
        for _ in range(n_sentences):
            builder = _SentenceBuilder()
            builder.add_words(rng.sample(_FILLER_WORDS, 2))

            topic_pairs = pairs_of_topic[topic]
            (first, second), rate = topic_pairs[pair_cursor[topic] % len(topic_pairs)]
            pair_cursor[topic] += 1
            builder.add_mention(first, _value_for(first, rng))
            emit_second = rng.random() < rate
            if (first, second) not in pair_seen:
                pair_seen.add((first, second))
                emit_second = True
            if emit_second:
                builder.add_mention(second, _value_for(second, rng))

            contexts = spec.context_entities[topic]
            slots = min(2, len(contexts))
            for s in range(slots):
                ctx = contexts[(context_cursor[topic] + s) % len(contexts)]
                builder.add_mention(ctx, _value_for(ctx, rng))
            context_cursor[topic] += slots

            if spec.noise_pool and rng.random() < spec.noise_mention_rate:
                if noise_emitted < len(noise_cycle):
                    noise_type = noise_cycle[noise_emitted]
                else:
                    noise_type = rng.choice(noise_cycle)
                noise_emitted += 1
                builder.add_mention(noise_type, _value_for(noise_type, rng))

            sentence_index = len(sentence_texts) + 1  # title is sentence 0
            for type_name, value, start, end in builder.mentions:
                mention_lines.append(
                    f"{incident_id}\t{sentence_index}\t{start}\t{end}\t{type_name}\t{value}"
                )
                seen_types.add(type_name)
            sentence_texts.append(builder.finish())

        record = {"id": incident_id, "title": title, "description": " ".join(sentence_texts)}
        jsonl_lines.append(json.dumps(record))

    missing = spec.all_types() - seen_types
    if missing:
        raise DataError(
            f"{len(missing)} declared entity types were never emitted "
            f"(first: {sorted(missing)[0]!r}); increase n_incidents or rates"
        )

    incident_set = load_incidents(
        io.BytesIO("".join(line + "\n" for line in jsonl_lines).encode("utf-8")),
        "jsonl",
        source=f"synth(seed={spec.seed})",
    )
    mentions_text = "".join(line + "\n" for line in mention_lines)
    truth = GroundTruth(
        related_pairs=frozenset(related),
        cluster_of=cluster_of,
        planted_entities_of_topic={t: tuple(group) for t, group in group_of_topic.items()},
    )
    return incident_set, mentions_text, truth


def build_embedding_table_text(spec: SynthSpec) -> str:
    """Toy embedding file matching the spec's topic vocabulary.

    Topic keywords sit near mutually orthogonal centers with a small
    deterministic jitter, so averaged title vectors cluster by topic.
    """
    rng = random.Random(f"{spec.seed}:embeddings")
    lines = []
    for topic, keywords in enumerate(spec.vocabulary):
        for keyword in keywords:
            vector = [rng.gauss(0.0, spec.embedding_jitter) for _ in range(spec.embedding_dim)]
            vector[topic] += 1.0
            lines.append(keyword + " " + " ".join(f"{v:.6f}" for v in vector))
    return "".join(line + "\n" for line in lines)


def emit_labels(truth: GroundTruth, relations: Iterable[ScoredRelation]) -> str:
    """Label each extracted relation: valid iff the pair is related by construction."""
    return "".join(
        f"{r.e1}\t{r.e2}\t{1 if r.pair in truth.related_pairs else 0}\n" for r in relations
    )


def format_truth_pairs(truth: GroundTruth) -> str:
    return "".join(f"{a}\t{b}\n" for a, b in sorted(truth.related_pairs))


def parse_truth_pairs(stream: TextIO) -> frozenset[tuple[str, str]]:
    pairs = set()
    for line_no, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError("expected 2 tab-separated fields", line=line_no)
        pairs.add(canonical_pair(parts[0], parts[1]))
    return frozenset(pairs)


def format_truth_clusters(truth: GroundTruth) -> str:
    return "".join(f"{iid}\t{topic}\n" for iid, topic in truth.cluster_of.items())
