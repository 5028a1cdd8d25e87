"""incidentkg: mine structured knowledge from unstructured incident reports.

The pipeline tags typed entities in incident text, scores entity-type pairs
by normalized pointwise mutual information over sentence co-occurrence,
builds a weighted undirected knowledge graph, reads n-ary relations off its
maximal cliques, clusters incident titles by averaged word embeddings, and
ranks the entities most relevant to each cluster via graph paths.
"""

from .corpus import Incident, IncidentSet, Sentence, Token, load_incidents, segment_sentences, tokenize
from .kgraph import KnowledgeGraph, build_graph, export_graph, import_graph, maximal_cliques, shortest_paths_from
from .relations import (
    CooccurrenceStats,
    ScoredRelation,
    count_cooccurrences,
    extract_binary_relations,
    npmi,
    npmi_from_counts,
    pmi,
    pmi_from_counts,
    precision_at_n,
)
from .relevance import ClusterEntityReport, related_entities, relation_score, select_primary_entity, top_frequent_entities
from .synth import GroundTruth, SynthSpec, emit_labels, generate_corpus, make_spec
from .tagger import EntityMention, EntityType, TaggedCorpus, TagRule, apply_rules, extract_key_value_entities, load_pretagged, load_rules, tag_corpus
from .titlecluster import (
    NOISE,
    ClusterAssignment,
    ClusteringConfig,
    EmbeddingTable,
    TitleVector,
    dbscan,
    embed_title,
    kdistance_profile,
    load_embeddings,
    suggest_epsilon,
)

__version__ = "0.1.0"
