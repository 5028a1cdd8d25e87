from __future__ import annotations

import io
import math

import pytest

from incidentkg.errors import ConfigError
from incidentkg.relations import ScoredRelation, canonical_pair
from incidentkg.synth import (
    build_embedding_table_text,
    emit_labels,
    format_truth_pairs,
    generate_corpus,
    make_spec,
    parse_synth_spec,
    parse_truth_pairs,
    read_spec_values,
)

from test_relations import recount_from_mentions_text


def test_byte_identical_regeneration():
    spec = make_spec(seed=9, n_incidents=60, n_entity_types=104, n_pairs=40, n_clusters=8)
    first = generate_corpus(spec)
    second = generate_corpus(spec)
    assert first[1] == second[1]
    assert [i.id for i in first[0]] == [i.id for i in second[0]]
    assert [(i.title, i.description) for i in first[0]] == [
        (i.title, i.description) for i in second[0]
    ]
    assert first[2].related_pairs == second[2].related_pairs
    assert build_embedding_table_text(spec) == build_embedding_table_text(spec)


def test_different_seeds_differ():
    base = dict(n_incidents=40, n_entity_types=104, n_pairs=40, n_clusters=8)
    a = generate_corpus(make_spec(seed=1, **base))
    b = generate_corpus(make_spec(seed=2, **base))
    assert a[1] != b[1]


def test_full_rate_pair_reaches_npmi_one():
    import incidentkg.relations as relations
    from incidentkg.tagger import load_tagged_corpus

    spec = make_spec(
        seed=4, n_incidents=80, n_entity_types=14, n_pairs=4, n_clusters=2, pair_rate=1.0
    )
    incident_set, mentions_text, _truth = generate_corpus(spec)
    stats = relations.count_cooccurrences(
        load_tagged_corpus(incident_set, io.StringIO(mentions_text))
    )
    for (a, b), _rate in spec.planted_pairs:
        assert relations.npmi(stats, a, b) == 1.0


def test_empirical_rate_converges():
    # One pair per topic, two topics, enough incidents for >=1000 emitting
    # sentences per pair.
    spec = make_spec(
        seed=8, n_incidents=800, n_entity_types=12, n_pairs=2, n_clusters=2, pair_rate=0.5
    )
    _incidents, mentions_text, _truth = generate_corpus(spec)
    f, joint, _total = recount_from_mentions_text(mentions_text)
    for (a, b), rate in spec.planted_pairs:
        emitting = f[a]  # the first pair member appears in exactly its pair's sentences
        assert emitting >= 1000
        empirical = joint[canonical_pair(a, b)] / emitting
        assert abs(empirical - rate) <= 0.05
        sigma = math.sqrt(rate * (1 - rate) / emitting)
        assert abs(empirical - rate) <= 3 * sigma


def test_all_declared_types_emitted():
    spec = make_spec(seed=5, n_incidents=300, n_entity_types=104, n_pairs=40, n_clusters=8)
    _incidents, mentions_text, _truth = generate_corpus(spec)
    f, _joint, _total = recount_from_mentions_text(mentions_text)
    assert set(f) == spec.all_types()


def test_ground_truth_is_consistent_with_corpus():
    spec = make_spec(seed=6, n_incidents=120, n_entity_types=104, n_pairs=40, n_clusters=8)
    incident_set, mentions_text, truth = generate_corpus(spec)
    assert set(truth.cluster_of) == {inc.id for inc in incident_set}
    assert set(truth.planted_entities_of_topic) == set(range(spec.n_clusters))
    # Every related pair belongs to exactly one topic group.
    for a, b in truth.related_pairs:
        assert any(
            a in group and b in group for group in truth.planted_entities_of_topic.values()
        )
    # Co-occurring cross-topic pairs never happen.
    _f, joint, _total = recount_from_mentions_text(mentions_text)
    noise = set(spec.noise_pool)
    for a, b in joint:
        if a in noise or b in noise:
            continue
        assert canonical_pair(a, b) in truth.related_pairs


def test_emit_labels():
    truth_pairs = frozenset({("a", "b")})
    from incidentkg.synth import GroundTruth

    truth = GroundTruth(
        related_pairs=truth_pairs, cluster_of={}, planted_entities_of_topic={}
    )
    relations = [
        ScoredRelation(e1="a", e2="b", f1=5, f2=5, f_joint=3, npmi=0.8),
        ScoredRelation(e1="a", e2="c", f1=5, f2=2, f_joint=1, npmi=0.1),
    ]
    text = emit_labels(truth, relations)
    assert text == "a\tb\t1\na\tc\t0\n"
    assert len(text.splitlines()) == len(relations)


def test_truth_pairs_round_trip():
    spec = make_spec(seed=2, n_incidents=40, n_entity_types=104, n_pairs=40, n_clusters=8)
    _incidents, _mentions, truth = generate_corpus(spec)
    text = format_truth_pairs(truth)
    assert parse_truth_pairs(io.StringIO(text)) == truth.related_pairs


def test_spec_file_parsing_and_defaults():
    values = read_spec_values(io.StringIO("seed=3\nn_incidents=50\n# comment\n"))
    assert values["seed"] == 3 and values["n_incidents"] == 50
    assert values["n_clusters"] == 8
    spec = parse_synth_spec(io.StringIO("seed=3\nn_incidents=50\n"))
    assert spec.seed == 3 and spec.n_incidents == 50


def test_spec_file_unknown_key():
    with pytest.raises(ConfigError, match="n_widgets"):
        read_spec_values(io.StringIO("n_widgets=3\n"))


def test_spec_validation_errors():
    with pytest.raises(ConfigError, match="too small"):
        make_spec(n_entity_types=50, n_pairs=40)
    with pytest.raises(ConfigError, match="pair per cluster"):
        make_spec(n_pairs=4, n_clusters=8)
    with pytest.raises(ConfigError, match="rate"):
        make_spec(pair_rate=1.5)


def test_embedding_table_matches_vocabulary():
    spec = make_spec(seed=7, n_incidents=40, n_entity_types=104, n_pairs=40, n_clusters=8)
    lines = build_embedding_table_text(spec).splitlines()
    tokens = {line.split(" ", 1)[0] for line in lines}
    expected = {kw for group in spec.vocabulary for kw in group}
    assert tokens == expected
    assert all(len(line.split()) == spec.embedding_dim + 1 for line in lines)
