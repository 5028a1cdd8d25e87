from __future__ import annotations

import io
import math
import random
from collections import Counter
from itertools import combinations

import pytest

from incidentkg.errors import DataError
from incidentkg.relations import (
    CooccurrenceStats,
    ScoredRelation,
    canonical_pair,
    count_cooccurrences,
    extract_binary_relations,
    format_relations,
    npmi,
    npmi_from_counts,
    parse_labels,
    parse_relations,
    pmi,
    pmi_from_counts,
    precision_at_n,
)
from incidentkg.synth import generate_corpus, make_spec
from incidentkg.tagger import load_tagged_corpus

from conftest import incidents_from_records


def recount_from_mentions_text(mentions_text: str):
    """Independent recount: raw TSV -> per-unit type sets -> counts."""
    units: dict[tuple[str, str], set[str]] = {}
    for line in mentions_text.splitlines():
        iid, sidx, _s, _e, etype, _value = line.split("\t", 5)
        units.setdefault((iid, sidx), set()).add(etype)
    f: Counter = Counter()
    joint: Counter = Counter()
    for types in units.values():
        for t in types:
            f[t] += 1
        for a, b in combinations(sorted(types), 2):
            joint[(a, b)] += 1
    return dict(f), dict(joint), sum(f.values())


def random_stats(rng: random.Random, n_types: int = 8) -> CooccurrenceStats:
    names = [f"t{i:02d}" for i in range(n_types)]
    f = {name: rng.randint(1, 50) for name in names}
    f_joint = {}
    for a, b in combinations(names, 2):
        if rng.random() < 0.6:
            cap = min(f[a], f[b])
            joint = rng.randint(1, cap)
            f_joint[(a, b)] = joint
    return CooccurrenceStats(f=f, f_joint=f_joint, f_total=sum(f.values()))


def _stats(f, f_joint):
    return CooccurrenceStats(f=f, f_joint=f_joint, f_total=sum(f.values()))


class TestPmi:
    def test_tenfold_association(self):
        assert pmi_from_counts(10, 10, 10, 100) == pytest.approx(math.log(10), abs=1e-12)

    def test_exact_independence_is_zero(self):
        assert pmi_from_counts(10, 10, 1, 100) == 0.0

    def test_symmetry_bit_exact(self):
        rng = random.Random(7)
        for _ in range(500):
            stats = random_stats(rng)
            for (a, b) in stats.f_joint:
                assert pmi(stats, a, b) == pmi(stats, b, a)

    def test_zero_joint_is_an_error(self):
        with pytest.raises(ValueError, match="npmi"):
            pmi_from_counts(5, 5, 0, 100)

    def test_unknown_type_named(self):
        stats = _stats({"a": 1}, {})
        with pytest.raises(ValueError, match="'b'"):
            pmi(stats, "a", "b")


class TestNpmi:
    def test_complete_cooccurrence_is_exactly_one(self):
        assert npmi_from_counts(10, 10, 10, 100) == 1.0

    def test_independence_is_exactly_zero(self):
        assert npmi_from_counts(10, 10, 1, 100) == 0.0

    def test_partial_association(self):
        expected = math.log(5) / math.log(40)
        assert npmi_from_counts(20, 10, 5, 200) == pytest.approx(expected, abs=1e-12)
        assert npmi_from_counts(20, 10, 5, 200) == pytest.approx(0.43629, abs=1e-4)

    def test_never_cooccurring_is_minus_one(self):
        assert npmi_from_counts(10, 10, 0, 100) == -1.0

    def test_joint_probability_one_limit(self):
        # f_joint = f_total forces f1 = f2 = f_total, where pmi is 0, so the
        # defined limit returns 0 rather than +1.
        assert npmi_from_counts(5, 5, 5, 5) == 0.0
        # One step away from the degenerate limit: p2 = 1 makes the pair
        # exactly as likely as independence predicts.
        assert npmi_from_counts(4, 5, 4, 5) == 0.0

    def test_self_pair_rejected(self):
        stats = _stats({"a": 2}, {})
        with pytest.raises(ValueError, match="self-pair"):
            npmi(stats, "a", "a")

    def test_invalid_counts_rejected(self):
        with pytest.raises(ValueError):
            npmi_from_counts(2, 2, 3, 10)
        with pytest.raises(ValueError):
            npmi_from_counts(0, 2, 0, 10)
        with pytest.raises(ValueError):
            npmi_from_counts(11, 2, 1, 10)

    def test_range_and_symmetry_random(self):
        rng = random.Random(11)
        for _ in range(300):
            stats = random_stats(rng)
            for (a, b) in stats.f_joint:
                forward = npmi(stats, a, b)
                assert forward == npmi(stats, b, a)
                assert -1.0 <= forward <= 1.0

    def test_one_iff_complete_cooccurrence(self):
        for f1 in range(1, 8):
            for f2 in range(1, 8):
                for joint in range(0, min(f1, f2) + 1):
                    f_total = 64
                    value = npmi_from_counts(f1, f2, joint, f_total)
                    if value == 1.0:
                        assert f1 == f2 == joint
                    if f1 == f2 == joint:
                        assert value == 1.0
                    assert (value == -1.0) == (joint == 0)

    def test_strictly_monotone_in_joint_count(self):
        for f1, f2, f_total in [(5, 7, 40), (10, 10, 100), (3, 12, 60)]:
            values = [npmi_from_counts(f1, f2, j, f_total) for j in range(0, min(f1, f2) + 1)]
            for lo, hi in zip(values, values[1:]):
                assert lo < hi

    def test_base_invariance(self):
        def npmi_base2(f1, f2, joint, f_total):
            return math.log2((joint * f_total) / (f1 * f2)) / math.log2(f_total / joint)

        rng = random.Random(13)
        for _ in range(300):
            stats = random_stats(rng)
            for (a, b), joint in stats.f_joint.items():
                expected = npmi_base2(stats.f[a], stats.f[b], joint, stats.f_total)
                assert npmi(stats, a, b) == pytest.approx(expected, abs=1e-12)

    def test_table_ordering_for_shared_totals(self):
        rows = [(564, 558, 557), (761, 654, 486), (860, 985, 432), (1071, 985, 124)]
        for f_total in (1071, 2056, 5000, 10**5, 10**9):
            scores = [npmi_from_counts(f1, f2, j, f_total) for f1, f2, j in rows]
            assert scores == sorted(scores, reverse=True)
            assert len(set(scores)) == len(scores)


class TestCounting:
    def _corpus(self, records):
        return load_tagged_corpus(
            incidents_from_records([r[0] for r in records]),
            io.StringIO("".join(r[1] for r in records)),
        )

    def test_three_types_one_sentence(self):
        incident_set = incidents_from_records(
            [{"id": "I1", "title": "A: 1 B: 2 C: 3", "description": ""}]
        )
        from incidentkg.tagger import tag_corpus

        stats = count_cooccurrences(tag_corpus(incident_set))
        assert stats.f == {"A": 1, "B": 1, "C": 1}
        assert stats.f_joint == {("A", "B"): 1, ("A", "C"): 1, ("B", "C"): 1}
        assert stats.f_total == 3

    def test_presence_not_mention_count(self):
        incident_set = incidents_from_records(
            [{"id": "I1", "title": "A: one A: two", "description": ""}]
        )
        from incidentkg.tagger import tag_corpus

        stats = count_cooccurrences(tag_corpus(incident_set))
        assert stats.f == {"A": 1}
        assert stats.f_joint == {}

    def test_empty_corpus(self):
        from incidentkg.tagger import tag_corpus

        stats = count_cooccurrences(tag_corpus(incidents_from_records([])))
        assert stats.f == {} and stats.f_joint == {} and stats.f_total == 0

    def test_synth_counts_match_independent_recount(self):
        spec = make_spec(seed=21, n_incidents=150, n_entity_types=104, n_pairs=40, n_clusters=8)
        incident_set, mentions_text, _truth = generate_corpus(spec)
        corpus = load_tagged_corpus(incident_set, io.StringIO(mentions_text))
        stats = count_cooccurrences(corpus)
        f, joint, total = recount_from_mentions_text(mentions_text)
        assert stats.f == f
        assert stats.f_joint == joint
        assert stats.f_total == total

    def test_joint_bounded_by_marginals(self):
        spec = make_spec(seed=22, n_incidents=120, n_entity_types=104, n_pairs=40, n_clusters=8)
        incident_set, mentions_text, _truth = generate_corpus(spec)
        stats = count_cooccurrences(load_tagged_corpus(incident_set, io.StringIO(mentions_text)))
        for (a, b), joint in stats.f_joint.items():
            assert joint <= min(stats.f[a], stats.f[b])
        assert stats.f_total == sum(stats.f.values())

    def test_merge_of_halves_equals_whole(self):
        spec = make_spec(seed=23, n_incidents=80, n_entity_types=104, n_pairs=40, n_clusters=8)
        incident_set, mentions_text, _truth = generate_corpus(spec)
        corpus = load_tagged_corpus(incident_set, io.StringIO(mentions_text))
        whole = count_cooccurrences(corpus)

        half_ids = {inc.id for inc in list(incident_set)[:40]}
        lines = mentions_text.splitlines()
        first = "".join(l + "\n" for l in lines if l.split("\t", 1)[0] in half_ids)
        second = "".join(l + "\n" for l in lines if l.split("\t", 1)[0] not in half_ids)
        merged = count_cooccurrences(
            load_tagged_corpus(incident_set, io.StringIO(first))
        ).merge(count_cooccurrences(load_tagged_corpus(incident_set, io.StringIO(second))))
        assert merged.f == whole.f
        assert merged.f_joint == whole.f_joint
        assert merged.f_total == whole.f_total


class TestExtraction:
    def test_boundary_zero_survives(self):
        stats = _stats({"a": 10, "b": 10, "pad": 80}, {("a", "b"): 1})
        relations = extract_binary_relations(stats)
        assert [(r.pair, r.npmi) for r in relations] == [(("a", "b"), 0.0)]

    def test_negative_filtered(self):
        stats = _stats({"a": 10, "b": 10, "pad": 30}, {("a", "b"): 1})
        assert npmi(stats, "a", "b") < 0
        assert extract_binary_relations(stats) == []

    def test_sorted_by_npmi_then_joint(self):
        rng = random.Random(31)
        for _ in range(50):
            stats = random_stats(rng)
            relations = extract_binary_relations(stats)
            keys = [(-r.npmi, -r.f_joint, r.pair) for r in relations]
            assert keys == sorted(keys)
            assert all(r.npmi >= 0 for r in relations)

    def test_synth_planted_pairs_survive_above_noise(self):
        spec = make_spec(
            seed=42, n_incidents=1200, n_entity_types=124, n_pairs=50,
            n_clusters=10, pair_rate=0.7, noise_mention_rate=0.1,
        )
        incident_set, mentions_text, truth = generate_corpus(spec)
        stats = count_cooccurrences(load_tagged_corpus(incident_set, io.StringIO(mentions_text)))
        relations = extract_binary_relations(stats)
        survivors = {r.pair for r in relations}
        explicit = {canonical_pair(a, b) for (a, b), _rate in spec.planted_pairs}
        assert explicit <= survivors
        noise_scores = sorted(r.npmi for r in relations if r.pair not in truth.related_pairs)
        assert noise_scores, "expected some coincidental noise pairs"
        median_noise = noise_scores[len(noise_scores) // 2]
        assert min(r.npmi for r in relations if r.pair in explicit) > median_noise


class TestPrecision:
    def _relations(self, n):
        return [
            ScoredRelation(e1=f"a{i:03d}", e2=f"b{i:03d}", f1=10, f2=10, f_joint=n - i, npmi=0.5)
            for i in range(n)
        ]

    def test_example_curve(self):
        relations = self._relations(4)
        labels = {r.pair: flag for r, flag in zip(relations, [True, True, False, True])}
        curve = precision_at_n(relations, labels, 4)
        assert [p for _n, p in curve.points] == pytest.approx([1.0, 1.0, 2 / 3, 0.75])

    def test_all_valid_constant_one(self):
        relations = self._relations(150)
        labels = {r.pair: True for r in relations}
        curve = precision_at_n(relations, labels, 150)
        assert all(p == 1.0 for _n, p in curve.points)

    def test_missing_label_names_pair(self):
        relations = self._relations(3)
        labels = {relations[0].pair: True, relations[2].pair: False}
        with pytest.raises(ValueError, match=r"a001"):
            precision_at_n(relations, labels, 3)

    def test_too_few_relations(self):
        with pytest.raises(ValueError, match="at least"):
            precision_at_n(self._relations(3), {}, 10)

    def test_ranking_is_by_joint_count(self):
        relations = list(reversed(self._relations(5)))
        labels = {r.pair: r.f_joint >= 4 for r in relations}
        curve = precision_at_n(relations, labels, 5)
        assert curve.labels == (True, True, False, False, False)


class TestIO:
    def test_round_trip(self):
        rng = random.Random(41)
        stats = random_stats(rng)
        relations = extract_binary_relations(stats)
        text = format_relations(relations)
        parsed = parse_relations(io.StringIO(text))
        assert [(r.pair, r.f1, r.f2, r.f_joint) for r in parsed] == [
            (r.pair, r.f1, r.f2, r.f_joint) for r in relations
        ]
        for before, after in zip(relations, parsed):
            assert after.npmi == pytest.approx(before.npmi, abs=5e-7)

    def test_npmi_printed_with_six_decimals(self):
        text = format_relations(
            [ScoredRelation(e1="a", e2="b", f1=1, f2=1, f_joint=1, npmi=0.123456789)]
        )
        assert text == "a\tb\t1\t1\t1\t0.123457\n"

    def test_parse_rejects_malformed(self):
        with pytest.raises(DataError, match="line 1"):
            parse_relations(io.StringIO("a\tb\tx\t1\t1\t0.5\n"))
        with pytest.raises(DataError, match="6 tab"):
            parse_relations(io.StringIO("a\tb\t1\n"))
        with pytest.raises(DataError, match="duplicate"):
            parse_relations(io.StringIO("a\tb\t1\t1\t1\t0.5\nb\ta\t1\t1\t1\t0.5\n"))

    def test_parse_normalizes_pair_order(self):
        parsed = parse_relations(io.StringIO("b\ta\t3\t4\t2\t0.5\n"))
        assert parsed[0].pair == ("a", "b")
        assert (parsed[0].f1, parsed[0].f2) == (4, 3)

    def test_labels_round_trip(self):
        labels = parse_labels(io.StringIO("a\tb\t1\nc\td\t0\n"))
        assert labels == {("a", "b"): True, ("c", "d"): False}
        with pytest.raises(DataError, match="flag"):
            parse_labels(io.StringIO("a\tb\t2\n"))
