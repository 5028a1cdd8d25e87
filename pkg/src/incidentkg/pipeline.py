"""Pipeline stages, configuration, and artifact management.

Every stage reads its inputs from files (either user-supplied paths or
artifacts earlier stages left in the output directory), writes plain-text
artifacts under fixed names, and records a manifest listing every resolved
parameter plus a content hash per input and artifact. ``all`` simply chains
the stages, so staged and monolithic executions are byte-identical by
construction. Manifests contain no timestamps; identical config and inputs
reproduce identical bytes.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import os
from dataclasses import dataclass, fields
from pathlib import Path

from . import kgraph, relations, relevance, synth, tagger, titlecluster
from .corpus import IncidentSet, load_incidents
from .errors import ConfigError, DataError

logger = logging.getLogger(__name__)

ARTIFACT_NAMES = {
    "ingest": ("incidents.jsonl",),
    "tag": ("mentions.tsv", "census.tsv"),
    "relations": ("relations.tsv",),
    "graph": ("graph.tsv",),
    "cliques": ("cliques.tsv",),
    "kdist": ("kdist.tsv",),
    "cluster": ("clusters.tsv",),
    "relate": ("report.txt",),
    "eval": ("labels.tsv", "curve.tsv"),
    "synth": (
        "synth_incidents.jsonl",
        "synth_mentions.tsv",
        "synth_embeddings.txt",
        "synth_truth_pairs.tsv",
        "synth_truth_clusters.tsv",
    ),
}

_PATH_KEYS = ("incidents", "rules", "pretagged", "embeddings", "labels", "truth_pairs", "synth_spec")


@dataclass(frozen=True)
class PipelineConfig:
    incidents: str | None = None
    incidents_format: str = "jsonl"
    rules: str | None = None
    pretagged: str | None = None
    embeddings: str | None = None
    labels: str | None = None
    truth_pairs: str | None = None
    synth_spec: str | None = None
    epsilon: float | str = "auto"
    min_pts: int = 4
    metric: str = "cosine-distance"
    k: int = 5
    clique_min_size: int = 2
    max_eval_rank: int = 100
    embedding_dim: int = 100
    outdir: str = "out"
    seed: int | None = None


_DEFAULTS = {f.name: f.default for f in fields(PipelineConfig)}


def _coerce(key: str, raw: str):
    if key in ("min_pts", "k", "clique_min_size", "max_eval_rank", "embedding_dim", "seed"):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"config key {key!r} must be an integer, got {raw!r}") from None
    if key == "epsilon":
        if raw == "auto":
            return "auto"
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"config key 'epsilon' must be 'auto' or a number, got {raw!r}") from None
    return raw


def _validate(config: PipelineConfig) -> None:
    if config.incidents_format not in ("jsonl", "csv"):
        raise ConfigError("incidents_format must be one of: jsonl, csv")
    if config.metric not in titlecluster.METRICS:
        raise ConfigError(f"metric must be one of: {', '.join(titlecluster.METRICS)}")
    if config.epsilon != "auto" and not config.epsilon > 0:
        raise ConfigError("epsilon must be positive (or 'auto')")
    if config.min_pts < 1:
        raise ConfigError("min_pts must be >= 1")
    if config.k < 1:
        raise ConfigError("k must be >= 1")
    if config.clique_min_size < 2:
        raise ConfigError("clique_min_size must be >= 2")
    if config.max_eval_rank < 1:
        raise ConfigError("max_eval_rank must be >= 1")
    if config.embedding_dim < 1:
        raise ConfigError("embedding_dim must be >= 1")
    outdir = Path(config.outdir).resolve()
    for key in _PATH_KEYS:
        value = getattr(config, key)
        if value is None:
            continue
        path = Path(value)
        if path.exists():
            continue
        # Paths inside the output directory may be produced by an earlier
        # stage of this run; everything else must exist up front.
        if outdir not in path.resolve().parents:
            raise ConfigError(f"config key {key!r}: path {value!r} does not exist")


def validate_config(path: str | None, overrides: dict[str, str] | None = None) -> PipelineConfig:
    """Load a key=value config file, apply flag overrides, validate ranges.

    Unknown keys are rejected by name; every omitted key takes its default
    (all values, defaulted or not, are echoed into stage manifests).
    """
    values: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"config line {line_no}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _DEFAULTS:
                raise ConfigError(f"config line {line_no}: unknown key {key!r}")
            values[key] = _coerce(key, value)
    for key, value in (overrides or {}).items():
        if key not in _DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, value)
    config = PipelineConfig(**values)
    _validate(config)
    return config


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


class StageRun:
    """Tracks one stage's inputs, extra facts, and written artifacts.

    Artifacts are written to a temp name and renamed on success; if the
    stage raises, everything it wrote (including temp files) is removed so
    no partial artifact survives.
    """

    def __init__(self, config: PipelineConfig, stage: str):
        self.config = config
        self.stage = stage
        self.outdir = Path(config.outdir)
        self.inputs: dict[str, Path] = {}
        self.facts: dict[str, str] = {}
        self.artifacts: dict[str, Path] = {}

    def input_path(self, label: str, path: str | Path) -> Path:
        resolved = Path(path)
        if not resolved.exists():
            raise DataError(f"{self.stage}: required input {resolved} is missing")
        self.inputs[label] = resolved
        return resolved

    def artifact_input(self, name: str) -> Path:
        """An artifact of an earlier stage, read from the output directory."""
        path = self.outdir / name
        if not path.exists():
            raise DataError(
                f"{self.stage}: expected artifact {path} from an earlier stage; run it first"
            )
        self.inputs[name] = path
        return path

    def write_artifact(self, name: str, text: str) -> Path:
        self.outdir.mkdir(parents=True, exist_ok=True)
        final = self.outdir / name
        tmp = self.outdir / (name + ".tmp")
        tmp.write_text(text, encoding="utf-8", newline="")
        os.replace(tmp, final)
        self.artifacts[name] = final
        return final

    def discard_artifacts(self) -> None:
        for path in self.artifacts.values():
            path.unlink(missing_ok=True)
        for tmp in self.outdir.glob("*.tmp"):
            tmp.unlink(missing_ok=True)

    def write_manifest(self) -> Path:
        lines = [f"subcommand={self.stage}"]
        for key in sorted(_DEFAULTS):
            value = getattr(self.config, key)
            lines.append(f"parameter.{key}={'' if value is None else value}")
        for key in sorted(self.facts):
            lines.append(f"resolved.{key}={self.facts[key]}")
        for label in sorted(self.inputs):
            lines.append(f"input.{label}={self.inputs[label]}\tsha256:{_sha256(self.inputs[label])}")
        for name in sorted(self.artifacts):
            lines.append(f"artifact.{name}={self.artifacts[name]}\tsha256:{_sha256(self.artifacts[name])}")
        text = "".join(line + "\n" for line in lines)
        final = self.outdir / f"manifest_{self.stage}.tsv"
        final.write_text(text, encoding="utf-8", newline="")
        return final


def _load_incident_artifact(run: StageRun) -> IncidentSet:
    path = run.artifact_input("incidents.jsonl")
    with open(path, "rb") as handle:
        return load_incidents(handle, "jsonl", source=str(path))


def _load_corpus(run: StageRun) -> tagger.TaggedCorpus:
    incident_set = _load_incident_artifact(run)
    mentions_path = run.artifact_input("mentions.tsv")
    with open(mentions_path, "r", encoding="utf-8") as handle:
        return tagger.load_tagged_corpus(incident_set, handle)


def stage_ingest(run: StageRun) -> None:
    config = run.config
    if config.incidents is None:
        raise ConfigError("ingest requires the 'incidents' config key")
    source = run.input_path("incidents", config.incidents)
    with open(source, "rb") as handle:
        incident_set = load_incidents(handle, config.incidents_format, source=str(source))
    if incident_set.provenance.decode_replacements:
        logger.warning(
            "replaced %d invalid UTF-8 sequences while ingesting %s",
            incident_set.provenance.decode_replacements,
            source,
        )
    lines = [
        json.dumps({"id": inc.id, "title": inc.title, "description": inc.description})
        for inc in incident_set
    ]
    run.write_artifact("incidents.jsonl", "".join(line + "\n" for line in lines))
    run.facts["incident_count"] = str(len(incident_set))


def stage_tag(run: StageRun) -> None:
    config = run.config
    incident_set = _load_incident_artifact(run)
    rules = []
    if config.rules is not None:
        rules_path = run.input_path("rules", config.rules)
        with open(rules_path, "r", encoding="utf-8") as handle:
            rules = tagger.load_rules(handle)
    pretagged_text = None
    if config.pretagged is not None:
        pretagged_path = run.input_path("pretagged", config.pretagged)
        pretagged_text = pretagged_path.read_text(encoding="utf-8")
    corpus = tagger.tag_corpus(
        incident_set,
        rules,
        io.StringIO(pretagged_text) if pretagged_text is not None else None,
    )
    run.write_artifact("mentions.tsv", tagger.format_mentions(corpus.mentions))
    census_lines = [f"{name}\t{count}" for name, count in sorted(corpus.type_census.items())]
    run.write_artifact("census.tsv", "".join(line + "\n" for line in census_lines))
    run.facts["mention_count"] = str(len(corpus.mentions))
    run.facts["entity_type_count"] = str(len(corpus.type_census))


def stage_relations(run: StageRun) -> None:
    corpus = _load_corpus(run)
    stats = relations.count_cooccurrences(corpus)
    extracted = relations.extract_binary_relations(stats)
    run.write_artifact("relations.tsv", relations.format_relations(extracted))
    run.facts["relation_count"] = str(len(extracted))
    run.facts["f_total"] = str(stats.f_total)


def stage_graph(run: StageRun) -> None:
    path = run.artifact_input("relations.tsv")
    with open(path, "r", encoding="utf-8") as handle:
        extracted = relations.parse_relations(handle)
    graph = kgraph.build_graph(extracted)
    run.write_artifact("graph.tsv", kgraph.export_graph(graph))
    run.facts["node_count"] = str(len(graph.nodes))
    run.facts["edge_count"] = str(len(graph.edges))


def stage_cliques(run: StageRun) -> None:
    path = run.artifact_input("graph.tsv")
    with open(path, "r", encoding="utf-8") as handle:
        graph = kgraph.import_graph(handle)
    cliques = kgraph.maximal_cliques(graph, min_size=run.config.clique_min_size)
    run.write_artifact("cliques.tsv", "".join("\t".join(c) + "\n" for c in cliques))
    run.facts["clique_count"] = str(len(cliques))


def _load_title_vectors(run: StageRun) -> list[titlecluster.TitleVector]:
    config = run.config
    if config.embeddings is None:
        raise ConfigError(f"{run.stage} requires the 'embeddings' config key")
    incident_set = _load_incident_artifact(run)
    embeddings_path = run.input_path("embeddings", config.embeddings)
    with open(embeddings_path, "r", encoding="utf-8") as handle:
        table = titlecluster.load_embeddings(handle, config.embedding_dim)
    return titlecluster.embed_titles(incident_set, table)


def _profile_k(config: PipelineConfig) -> int:
    # Elbow heuristic uses the (min_pts - 1)-distance, floored at 1.
    return max(1, config.min_pts - 1)


def stage_kdist(run: StageRun) -> None:
    vectors = _load_title_vectors(run)
    profile = titlecluster.kdistance_profile(vectors, _profile_k(run.config), run.config.metric)
    run.write_artifact("kdist.tsv", titlecluster.format_kdistance(profile))
    if len(profile) >= 3:
        run.facts["suggested_epsilon"] = f"{titlecluster.suggest_epsilon(profile):.17g}"


def stage_cluster(run: StageRun) -> None:
    config = run.config
    vectors = _load_title_vectors(run)
    if config.epsilon == "auto":
        profile = titlecluster.kdistance_profile(vectors, _profile_k(config), config.metric)
        epsilon = titlecluster.suggest_epsilon(profile)
        run.facts["epsilon"] = f"auto->{epsilon:.17g}"
    else:
        epsilon = float(config.epsilon)
        run.facts["epsilon"] = f"{epsilon:.17g}"
    clustering = titlecluster.ClusteringConfig(
        epsilon=epsilon, min_pts=config.min_pts, metric=config.metric
    )
    assignment = titlecluster.dbscan(vectors, clustering)
    run.write_artifact("clusters.tsv", titlecluster.format_clusters(assignment))
    run.facts["cluster_count"] = str(assignment.n_clusters)


def stage_relate(run: StageRun) -> None:
    corpus = _load_corpus(run)
    with open(run.artifact_input("graph.tsv"), "r", encoding="utf-8") as handle:
        graph = kgraph.import_graph(handle)
    with open(run.artifact_input("clusters.tsv"), "r", encoding="utf-8") as handle:
        assignment = titlecluster.parse_clusters(handle)
    reports = relevance.build_reports(graph, assignment, corpus, k=run.config.k)
    run.write_artifact("report.txt", relevance.format_reports(reports, corpus))
    run.facts["report_count"] = str(len(reports))


def stage_eval(run: StageRun) -> None:
    config = run.config
    with open(run.artifact_input("relations.tsv"), "r", encoding="utf-8") as handle:
        extracted = relations.parse_relations(handle)
    if config.labels is not None:
        labels_path = run.input_path("labels", config.labels)
        with open(labels_path, "r", encoding="utf-8") as handle:
            labels = relations.parse_labels(handle)
        labels_text = labels_path.read_text(encoding="utf-8")
    elif config.truth_pairs is not None:
        truth_path = run.input_path("truth_pairs", config.truth_pairs)
        with open(truth_path, "r", encoding="utf-8") as handle:
            related = synth.parse_truth_pairs(handle)
        labels = {r.pair: r.pair in related for r in extracted}
        labels_text = "".join(
            f"{r.e1}\t{r.e2}\t{1 if labels[r.pair] else 0}\n" for r in extracted
        )
    else:
        raise ConfigError("eval requires either the 'labels' or the 'truth_pairs' config key")
    run.write_artifact("labels.tsv", labels_text)
    curve = relations.precision_at_n(extracted, labels, config.max_eval_rank)
    run.write_artifact(
        "curve.tsv", "".join(f"{n}\t{p:.6f}\n" for n, p in curve.points)
    )
    run.facts["precision_at_max_rank"] = f"{curve.points[-1][1]:.6f}"


def stage_synth(run: StageRun) -> None:
    config = run.config
    if config.synth_spec is None:
        raise ConfigError("synth requires the 'synth_spec' config key")
    spec_path = run.input_path("synth_spec", config.synth_spec)
    with open(spec_path, "r", encoding="utf-8") as handle:
        values = synth.read_spec_values(handle)
    if config.seed is not None:
        values["seed"] = config.seed
    spec = synth.make_spec(**values)
    incident_set, mentions_text, truth = synth.generate_corpus(spec)
    lines = [
        json.dumps({"id": inc.id, "title": inc.title, "description": inc.description})
        for inc in incident_set
    ]
    run.write_artifact("synth_incidents.jsonl", "".join(line + "\n" for line in lines))
    run.write_artifact("synth_mentions.tsv", mentions_text)
    run.write_artifact("synth_embeddings.txt", synth.build_embedding_table_text(spec))
    run.write_artifact("synth_truth_pairs.tsv", synth.format_truth_pairs(truth))
    run.write_artifact("synth_truth_clusters.tsv", synth.format_truth_clusters(truth))
    run.facts["rng"] = synth.RNG_ALGORITHM
    run.facts["spec_seed"] = str(spec.seed)
    run.facts["incident_count"] = str(len(incident_set))


_STAGES = {
    "ingest": stage_ingest,
    "tag": stage_tag,
    "relations": stage_relations,
    "graph": stage_graph,
    "cliques": stage_cliques,
    "kdist": stage_kdist,
    "cluster": stage_cluster,
    "relate": stage_relate,
    "eval": stage_eval,
    "synth": stage_synth,
}

_ALL_SEQUENCE = ("ingest", "tag", "relations", "graph", "cliques", "cluster", "relate", "eval")

SUBCOMMANDS = tuple(_STAGES) + ("all",)


def run_stage(stage: str, config: PipelineConfig) -> None:
    """Run one subcommand; on failure, remove the artifacts it wrote."""
    if stage == "all":
        sequence = list(_ALL_SEQUENCE)
        if config.labels is None and config.truth_pairs is None:
            sequence.remove("eval")
            logger.info("no labels or truth_pairs configured; skipping eval")
        outer = StageRun(config, "all")
        for key in _PATH_KEYS:
            value = getattr(config, key)
            if value is not None and Path(value).exists():
                outer.inputs[key] = Path(value)
        for name in sequence:
            run_stage(name, config)
            for artifact in ARTIFACT_NAMES[name]:
                outer.artifacts[artifact] = Path(config.outdir) / artifact
        outer.write_manifest()
        return
    if stage not in _STAGES:
        raise ConfigError(f"unknown subcommand {stage!r}")
    run = StageRun(config, stage)
    try:
        _STAGES[stage](run)
    except Exception:
        run.discard_artifacts()
        raise
    run.write_manifest()
    logger.info("%s: wrote %s", stage, ", ".join(sorted(run.artifacts)))
