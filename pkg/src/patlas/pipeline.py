"""End-to-end pipeline: corpus -> clusters -> keywords -> registry -> credits
-> portfolio reports -> transaction stats, with a checksummed manifest.

The config file is a flat key = value text file (toml-compatible subset:
comments with #, optional quotes around strings). Every output artifact
carries the tool version and the config hash, and reruns with the same
config and corpus produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__, coclus, entity, portfolio, svg, topics, transactions
from .errors import ConfigError, PatlasError, StageError
from .ingest import (filter_and_build_matrix, load_corpus, merge_applications,
                     parse_records, save_corpus)

logger = logging.getLogger(__name__)

STAGES = ("ingest", "cluster", "keywords", "resolve", "credits", "portfolio",
          "transactions")


@dataclass
class PipelineConfig:
    input: str = ""
    format: str = "jsonl"
    g: int = 7
    restarts: int = 10
    seed: int = 42
    max_iter: int = 100
    p0: float = 99.0
    stopwords: str = ""
    aliases: str = ""
    base_year: int = 2004
    bins: int = 20
    heatmap_bins: int = 50
    top_k: int = 10
    keywords_top: int = 25
    curve_g_min: int = 0
    curve_g_max: int = 0

    def validate(self) -> None:
        if not self.input:
            raise ConfigError("config key 'input' is required")
        if self.format not in ("csv", "jsonl"):
            raise ConfigError(f"format must be csv or jsonl, got {self.format!r}")
        if self.g < 1:
            raise ConfigError("g must be >= 1")
        if self.restarts < 1 or self.max_iter < 1:
            raise ConfigError("restarts and max_iter must be >= 1")
        if not 85.0 <= self.p0 <= 99.0:
            raise ConfigError("p0 must be within [85, 99]")
        if self.bins < 1 or self.heatmap_bins < 1:
            raise ConfigError("bins must be >= 1")
        if self.top_k < 1 or self.keywords_top < 0:
            raise ConfigError("top_k must be >= 1")
        if (self.curve_g_min or self.curve_g_max) and \
                not 1 <= self.curve_g_min <= self.curve_g_max:
            raise ConfigError("need 1 <= curve_g_min <= curve_g_max")

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        values: dict = {}
        for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key = value")
            key, _, raw = line.partition("=")
            key = key.strip()
            raw = raw.strip().strip('"').strip("'")
            values[key] = raw
        known = {f: t for f, t in cls.__annotations__.items()}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            target = known[key]
            try:
                if target == "int":
                    kwargs[key] = int(raw)
                elif target == "float":
                    kwargs[key] = float(raw)
                else:
                    kwargs[key] = raw
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
        config = cls(**kwargs)
        config.validate()
        return config


# ---------------------------------------------------------------------------
# deterministic writers
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def csv_bytes(header: list[str], rows, meta: str) -> bytes:
    buf = io.StringIO()
    buf.write(f"# {meta}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue().encode("utf-8")


def json_bytes(doc: dict, meta: str) -> bytes:
    doc = {"meta": meta, **doc}
    return json.dumps(doc, indent=2, sort_keys=True).encode("utf-8") + b"\n"


class _Bundle:
    def __init__(self, out_dir: Path, config: "PipelineConfig"):
        self.out_dir = out_dir
        self.meta = (f"patlas={__version__} config={config.config_hash()} "
                     f"log_eps={portfolio.EPS:g}")
        self.config_json = json.dumps(config.to_dict(), sort_keys=True)
        self.artifacts: dict[str, str] = {}

    def _record(self, name: str, data: bytes) -> None:
        (self.out_dir / name).write_bytes(data)
        self.artifacts[name] = hashlib.sha256(data).hexdigest()

    def write_csv(self, name: str, header: list[str], rows) -> None:
        data = csv_bytes(header, rows, self.meta)
        head, _, rest = data.partition(b"\n")
        self._record(name, head + b"\n# config: " + self.config_json.encode() + b"\n" + rest)

    def write_json(self, name: str, doc: dict) -> None:
        self._record(name, json_bytes({"config": json.loads(self.config_json), **doc},
                                      self.meta))

    def write_svg(self, name: str, text: str) -> None:
        self._record(name, (f"<!-- {self.meta} -->\n<!-- config: {self.config_json} -->\n"
                            f"{text}").encode("utf-8"))

    def write_binary(self, name: str, path_writer) -> None:
        path = self.out_dir / name
        path_writer(path)
        self.artifacts[name] = hashlib.sha256(path.read_bytes()).hexdigest()


def read_csv_rows(path) -> list[dict]:
    """Read one of our CSVs, skipping '#' metadata lines."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def _stage_ingest(config: PipelineConfig, bundle: _Bundle):
    path = Path(config.input)
    if not path.exists():
        raise ConfigError(f"corpus path not found: {path}")
    if path.suffix == ".bin":
        patents = load_corpus(path)
    else:
        patents = merge_applications(parse_records(path, config.format))
    bundle.write_binary("corpus.bin", lambda p: save_corpus(patents, p))
    return patents


def _stage_cluster(config: PipelineConfig, bundle: _Bundle, patents):
    matrix = filter_and_build_matrix(patents)
    clustering = coclus.fit(matrix, config.g, seed=config.seed,
                            max_iter=config.max_iter, restarts=config.restarts)
    bundle.write_json("clusters.json", {
        "version": 1,
        "g": clustering.g,
        "modularity": clustering.modularity,
        "rows": {str(k): v for k, v in sorted(clustering.row_partition().items())},
        "cols": {str(k): v for k, v in sorted(clustering.col_partition().items())},
    })
    if config.curve_g_min:
        g_max = min(config.curve_g_max, min(matrix.n_rows, matrix.n_cols))
        curve = coclus.modularity_curve(matrix, range(config.curve_g_min, g_max + 1),
                                        seed=config.seed, restarts=config.restarts,
                                        max_iter=config.max_iter)
        bundle.write_csv("curve.csv", ["g", "modularity"], curve.points)
    return matrix, clustering


def _stage_keywords(config: PipelineConfig, bundle: _Bundle, patents, clustering):
    with_codes = [p for p in patents if p.ipc_subclasses]
    stop = topics.load_stopwords(config.stopwords) if config.stopwords else None
    corpus = topics.tokenize(with_codes, stop)
    rows = []
    for cluster in range(clustering.g):
        for rank, score in enumerate(
                topics.top_keywords(cluster, corpus, clustering, config.keywords_top), 1):
            rows.append([cluster, rank, score.word, score.m_in_cluster,
                         score.mu, score.sigma, score.z])
    bundle.write_csv("keywords.csv",
                     ["cluster", "rank", "word", "M", "mu", "sigma", "z"], rows)
    return corpus


def _stage_resolve(config: PipelineConfig, patents):
    registry = entity.build_registry(patents, p0=config.p0)
    scores = entity.original_match_scores(patents)
    match_threshold = 80.0
    if scores:
        counts, edges = entity.build_score_histogram(scores)
        try:
            match_threshold = entity.otsu_threshold(counts, edges)
        except PatlasError:
            logger.info("degenerate match-score histogram; using default threshold 80")
    assignments = entity.match_original_names(patents, registry, match_threshold)
    return registry, match_threshold, assignments


def _stage_credits(config: PipelineConfig, bundle: _Bundle, patents, clustering,
                   registry, match_threshold, assignments):
    ledger = entity.allocate_credits(patents, assignments, registry)
    ledger = entity.attach_areas(ledger, clustering)
    entity.fill_regions(registry, ledger)
    rows = []
    for row in sorted(ledger.rows, key=lambda r: r.application_id):
        for entity_id, credit in row.credits:
            rows.append([row.application_id, row.region, row.category, entity_id, credit])
    bundle.write_csv("credits.csv",
                     ["application_id", "region", "category", "entity_id", "credit"], rows)
    doc = registry.to_json()
    doc["match_threshold"] = match_threshold
    bundle.write_json("registry.json", doc)
    return ledger


def write_portfolio_reports(config: PipelineConfig, bundle: _Bundle, ledger, registry):
    """Emit the portfolio report bundle from a ledger with areas attached."""
    g = config.g
    years_seen = sorted({row.year for row in ledger.rows})
    last_year = years_seen[-1] if years_seen else config.base_year

    # entropy points per entity
    portfolios = portfolio.entity_portfolios(ledger, g)
    ent_rows = []
    points = []
    for entity_id in sorted(portfolios):
        areas = portfolios[entity_id]
        credit = sum(areas.values())
        s = portfolio.entropy(portfolio.portfolio_vector(areas, g))
        ent = registry.entities.get(entity_id)
        ent_rows.append([entity_id, ent.category if ent else "", ent.region if ent else "",
                         credit, s])
        points.append((credit, s))
    bundle.write_csv("entropy_points.csv",
                     ["entity_id", "category", "region", "credit", "entropy"], ent_rows)

    trajectories = portfolio.build_trajectories(ledger, g)
    vf_rows = []
    if any(len(t.points) >= 2 for t in trajectories):
        field = portfolio.trajectories_and_vector_field(
            trajectories, "log_credit", "entropy", bins=config.bins,
            base_year=config.base_year)
        for i in range(config.bins):
            for j in range(config.bins):
                if field.counts[i, j] == 0:
                    continue
                vf_rows.append([
                    i, j,
                    (field.x_edges[i] + field.x_edges[i + 1]) / 2,
                    (field.y_edges[j] + field.y_edges[j + 1]) / 2,
                    field.mean_dx[i, j], field.mean_dy[i, j],
                    int(field.counts[i, j]), int(field.density_class[i, j]),
                ])
    bundle.write_csv("vector_field.csv",
                     ["x_bin", "y_bin", "x_center", "y_center", "mean_dx", "mean_dy",
                      "count", "density_class"], vf_rows)

    hm = portfolio.heatmap(points, bins=config.heatmap_bins)
    hm_rows = []
    for i in range(config.heatmap_bins):
        for j in range(config.heatmap_bins):
            if hm.counts[i, j] == 0:
                continue
            hm_rows.append([i, j, hm.x_edges[i], hm.x_edges[i + 1],
                            hm.y_edges[j], hm.y_edges[j + 1],
                            int(hm.counts[i, j]), int(hm.density_class[i, j])])
    bundle.write_csv("heatmap.csv",
                     ["x_bin", "y_bin", "x_lo", "x_hi", "y_lo", "y_hi",
                      "count", "density_class"], hm_rows)
    bundle.write_svg("heatmap.svg", svg.heatmap_svg(hm, "entities: credit vs entropy"))

    # rankings: overall and per area
    for label, area in [("all", None)] + [(str(k), k) for k in range(g)]:
        ranks = portfolio.region_rankings(ledger, area=area, top_n=config.top_k)
        rows = []
        for year in sorted(ranks):
            for pos, (region, count) in enumerate(ranks[year], 1):
                rows.append([year, pos, region, count])
        bundle.write_csv(f"rankings_{label}.csv", ["year", "rank", "region", "count"], rows)
        if label == "all":
            bundle.write_svg("bump_all.svg",
                             svg.bump_chart_svg(ranks, "region rankings (all areas)"))

    for label, group_by in [("all", "none"), ("region", "region"), ("category", "category")]:
        series = portfolio.proportions_timeseries(ledger, group_by)
        rows = []
        for group in sorted(series):
            for year in sorted(series[group]):
                cell = series[group][year]
                for area in sorted(cell["counts"]):
                    rows.append([group, year, area, cell["counts"][area],
                                 cell["proportions"][area]])
        bundle.write_csv(f"proportions_{label}.csv",
                         ["group", "year", "area", "count", "proportion"], rows)

    # average log-entropy curves per (category x quartile group)
    curve_rows = []
    if len(trajectories) >= 4:
        try:
            qgroups = portfolio.quartile_groups(trajectories, last_year)
        except PatlasError:
            qgroups = {}
        if qgroups:
            combined = {}
            for entity_id, qg in qgroups.items():
                ent = registry.entities.get(entity_id)
                category = ent.category if ent else "others"
                combined[entity_id] = f"{category}/{qg}"
            curves = portfolio.avg_log_entropy_curves(
                trajectories, combined, range(min(years_seen), last_year + 1))
            for group in sorted(curves):
                for year in sorted(curves[group]):
                    curve_rows.append([group, year, curves[group][year]])
    bundle.write_csv("entropy_curves.csv", ["group", "year", "mean_log_entropy"],
                     curve_rows)


def _stage_transactions(config: PipelineConfig, bundle: _Bundle, patents, registry,
                        match_threshold, ledger):
    aliases = transactions.load_aliases(config.aliases) if config.aliases else None
    events = transactions.collect_events(patents, registry, match_threshold, aliases)
    categories = {row.application_id: row.category for row in ledger.rows}
    reassign = transactions.reassignment_stats(events, categories)
    licensing = transactions.licensing_stats(events, categories, ledger, config.top_k)

    ev_rows = []
    for ev in sorted(events, key=lambda e: (e.application_id, e.slots)):
        ev_rows.append([ev.application_id, ev.kind, ev.year, ev.assignor_entity,
                        ev.assignee_entity, ev.from_category, ev.to_category,
                        int(ev.internal), ev.reasons])
    bundle.write_csv("transactions.csv",
                     ["application_id", "kind", "year", "assignor_entity",
                      "assignee_entity", "from_category", "to_category",
                      "internal", "reasons"], ev_rows)

    def pair_key(d):
        return {f"{a}->{b}": v for (a, b), v in sorted(d.items())}

    stats_doc = {
        "reassignment": {
            cat: {
                "total_patents": s.total_patents,
                "unchanged": s.unchanged,
                "changed": s.changed,
                "pct_unchanged": s.pct_unchanged,
                "pct_changed": s.pct_changed,
                "n_transactions": s.n_transactions,
                "n_internal": s.n_internal,
                "pair_counts": pair_key(s.pair_counts),
                "pair_pcts": pair_key(s.pair_pcts),
                "pair_counts_external": pair_key(s.pair_counts_external),
                "pair_pcts_external": pair_key(s.pair_pcts_external),
            } for cat, s in reassign.items()
        },
        "licensing": {
            "total_instances": licensing.total_instances,
            "per_category": {
                cat: {
                    "total_patents": s.total_patents,
                    "histogram": {str(k): v for k, v in s.histogram.items()},
                    "licensed_patents": s.licensed_patents,
                    "pct_licensed": s.pct_licensed,
                    "instances": s.instances,
                } for cat, s in licensing.per_category.items()
            },
            "top_licensors": [[e, c] for e, c in licensing.top_licensors],
            "licensees": [[e, c, u] for e, c, u in licensing.licensees],
        },
    }
    bundle.write_json("stats.json", stats_doc)


def run_pipeline(config: PipelineConfig, out_dir) -> dict:
    """Run every stage and write the report bundle; returns the manifest."""
    config.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle = _Bundle(out_dir, config)

    def run(stage, fn, *args):
        try:
            return fn(config, *args)
        except Exception as exc:
            raise StageError(stage, exc) from exc

    patents = run("ingest", _stage_ingest, bundle)
    matrix, clustering = run("cluster", _stage_cluster, bundle, patents)
    run("keywords", _stage_keywords, bundle, patents, clustering)
    registry, match_threshold, assignments = run("resolve", _stage_resolve, patents)
    ledger = run("credits", _stage_credits, bundle, patents, clustering, registry,
                 match_threshold, assignments)
    run("portfolio", write_portfolio_reports, bundle, ledger, registry)
    run("transactions", _stage_transactions, bundle, patents, registry,
        match_threshold, ledger)

    manifest = {
        "tool": "patlas",
        "version": __version__,
        "config_hash": config.config_hash(),
        "config": config.to_dict(),
        "artifacts": dict(sorted(bundle.artifacts.items())),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest
