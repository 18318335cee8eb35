"""Assignee-name resolution, categorization, and credit allocation.

Names sharing a DWPI code form a similarity-weighted graph; edges below a
global percentile threshold are pruned and the surviving connected components
become entities. Names appearing under several codes are settled by a
cascade (best max similarity, then best average similarity, then standard
code form, then smallest entity id). Original first-assignee names are then
matched against the registry with an Otsu threshold over the observed score
histogram, and each patent's credit is split equally over its distinct
first-assignee entities.
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import kernels
from .errors import PatlasError
from .ingest import PatentRecord

logger = logging.getLogger(__name__)

CATEGORIES = ("corporation", "university", "others")
UNKNOWN_REGION = "??"

_WORD_RE = re.compile(r"[A-Z0-9]+")


# ---------------------------------------------------------------------------
# similarity
# ---------------------------------------------------------------------------

def normalize_name(name: str) -> str:
    return " ".join(name.split())


def similarity(a: str, b: str) -> float:
    """Max of the normal, partial, and partial-token-sort Levenshtein ratios.

    normal = 100*(1 - lev(a,b)/max(len)); partial = best normal ratio of the
    shorter string against every equal-length substring of the longer;
    partial token sort = partial after sorting whitespace tokens. Symmetric,
    in [0, 100], and 100 iff the strings are equal or one is a substring /
    token-sorted substring of the other.
    """
    a = normalize_name(a)
    b = normalize_name(b)
    if not a or not b:
        raise PatlasError("similarity of an empty name is undefined")
    return float(kernels.score_one(kernels.prepare_name(a), kernels.prepare_name(b)))


def pairwise_scores(names: list[str]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All-pairs scores within one name list: (left idx, right idx, score)."""
    n = len(names)
    prepared = [kernels.prepare_name(s) for s in names]
    left = np.repeat(np.arange(n, dtype=np.int64), np.arange(n - 1, -1, -1, dtype=np.int64))
    right = np.concatenate([np.arange(i + 1, n, dtype=np.int64) for i in range(n)]) \
        if n > 1 else np.empty(0, dtype=np.int64)
    scores = kernels.score_pairs_threaded(prepared, left, right)
    return left, right, scores


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Entity:
    entity_id: str
    code: str
    names: tuple[str, ...]
    category: str
    region: str = "unknown"


@dataclass
class IdentityRegistry:
    """Resolved mapping from assignee names to unique entity ids."""

    name_to_entity: dict[str, str] = field(default_factory=dict)
    entities: dict[str, Entity] = field(default_factory=dict)
    p0: float = 99.0
    threshold: float = 100.0  # percentile-derived edge threshold actually used

    def entity_of(self, name: str) -> str | None:
        return self.name_to_entity.get(normalize_name(name))

    def add_singleton(self, name: str, category: str | None = None,
                      region: str = "unknown") -> str:
        """Register a name seen nowhere in the DWPI pool as its own entity."""
        name = normalize_name(name)
        existing = self.name_to_entity.get(name)
        if existing:
            return existing
        entity_id = f"~{name}#0"
        self.name_to_entity[name] = entity_id
        self.entities[entity_id] = Entity(
            entity_id, "", (name,),
            category if category else categorize_name(name), region)
        return entity_id

    def category_of(self, entity_id: str) -> str:
        return self.entities[entity_id].category

    def all_names(self) -> list[str]:
        return sorted(self.name_to_entity)

    def to_json(self) -> dict:
        return {
            "version": 1,
            "p0": self.p0,
            "threshold": self.threshold,
            "names": dict(sorted(self.name_to_entity.items())),
            "entities": {
                eid: {"code": e.code, "names": list(e.names),
                      "category": e.category, "region": e.region}
                for eid, e in sorted(self.entities.items())
            },
        }

    @classmethod
    def from_json(cls, doc: dict) -> "IdentityRegistry":
        reg = cls(p0=float(doc.get("p0", 99.0)), threshold=float(doc.get("threshold", 100.0)))
        reg.name_to_entity = dict(doc["names"])
        for eid, e in doc["entities"].items():
            reg.entities[eid] = Entity(eid, e["code"], tuple(e["names"]),
                                       e["category"], e.get("region", "unknown"))
        return reg


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _components(names: list[str], left, right, scores, threshold: float) -> list[list[str]]:
    """Connected components after pruning edges with weight < threshold,
    ordered by size (desc) then smallest member name."""
    uf = _UnionFind(len(names))
    for a, b, s in zip(left, right, scores):
        if s >= threshold:
            uf.union(int(a), int(b))
    groups: dict[int, list[str]] = {}
    for i, name in enumerate(names):
        groups.setdefault(uf.find(i), []).append(name)
    comps = [sorted(g) for g in groups.values()]
    comps.sort(key=lambda g: (-len(g), g[0]))
    return comps


def split_code(code: str, names: list[str], threshold: float,
               precomputed=None) -> list[tuple[str, list[str]]]:
    """Split one DWPI code's names into entities at the given edge threshold.

    Returns (entity_id, member names) with ids ``code#0, code#1, ...`` in
    size-then-name order. ``threshold`` is the globally derived percentile
    value (see build_registry); ``precomputed`` may carry (left, right,
    scores) for the code's name pairs.
    """
    names = sorted({normalize_name(n) for n in names if normalize_name(n)})
    if not names:
        raise PatlasError(f"code {code!r} has no names")
    if precomputed is None:
        precomputed = pairwise_scores(names)
    comps = _components(names, *precomputed, threshold)
    return [(f"{code}#{i}", members) for i, members in enumerate(comps)]


def code_form_rank(code: str) -> int:
    """Priority of the DWPI code form: standard (-C) < non-standard (-N) < other."""
    form = code.rpartition("|")[2]
    if form.startswith("C"):
        return 0
    if form.startswith("N"):
        return 1
    return 2


@dataclass(frozen=True)
class CandidateComponent:
    entity_id: str
    code: str
    members: tuple[str, ...]


def _candidate_rank(name: str, cand: CandidateComponent,
                    prepared_cache: dict) -> tuple:
    others = [m for m in cand.members if m != name]
    if others:
        me = prepared_cache.setdefault(name, kernels.prepare_name(name))
        sims = [float(kernels.score_one(me, prepared_cache.setdefault(o, kernels.prepare_name(o))))
                for o in others]
        max_sim = max(sims)
        avg_sim = sum(sims) / len(sims)
    else:
        max_sim = avg_sim = 0.0
    return (-max_sim, -avg_sim, code_form_rank(cand.code), cand.entity_id)


def resolve_name(name: str, candidates: list[CandidateComponent]) -> str:
    """Pick the entity a multi-code name belongs to.

    Cascade: highest max-similarity to the name's co-members, then highest
    average similarity, then code form (-C over -N over other), then smallest
    entity id.
    """
    if not candidates:
        raise PatlasError(f"no candidate components for {name!r}")
    name = normalize_name(name)
    cache: dict = {}
    return min(candidates, key=lambda c: _candidate_rank(name, c, cache)).entity_id


def collect_name_pools(patents: list[PatentRecord]) -> dict[str, list[str]]:
    """Distinct normalized assignee names per DWPI code, over the corpus."""
    names_by_code: dict[str, set[str]] = {}
    for pat in patents:
        for raw_name, code in pat.assignee_name_pool:
            name = normalize_name(raw_name)
            code = code.strip()
            if name and code:
                names_by_code.setdefault(code, set()).add(name)
    return {code: sorted(names) for code, names in sorted(names_by_code.items())}


def score_name_pools(names_by_code: dict[str, list[str]]):
    """One pooled scoring pass over every intra-code name pair.

    Returns (per_code, pooled) where per_code[code] = (names, left, right,
    scores) and pooled is the concatenated score distribution the percentile
    threshold is drawn from.
    """
    per_code: dict[str, tuple] = {}
    pool_chunks = []
    for code in sorted(names_by_code):
        names = sorted(names_by_code[code])
        left, right, scores = pairwise_scores(names)
        per_code[code] = (names, left, right, scores)
        if len(scores):
            pool_chunks.append(scores)
    pooled = np.concatenate(pool_chunks) if pool_chunks else np.empty(0)
    return per_code, pooled


def registry_from_scores(per_code: dict[str, tuple], pooled: np.ndarray,
                         p0: float) -> IdentityRegistry:
    """Build the registry from precomputed pair scores at percentile p0."""
    if not 85.0 <= p0 <= 99.0:
        raise PatlasError(f"p0 must be within [85, 99], got {p0}")
    threshold = float(np.percentile(pooled, p0)) if pooled.size else 100.0
    registry = IdentityRegistry(p0=p0, threshold=threshold)
    homes: dict[str, list[CandidateComponent]] = {}
    for code in sorted(per_code):
        names, left, right, scores = per_code[code]
        for entity_id, members in split_code(code, names, threshold, (left, right, scores)):
            cand = CandidateComponent(entity_id, code, tuple(members))
            for member in members:
                homes.setdefault(member, []).append(cand)

    winners: dict[str, str] = {}
    for name in sorted(homes):
        cands = homes[name]
        winners[name] = cands[0].entity_id if len(cands) == 1 else resolve_name(name, cands)

    members_of: dict[str, list[str]] = {}
    code_of: dict[str, str] = {}
    for name, entity_id in winners.items():
        members_of.setdefault(entity_id, []).append(name)
    for cands in homes.values():
        for cand in cands:
            code_of[cand.entity_id] = cand.code
    for entity_id in sorted(members_of):
        members = tuple(sorted(members_of[entity_id]))
        category = categorize_entity([categorize_name(n) for n in members])
        registry.entities[entity_id] = Entity(entity_id, code_of[entity_id], members, category)
        for name in members:
            registry.name_to_entity[name] = entity_id
    return registry


def build_registry(patents: list[PatentRecord], p0: float = 99.0) -> IdentityRegistry:
    """Resolve all DWPI (name, code) pairs in the corpus into entities.

    The edge threshold is the p0-th percentile of the pooled intra-code pair
    scores (computed once over all codes), per the 85 <= p0 <= 99 splitting
    rule; each code's pruned similarity graph then contributes one entity per
    connected component, and names under several codes are settled by
    resolve_name.
    """
    per_code, pooled = score_name_pools(collect_name_pools(patents))
    return registry_from_scores(per_code, pooled, p0)


# ---------------------------------------------------------------------------
# Otsu threshold
# ---------------------------------------------------------------------------

def build_score_histogram(scores, bins: int = 100, lo: float = 0.0, hi: float = 100.0):
    counts, edges = np.histogram(np.asarray(scores, dtype=np.float64), bins=bins, range=(lo, hi))
    return counts.astype(np.int64), edges


def otsu_threshold(counts, edges=None) -> float:
    """Histogram cut maximizing the between-class variance w0*w1*(mu0-mu1)^2.

    Bins are assumed equal-width (the argmax is invariant under affine center
    transforms, so unit-spaced centers are used internally and compared with
    exact integer arithmetic). Ties take the middle tied cut, so a symmetric
    bimodal histogram cuts at its center. Returns the upper edge of the last
    bin in the lower class.
    """
    counts = [int(c) for c in counts]
    bins = len(counts)
    if bins < 2:
        raise PatlasError("need at least 2 bins")
    if sum(1 for c in counts if c > 0) < 2:
        raise PatlasError("unimodal histogram: fewer than 2 nonempty bins")
    if edges is None:
        edges = list(range(bins + 1))
    elif len(edges) != bins + 1:
        raise PatlasError("edges must have len(counts) + 1 values")

    total_n = sum(counts)
    total_s = sum(c * (2 * i + 1) for i, c in enumerate(counts))  # scaled centers
    best_num = best_den = None  # best variance as exact fraction num/den
    tied: list[int] = []
    n0 = 0
    s0 = 0
    for k in range(bins - 1):
        n0 += counts[k]
        s0 += counts[k] * (2 * k + 1)
        n1 = total_n - n0
        if n0 == 0 or n1 == 0:
            continue
        s1 = total_s - s0
        num = (s0 * n1 - s1 * n0) ** 2
        den = n0 * n1
        if best_num is None or num * best_den > best_num * den:
            best_num, best_den = num, den
            tied = [k]
        elif num * best_den == best_num * den:
            tied.append(k)
    if not tied:
        raise PatlasError("no valid cut point")
    return float(edges[tied[len(tied) // 2] + 1])


# ---------------------------------------------------------------------------
# categorization
# ---------------------------------------------------------------------------

def load_category_keywords(path=None) -> dict[str, list[list[str]]]:
    """Keyword lists for name categorization, each keyword pre-tokenized.

    The default ships with the package; pass a JSON file of the same shape
    ({"university": [...], "corporation": [...]}) to extend or replace it.
    """
    if path is None:
        raw = resources.files("patlas.data").joinpath("categories.json").read_text("utf-8")
    else:
        raw = Path(path).read_text(encoding="utf-8")
    doc = json.loads(raw)
    return {cat: [kw.upper().split() for kw in doc.get(cat, [])]
            for cat in ("university", "corporation")}


_DEFAULT_KEYWORDS = None


def _keywords() -> dict[str, list[list[str]]]:
    global _DEFAULT_KEYWORDS
    if _DEFAULT_KEYWORDS is None:
        _DEFAULT_KEYWORDS = load_category_keywords()
    return _DEFAULT_KEYWORDS


def _contains_phrase(tokens: list[str], phrase: list[str]) -> bool:
    if len(phrase) == 1:
        return phrase[0] in tokens
    for i in range(len(tokens) - len(phrase) + 1):
        if tokens[i:i + len(phrase)] == phrase:
            return True
    return False


def categorize_name(name: str, keywords=None) -> str:
    """university / corporation / others by token-wise keyword match;
    university takes precedence over corporation."""
    if not name.strip():
        raise PatlasError("cannot categorize an empty name")
    kw = keywords if keywords is not None else _keywords()
    tokens = _WORD_RE.findall(name.upper())
    for phrase in kw["university"]:
        if _contains_phrase(tokens, phrase):
            return "university"
    for phrase in kw["corporation"]:
        if _contains_phrase(tokens, phrase):
            return "corporation"
    return "others"


def categorize_entity(name_categories: list[str]) -> str:
    """Majority vote over member-name categories; ties go to 'others'."""
    if not name_categories:
        raise PatlasError("entity has no names")
    counts = Counter(name_categories)
    ranked = counts.most_common()
    if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
        return "others"
    return ranked[0][0]


def patent_category(entity_categories: list[str]) -> str:
    """Majority vote over first-assignee entity categories; ties → 'others'."""
    return categorize_entity(list(entity_categories))


# ---------------------------------------------------------------------------
# original-name matching and credits
# ---------------------------------------------------------------------------

def parse_region(address: str) -> str:
    """Trailing 2-letter country token of a comma-separated address."""
    if address:
        token = address.rsplit(",", 1)[-1].strip().upper()
        if len(token) == 2 and token.isalpha():
            return token
    logger.debug("unparseable address %r", address)
    return UNKNOWN_REGION


def _top_global_candidates(name: str, registry: IdentityRegistry, threshold: float,
                           limit: int = 5) -> list[str]:
    pool = registry.all_names()
    if not pool:
        return []
    prepared = [kernels.prepare_name(n) for n in pool] + [kernels.prepare_name(name)]
    idx = np.full(len(pool), len(pool), dtype=np.int64)
    scores = kernels.score_pairs_threaded(prepared, idx, np.arange(len(pool), dtype=np.int64))
    ranked = sorted(
        ((float(s), n) for s, n in zip(scores, pool) if s >= threshold),
        key=lambda t: (-t[0], t[1]))
    return [n for _, n in ranked[:limit]]


def _resolve_original_name(name: str, record_names: list[str],
                           registry: IdentityRegistry, threshold: float,
                           region: str) -> str:
    exact = registry.entity_of(name)
    if exact:
        return exact
    # same-record DWPI names first
    candidates = sorted({normalize_name(n) for n in record_names if normalize_name(n)})
    if candidates:
        me = kernels.prepare_name(name)
        scored = sorted(
            ((float(kernels.score_one(me, kernels.prepare_name(c))), c) for c in candidates),
            key=lambda t: (-t[0], t[1]))
        if scored and scored[0][0] >= threshold:
            target = registry.entity_of(scored[0][1])
            if target:
                return target
    # global fallback: best five names anywhere, settled by the cascade
    top = _top_global_candidates(name, registry, threshold)
    if top:
        cands = []
        seen = set()
        for cand_name in top:
            eid = registry.entity_of(cand_name)
            if eid and eid not in seen:
                seen.add(eid)
                ent = registry.entities[eid]
                cands.append(CandidateComponent(eid, ent.code, ent.names))
        if cands:
            return resolve_name(name, cands)
    return registry.add_singleton(name, region=region)


def original_match_scores(patents: list[PatentRecord]) -> list[float]:
    """Similarity of each first original name to its record's DWPI names.

    This is the per-record score pool whose histogram feeds otsu_threshold.
    """
    out = []
    for pat in patents:
        if not pat.first_assignee_names or not pat.assignee_name_pool:
            continue
        name = normalize_name(pat.first_assignee_names[0])
        if not name:
            continue
        me = kernels.prepare_name(name)
        best = 0.0
        for dwpi_name, _ in pat.assignee_name_pool:
            dwpi_name = normalize_name(dwpi_name)
            if dwpi_name:
                best = max(best, float(kernels.score_one(me, kernels.prepare_name(dwpi_name))))
        out.append(best)
    return out


def match_original_names(patents: list[PatentRecord], registry: IdentityRegistry,
                         threshold: float) -> dict[str, tuple[str, ...]]:
    """Resolve each patent's first-assignee names to entity ids.

    Exact registry hits win; otherwise the best same-record DWPI name at or
    above the threshold; otherwise the top-5 global candidates run through
    the resolve_name cascade; otherwise a new singleton entity. Patents with
    no original names fall back to their first DWPI name's entity. May add
    singleton entities to the registry.
    """
    assignments: dict[str, tuple[str, ...]] = {}
    for pat in patents:
        region = parse_region(pat.first_assignee_address)
        record_names = [n for n, _ in pat.assignee_name_pool]
        entity_ids: list[str] = []
        if pat.first_assignee_names:
            for raw in pat.first_assignee_names:
                name = normalize_name(raw)
                if not name:
                    continue
                entity_ids.append(_resolve_original_name(
                    name, record_names, registry, threshold, region))
        elif record_names:
            first = registry.entity_of(record_names[0])
            if first is None:
                first = registry.add_singleton(record_names[0], region=region)
            entity_ids.append(first)
        else:
            logger.info("patent %s has no assignee names; uncredited", pat.application_id)
        deduped = tuple(dict.fromkeys(entity_ids))
        if deduped:
            assignments[pat.application_id] = deduped
    return assignments


@dataclass(frozen=True)
class CreditRow:
    application_id: str
    year: int
    region: str
    category: str
    credits: tuple[tuple[str, float], ...]  # (entity id, fractional credit), sums to 1
    area: int | None = None  # technology area, attached after clustering


@dataclass(frozen=True)
class CreditLedger:
    rows: tuple[CreditRow, ...]

    def total_by_entity(self) -> dict[str, float]:
        totals: dict[str, float] = {}
        for row in self.rows:
            for entity_id, credit in row.credits:
                totals[entity_id] = totals.get(entity_id, 0.0) + credit
        return totals


def allocate_credits(patents: list[PatentRecord],
                     assignments: dict[str, tuple[str, ...]],
                     registry: IdentityRegistry) -> CreditLedger:
    """One ledger row per credited patent: region from the first original
    assignee address, category by majority over first-assignee entities
    (ties → others), credit 1/k to each of the k distinct entities."""
    rows = []
    for pat in patents:
        entity_ids = assignments.get(pat.application_id)
        if not entity_ids:
            continue
        share = 1.0 / len(entity_ids)
        category = patent_category([registry.category_of(e) for e in entity_ids])
        rows.append(CreditRow(
            application_id=pat.application_id,
            year=pat.year,
            region=parse_region(pat.first_assignee_address),
            category=category,
            credits=tuple((e, share) for e in entity_ids),
        ))
    return CreditLedger(tuple(rows))


def attach_areas(ledger: CreditLedger, clustering) -> CreditLedger:
    """Fill each row's technology area from the clustering's row partition."""
    part = clustering.row_partition()
    rows = tuple(replace(row, area=part.get(row.application_id)) for row in ledger.rows)
    return CreditLedger(rows)


def fill_regions(registry: IdentityRegistry, ledger: CreditLedger) -> None:
    """Set each entity's region to the majority region of its credited
    patents (ties → lexicographically smallest; none → unknown)."""
    votes: dict[str, Counter] = {}
    for row in ledger.rows:
        if row.region == UNKNOWN_REGION:
            continue
        for entity_id, _ in row.credits:
            votes.setdefault(entity_id, Counter())[row.region] += 1
    for entity_id, counter in votes.items():
        if entity_id in registry.entities:
            best = min(counter.items(), key=lambda kv: (-kv[1], kv[0]))[0]
            registry.entities[entity_id] = replace(registry.entities[entity_id], region=best)
