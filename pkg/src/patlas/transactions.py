"""US reassignment/licensing field parsing and aggregate statistics.

The raw field is a ``;;``-separated list of 9-slot pipe-delimited records:

    Assignee | Assignor | Assignee Date | Assignee Year | Document Number |
    Document Date | Document Year | Reason(s) | Legal Agent

An event is a license when "LICENSE" appears in Reason(s) (case-insensitive);
everything else (ASSIGNMENT, MERGER, CHANGE OF NAME, ...) counts as a
reassignment.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

from .entity import CreditLedger, IdentityRegistry, normalize_name
from .errors import TransactionParseError
from .ingest import PatentRecord

N_SLOTS = 9
RECORD_DELIMITER = ";;"


@dataclass(frozen=True)
class TransactionEvent:
    application_id: str
    kind: str  # "reassignment" | "license"
    assignee_name: str   # receiving party (licensee for licenses)
    assignor_name: str   # giving party (licensor / previous owner)
    year: int | None
    reasons: str
    slots: tuple[str, ...]
    assignee_entity: str | None = None
    assignor_entity: str | None = None
    from_category: str | None = None
    to_category: str | None = None
    internal: bool = False


def parse_reassignment_field(raw: str, application_id: str = "") -> list[TransactionEvent]:
    """Parse one raw field into events (names only; resolve_events adds ids).

    A record with a slot count other than 9 raises TransactionParseError
    carrying the character offset of that record.
    """
    events: list[TransactionEvent] = []
    if raw is None or not raw.strip():
        return events
    offset = 0
    for segment in raw.split(RECORD_DELIMITER):
        stripped = segment.strip()
        if stripped:
            slots = [s.strip() for s in segment.split("|")]
            if len(slots) != N_SLOTS:
                raise TransactionParseError(
                    f"expected {N_SLOTS} pipe-delimited slots, got {len(slots)}",
                    offset + (len(segment) - len(segment.lstrip())))
            year = int(slots[3]) if slots[3].lstrip("-").isdigit() else None
            reasons = slots[7]
            kind = "license" if "LICENSE" in reasons.upper() else "reassignment"
            events.append(TransactionEvent(
                application_id=application_id,
                kind=kind,
                assignee_name=normalize_name(slots[0]),
                assignor_name=normalize_name(slots[1]),
                year=year,
                reasons=reasons,
                slots=tuple(slots),
            ))
        offset += len(segment) + len(RECORD_DELIMITER)
    return events


def canonical_field(events: list[TransactionEvent]) -> str:
    """Canonical serialization; parse(canonical_field(parse(raw))) round-trips."""
    return RECORD_DELIMITER.join(" | ".join(e.slots) for e in events)


def load_aliases(path) -> dict[str, str]:
    """Family alias file: JSON {family: [entity names...]} -> name -> family."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    out = {}
    for family, names in doc.items():
        for name in names:
            out[normalize_name(name)] = family
    return out


def resolve_events(events: list[TransactionEvent], registry: IdentityRegistry,
                   threshold: float, aliases: Mapping[str, str] | None = None,
                   fuzzy: bool = True) -> list[TransactionEvent]:
    """Attach entity ids, categories, and the internal-transfer flag.

    Names resolve through the registry (exact match, then the same fuzzy
    cascade used for original names when ``fuzzy``, else new singletons).
    An event is internal when both sides resolve to the same entity or the
    same alias family.
    """
    from .entity import _resolve_original_name  # shared cascade

    aliases = aliases or {}
    resolved = []
    cache: dict[str, str] = {}

    def resolve(name: str) -> str:
        if name in cache:
            return cache[name]
        if fuzzy:
            eid = _resolve_original_name(name, [], registry, threshold, "unknown")
        else:
            eid = registry.entity_of(name) or registry.add_singleton(name)
        cache[name] = eid
        return eid

    for ev in events:
        assignee_entity = resolve(ev.assignee_name) if ev.assignee_name else None
        assignor_entity = resolve(ev.assignor_name) if ev.assignor_name else None
        internal = False
        if assignee_entity and assignor_entity:
            if assignee_entity == assignor_entity:
                internal = True
            else:
                fam_a = aliases.get(ev.assignee_name)
                fam_b = aliases.get(ev.assignor_name)
                internal = fam_a is not None and fam_a == fam_b
        resolved.append(replace(
            ev,
            assignee_entity=assignee_entity,
            assignor_entity=assignor_entity,
            from_category=registry.category_of(assignor_entity) if assignor_entity else None,
            to_category=registry.category_of(assignee_entity) if assignee_entity else None,
            internal=internal,
        ))
    return resolved


def collect_events(patents: list[PatentRecord], registry: IdentityRegistry,
                   threshold: float, aliases: Mapping[str, str] | None = None,
                   fuzzy: bool = True) -> list[TransactionEvent]:
    events = []
    for pat in patents:
        if pat.us_reassignment_field:
            events.extend(parse_reassignment_field(pat.us_reassignment_field,
                                                   pat.application_id))
    return resolve_events(events, registry, threshold, aliases, fuzzy)


# ---------------------------------------------------------------------------
# aggregate statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReassignmentCategoryStats:
    category: str
    total_patents: int
    unchanged: int
    changed: int
    pct_unchanged: float
    pct_changed: float
    n_transactions: int
    n_internal: int
    pair_counts: dict          # (from_category, to_category) -> transactions
    pair_pcts: dict            # same keys, percent of all transactions
    pair_counts_external: dict
    pair_pcts_external: dict


@dataclass(frozen=True)
class LicensingCategoryStats:
    category: str
    total_patents: int
    histogram: dict[int, int]  # times licensed -> patent count
    licensed_patents: int
    pct_licensed: float
    instances: int


@dataclass(frozen=True)
class LicensingStats:
    per_category: dict[str, LicensingCategoryStats]
    total_instances: int
    top_licensors: list[tuple[str, float]]          # (entity, fractional credit)
    licensees: list[tuple[str, int, int]]           # (entity, corp-source, univ-source)


def _pair_table(events) -> tuple[dict, dict]:
    counts = Counter((e.from_category, e.to_category) for e in events)
    total = sum(counts.values())
    pcts = {pair: 100.0 * n / total for pair, n in counts.items()} if total else {}
    return dict(counts), pcts


def reassignment_stats(events: list[TransactionEvent],
                       categories: Mapping[str, str]) -> dict[str, ReassignmentCategoryStats]:
    """Per origin category: unchanged/changed patent counts and percentages,
    transaction counts, and transaction category-pair shares (with and
    without internal transfers). ``categories`` maps every patent in scope to
    its origin category."""
    reassignments = [e for e in events if e.kind == "reassignment"
                     and e.application_id in categories]
    changed_apps: dict[str, set] = defaultdict(set)
    by_cat: dict[str, list] = defaultdict(list)
    for ev in reassignments:
        cat = categories[ev.application_id]
        changed_apps[cat].add(ev.application_id)
        by_cat[cat].append(ev)
    out = {}
    for cat in sorted(set(categories.values())):
        total = sum(1 for c in categories.values() if c == cat)
        changed = len(changed_apps.get(cat, ()))
        evs = by_cat.get(cat, [])
        external = [e for e in evs if not e.internal]
        pair_counts, pair_pcts = _pair_table(evs)
        ext_counts, ext_pcts = _pair_table(external)
        out[cat] = ReassignmentCategoryStats(
            category=cat,
            total_patents=total,
            unchanged=total - changed,
            changed=changed,
            pct_unchanged=100.0 * (total - changed) / total if total else 0.0,
            pct_changed=100.0 * changed / total if total else 0.0,
            n_transactions=len(evs),
            n_internal=len(evs) - len(external),
            pair_counts=pair_counts,
            pair_pcts=pair_pcts,
            pair_counts_external=ext_counts,
            pair_pcts_external=ext_pcts,
        )
    return out


def licensing_stats(events: list[TransactionEvent], categories: Mapping[str, str],
                    ledger: CreditLedger | None = None,
                    top_k: int = 10) -> LicensingStats:
    """License histograms per origin category, licensed-at-least-once shares,
    instance totals, top licensors by fractional credit of their licensed
    patents, and the licensee table split by source category."""
    licenses = [e for e in events if e.kind == "license" and e.application_id in categories]
    times: dict[str, Counter] = defaultdict(Counter)      # category -> app -> times
    for ev in licenses:
        times[categories[ev.application_id]][ev.application_id] += 1

    per_category = {}
    total_instances = 0
    for cat in sorted(set(categories.values())):
        total = sum(1 for c in categories.values() if c == cat)
        hist: Counter = Counter(times.get(cat, Counter()).values())
        licensed = sum(hist.values())
        instances = sum(t * n for t, n in hist.items())
        total_instances += instances
        per_category[cat] = LicensingCategoryStats(
            category=cat,
            total_patents=total,
            histogram=dict(sorted(hist.items())),
            licensed_patents=licensed,
            pct_licensed=100.0 * licensed / total if total else 0.0,
            instances=instances,
        )

    credit_of: dict[tuple[str, str], float] = {}
    if ledger is not None:
        for row in ledger.rows:
            for entity_id, credit in row.credits:
                credit_of[(row.application_id, entity_id)] = credit
    licensor_patents: dict[str, set] = defaultdict(set)
    for ev in licenses:
        if ev.assignor_entity:
            licensor_patents[ev.assignor_entity].add(ev.application_id)
    licensor_credit = {
        entity: sum(credit_of.get((app, entity), 1.0) for app in apps)
        for entity, apps in licensor_patents.items()
    }
    top_licensors = sorted(licensor_credit.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]

    licensee_counts: dict[str, Counter] = defaultdict(Counter)
    for ev in licenses:
        if ev.assignee_entity:
            licensee_counts[ev.assignee_entity][categories[ev.application_id]] += 1
    licensees = sorted(
        ((ent, c["corporation"], c["university"]) for ent, c in licensee_counts.items()),
        key=lambda t: (-(t[1] + t[2]), t[0]))
    return LicensingStats(per_category, total_instances, top_licensors, licensees)
