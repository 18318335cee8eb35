"""Seeded synthetic-corpus generation with ground-truth sidecars.

Every generator here plants a known structure (block memberships, name
identities, transaction counts, degree exponents) and reports it alongside
the data, so tests can compare recovered structure against the plant.
"""

from __future__ import annotations

import csv
import io
import json
import string
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import PatlasError
from .ingest import RawRecord, SparseBinaryMatrix

_LETTERS = string.ascii_uppercase


# ---------------------------------------------------------------------------
# planted matrices
# ---------------------------------------------------------------------------

def planted_matrix(n_rows: int, n_cols: int, g: int, p_in: float, p_out: float,
                   seed: int = 0):
    """Block-diagonal noisy matrix with balanced planted row/col blocks.

    Returns (matrix, row_blocks, col_blocks). Rows and columns are guaranteed
    nonempty (a random in-block entry is forced where needed).
    """
    if not (0 <= p_out <= p_in <= 1):
        raise PatlasError("need 0 <= p_out <= p_in <= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    row_blocks = np.arange(n_rows) % g
    col_blocks = np.arange(n_cols) % g
    same = row_blocks[:, None] == col_blocks[None, :]
    probs = np.where(same, p_in, p_out)
    dense = rng.random((n_rows, n_cols)) < probs
    for i in np.flatnonzero(dense.sum(axis=1) == 0):
        own = np.flatnonzero(col_blocks == row_blocks[i])
        dense[i, rng.choice(own)] = True
    for j in np.flatnonzero(dense.sum(axis=0) == 0):
        own = np.flatnonzero(row_blocks == col_blocks[j])
        dense[rng.choice(own), j] = True
    return SparseBinaryMatrix.from_dense(dense), row_blocks, col_blocks


def power_law_column_matrix(n_cols: int = 2000, exponent: float = -1.0,
                            max_degree: int = 100, seed: int = 0):
    """Matrix whose column degrees are drawn from p(k) ∝ k**exponent.

    Returns (matrix, degrees). Rows are sized generously so collisions do not
    distort the planted degrees.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    ks = np.arange(1, max_degree + 1, dtype=np.float64)
    weights = ks ** exponent
    weights /= weights.sum()
    degrees = rng.choice(np.arange(1, max_degree + 1), size=n_cols, p=weights)
    n_rows = int(max_degree * 3)
    rows: list[list[int]] = [[] for _ in range(n_rows)]
    for j, deg in enumerate(degrees):
        for i in rng.choice(n_rows, size=int(deg), replace=False):
            rows[i].append(j)
    keep = [r for r in rows if r]
    return SparseBinaryMatrix.from_rows(keep, n_cols), degrees


# ---------------------------------------------------------------------------
# duplicate-publication fixture
# ---------------------------------------------------------------------------

def duplicate_records(n_applications: int, n_publications: int, seed: int = 0):
    """Bare RawRecords where n_publications collapse to n_applications.

    Every application gets one record; the surplus duplicates are spread over
    random applications with later years.
    """
    if n_publications < n_applications:
        raise PatlasError("need at least one publication per application")
    rng = np.random.Generator(np.random.PCG64(seed))
    records = []
    for i in range(n_applications):
        records.append(RawRecord(
            publication_id=f"P{i:07d}A", application_id=f"APP{i:07d}",
            application_year=2005 + int(rng.integers(0, 10)),
            title="", abstract="", ipc_subclasses=("H01M",),
            dwpi_assignees=(), original_assignees=()))
    extra = rng.integers(0, n_applications, size=n_publications - n_applications)
    for k, owner in enumerate(extra):
        base = records[int(owner)]
        records.append(RawRecord(
            publication_id=f"P{k:07d}B", application_id=base.application_id,
            application_year=base.application_year + 2,
            title="", abstract="", ipc_subclasses=("H01M", "C01B"),
            dwpi_assignees=(), original_assignees=()))
    order = rng.permutation(len(records))
    return [records[int(i)] for i in order]


# ---------------------------------------------------------------------------
# name-resolution fixture
# ---------------------------------------------------------------------------

def _random_token(rng, lo: int, hi: int) -> str:
    length = int(rng.integers(lo, hi + 1))
    return "".join(_LETTERS[int(c)] for c in rng.integers(0, 26, size=length))


def _token_bank(rng, count: int, lo: int, hi: int) -> list[str]:
    bank: set[str] = set()
    while len(bank) < count:
        bank.add(_random_token(rng, lo, hi))
    return sorted(bank)


def _edit_token(rng, token: str, n_edits: int) -> str:
    chars = list(token)
    positions = rng.choice(len(chars), size=min(n_edits, len(chars)), replace=False)
    for pos in positions:
        old = chars[int(pos)]
        repl = old
        while repl == old:
            repl = _LETTERS[int(rng.integers(0, 26))]
        chars[int(pos)] = repl
    return "".join(chars)


@dataclass(frozen=True)
class NamePool:
    names_by_code: dict[str, list[str]]
    identity_of_name: dict[str, int]
    n_identities: int


def name_pool(n_identities: int = 500, variants_lo: int = 3, variants_hi: int = 6,
              shared_code_fraction: float = 0.2, n_junk_codes: int = 1750,
              junk_names_per_code: int = 22, seed: int = 0) -> NamePool:
    """Planted identity families plus junk codes for percentile splitting.

    Each identity contributes ``variants_lo..variants_hi`` name variants
    (token reorders, suffix extensions, and 1-2 character edits of a base
    name). A fraction of identities share a DWPI code pairwise; junk codes
    hold mutually dissimilar short names so that the within-identity pair
    scores sit in the top percentile of the pooled distribution.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    id_vocab = _token_bank(rng, n_identities * 6, 5, 8)
    vocab_pos = 0

    def take_tokens(k: int) -> list[str]:
        nonlocal vocab_pos
        out = id_vocab[vocab_pos:vocab_pos + k]
        vocab_pos += k
        return out

    names_by_code: dict[str, list[str]] = {}
    identity_of_name: dict[str, int] = {}
    forms = ("C", "N", "C0", "X")
    code_bank = _token_bank(rng, n_identities + n_junk_codes + 8, 4, 4)

    def identity_names(idx: int) -> list[str]:
        base_tokens = take_tokens(int(rng.integers(3, 5)))
        base = " ".join(base_tokens)
        total = int(rng.integers(variants_lo, variants_hi + 1))
        names = [base]
        ops = ["shuffle", "suffix", "edit", "shuffle", "suffix"]
        while len(names) < total:
            op = ops[(len(names) - 1) % len(ops)]
            if op == "shuffle":
                perm = list(rng.permutation(base_tokens))
                cand = " ".join(perm)
            elif op == "suffix":
                cand = base + " " + take_tokens(1)[0]
            else:
                tok_idx = max(range(len(base_tokens)), key=lambda t: len(base_tokens[t]))
                edited = _edit_token(rng, base_tokens[tok_idx], int(rng.integers(1, 3)))
                cand = " ".join(edited if t == tok_idx else tok
                                for t, tok in enumerate(base_tokens))
            if cand not in names:
                names.append(cand)
        return names

    pair_next: tuple[str, int] | None = None  # (code, remaining slots)
    code_cursor = 0
    for idx in range(n_identities):
        if pair_next is not None:
            code = pair_next[0]
            pair_next = None
        else:
            code = f"{code_bank[code_cursor]}|{forms[idx % len(forms)]}"
            code_cursor += 1
            if rng.random() < shared_code_fraction:
                pair_next = (code, 1)
        members = identity_names(idx)
        names_by_code.setdefault(code, []).extend(members)
        for name in members:
            identity_of_name[name] = idx

    junk_vocab = _token_bank(rng, 4000, 4, 7)
    junk_arr = np.array(junk_vocab)
    for j in range(n_junk_codes):
        code = f"{code_bank[code_cursor + j]}|N"
        picks = rng.choice(len(junk_arr), size=2 * junk_names_per_code, replace=False)
        names = [f"{junk_arr[picks[2 * k]]} {junk_arr[picks[2 * k + 1]]}"
                 for k in range(junk_names_per_code)]
        names_by_code[code] = names
    return NamePool(names_by_code, identity_of_name, n_identities)


def pool_names_by_code(pool: NamePool) -> dict[str, list[str]]:
    return {code: sorted(set(names)) for code, names in sorted(pool.names_by_code.items())}


# ---------------------------------------------------------------------------
# transaction fixture
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransactionPlan:
    """Planted reassignment/licensing activity per origin category."""

    patents: dict[str, int]                      # category -> patent count
    reassignment_pairs: dict[str, dict[tuple[str, str], int]] = field(default_factory=dict)
    changed_patents: dict[str, int] = field(default_factory=dict)
    license_histogram: dict[str, dict[int, int]] = field(default_factory=dict)
    licensees: dict[str, dict[str, int]] = field(default_factory=dict)
    # licensees: licensee name -> {origin category -> planted event count}
    year: int = 2012


_CATEGORY_NAME = {
    "corporation": "PLANTCO {i:05d} CO LTD",
    "university": "UNIV PLANT {i:05d}",
    "others": "PLANT AGENCY {i:05d}",
}


def _reassignment_string(assignee: str, assignor: str, year: int, k: int) -> str:
    return (f"{assignee} | {assignor} | {year}-06-01 | {year} | DOC{k:07d} | "
            f"{year}-06-05 | {year} | ASSIGNMENT OF ASSIGNORS INTEREST | AGENT")


def _license_string(assignee: str, assignor: str, year: int, k: int) -> str:
    return (f"{assignee} | {assignor} | {year}-06-01 | {year} | DOC{k:07d} | "
            f"{year}-06-05 | {year} | LICENSE AGREEMENT | AGENT")


@dataclass(frozen=True)
class TransactionFixture:
    categories: dict[str, str]         # application_id -> origin category
    owner_of: dict[str, str]           # application_id -> owner entity name
    fields: dict[str, str]             # application_id -> raw reassignment field
    counterparty_names: dict[str, str]  # counterparty name -> its category


def transaction_fixture(plan: TransactionPlan) -> TransactionFixture:
    """Deterministic corpus of raw 9-slot strings realizing the plan.

    Reassignment events are spread so each planted changed patent gets one
    event first and surplus events wrap around; license events follow the
    per-category histogram and draw licensee names from the plan.
    """
    categories: dict[str, str] = {}
    owner_of: dict[str, str] = {}
    apps_by_cat: dict[str, list[str]] = {}
    for cat, count in sorted(plan.patents.items()):
        prefix = cat[:4].upper()
        apps = [f"{prefix}{i:06d}" for i in range(count)]
        apps_by_cat[cat] = apps
        for i, app in enumerate(apps):
            categories[app] = cat
            owner_of[app] = _CATEGORY_NAME[cat].format(i=i)

    counterparties: dict[str, str] = {}

    def counterparty(cat: str, k: int) -> str:
        name = _CATEGORY_NAME[cat].format(i=900000 + k)
        counterparties[name] = cat
        return name

    fields: dict[str, list[str]] = {}
    doc = 0
    for cat, pairs in sorted(plan.reassignment_pairs.items()):
        apps = apps_by_cat[cat]
        changed = plan.changed_patents[cat]
        slots: list[str] = []
        for (_, to_cat), n in sorted(pairs.items()):
            slots.extend([to_cat] * n)
        for k, to_cat in enumerate(slots):
            app = apps[k % changed]
            receiver = counterparty(to_cat, k)
            fields.setdefault(app, []).append(
                _reassignment_string(receiver, owner_of[app], plan.year, doc))
            doc += 1

    for cat, hist in sorted(plan.license_histogram.items()):
        apps = apps_by_cat[cat]
        licensee_slots: list[str] = []
        for name, per_cat in sorted(plan.licensees.items()):
            licensee_slots.extend([name] * per_cat.get(cat, 0))
        next_app = len(apps) - 1  # license from the tail so reassigned ones stay clean
        slot = 0
        for times, n_patents in sorted(hist.items()):
            for _ in range(n_patents):
                app = apps[next_app]
                next_app -= 1
                for _ in range(times):
                    licensee = (licensee_slots[slot] if slot < len(licensee_slots)
                                else counterparty("others", 990000 + slot))
                    slot += 1
                    fields.setdefault(app, []).append(
                        _license_string(licensee, owner_of[app], plan.year, doc))
                    doc += 1

    raw_fields = {app: ";;".join(parts) for app, parts in fields.items()}
    return TransactionFixture(categories, owner_of, raw_fields, counterparties)


# ---------------------------------------------------------------------------
# full corpus generator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthSpec:
    """Planted-structure parameters for a full synthetic corpus."""

    n_patents: int = 2000
    n_blocks: int = 7
    n_codes: int = 84
    p_in: float = 0.35
    p_out: float = 0.01
    year_min: int = 2004
    year_max: int = 2017
    extra_publication_rate: float = 0.15
    n_entities: int = 250
    joint_assignee_rate: float = 0.1
    noisy_original_rate: float = 0.1
    regions: tuple[str, ...] = ("CN", "US", "KR", "JP", "DE", "GB")
    region_weights: tuple[float, ...] = (0.3, 0.25, 0.15, 0.15, 0.1, 0.05)
    category_weights: tuple[float, ...] = (0.6, 0.3, 0.1)  # corp, univ, others
    ramp_area: int = 2
    ramp_from: float = 0.05
    ramp_to: float = 0.45
    ramp_year_start: int = 2008
    signature_words_per_block: int = 3
    common_vocab: int = 120
    tokens_per_doc: int = 10
    reassignment_rate: float = 0.06
    license_rate: float = 0.04
    max_subclasses: int = 19

    def validate(self) -> None:
        if not (0 <= self.p_out <= self.p_in <= 1):
            raise PatlasError("densities must satisfy 0 <= p_out <= p_in <= 1")
        if self.n_codes < self.n_blocks:
            raise PatlasError("need at least one code per block")
        if self.n_patents < 1 or self.n_entities < 1:
            raise PatlasError("need at least one patent and one entity")
        if not 0 <= self.ramp_area < self.n_blocks:
            raise PatlasError("ramp_area outside block range")
        if len(self.region_weights) != len(self.regions):
            raise PatlasError("region weights must match regions")


def code_universe(n: int) -> list[str]:
    """First n syntactically valid IPC subclasses, deterministic."""
    out = []
    for first in _LETTERS[:8]:
        for digits in range(1, 100):
            for last in _LETTERS:
                out.append(f"{first}{digits:02d}{last}")
                if len(out) == n:
                    return out
    raise PatlasError("code universe exhausted")


_WORDS = (
    "layer film oxide carbon metal device substrate battery sensor membrane "
    "anode cathode electrode composite polymer thermal flexible transparent "
    "conductive coating dispersion nanosheet transistor circuit module cell "
    "electrolyte separator catalyst reaction filter purification treatment "
    "deposition growth reduction exfoliation synthesis precursor doping sheet "
    "heater display panel antenna ink resin rubber alloy fiber textile foam "
    "lubricant adhesive barrier capacitor storage charge discharge current "
    "voltage frequency optical laser diode photodetector imaging biosensor "
    "electrochemical plasma vapor solution solvent aqueous powder granule "
    "porous hybrid lattice quantum electron mobility bandgap semiconductor"
).split()


def _doc_words(rng, spec: SynthSpec, block: int, sig_words) -> tuple[str, str]:
    words = list(sig_words[block])
    pool_size = min(spec.common_vocab, len(_WORDS))
    extra = rng.choice(pool_size, size=spec.tokens_per_doc, replace=True)
    words.extend(_WORDS[int(w)] for w in extra)
    title = " ".join(words[:5])
    abstract = " ".join(words[5:])
    return title, abstract


def generate_synthetic_corpus(spec: SynthSpec, seed: int, out_path,
                              sidecar_path=None, fmt: str = "jsonl"):
    """Write a corpus file plus a ground-truth sidecar; returns the sidecar.

    The sidecar records the planted block of every application and code, the
    name->entity identities, regions/categories, the planted transaction
    counts, and the per-block signature words.
    """
    spec.validate()
    if fmt not in ("jsonl", "csv"):
        raise PatlasError(f"unknown corpus format {fmt!r}")
    rng = np.random.Generator(np.random.PCG64(seed))

    codes = code_universe(spec.n_codes)
    block_of_code = {code: i % spec.n_blocks for i, code in enumerate(codes)}
    codes_by_block = [[c for c in codes if block_of_code[c] == b]
                      for b in range(spec.n_blocks)]

    sig_words = {b: [f"{_WORDS[(b * 7 + k) % len(_WORDS)]}{b}"
                     for k in range(spec.signature_words_per_block)]
                 for b in range(spec.n_blocks)}

    # entities: name variants, one DWPI code each, home region, category
    cat_names = ("corporation", "university", "others")
    entities = []
    for e in range(spec.n_entities):
        cat = cat_names[int(rng.choice(3, p=list(spec.category_weights)))]
        stem = f"{_random_token(rng, 5, 8)} {_random_token(rng, 4, 7)}"
        if cat == "corporation":
            primary = f"{stem} CO LTD"
            variants = [primary, f"{stem} CORP"]
        elif cat == "university":
            primary = f"UNIV {stem}"
            variants = [primary, f"{stem} UNIVERSITY"]
        else:
            primary = f"{stem} RES CENTER"
            variants = [primary]
        if rng.random() < 0.5 and len(variants) > 1:
            variants = variants[:1]
        code = f"{primary[:4].replace(' ', 'X')}{e:03d}|{'C' if rng.random() < 0.7 else 'N'}"
        region = spec.regions[int(rng.choice(len(spec.regions), p=list(spec.region_weights)))]
        entities.append({"primary": primary, "variants": variants, "code": code,
                         "region": region, "category": cat})

    licensee_names = [f"GOV OFFICE {k:02d}" for k in range(6)]

    years = spec.year_min + rng.integers(0, spec.year_max - spec.year_min + 1,
                                         size=spec.n_patents)
    entity_weights = 1.0 / (1.0 + np.arange(spec.n_entities)) ** 0.8
    entity_weights /= entity_weights.sum()

    def block_for(year: int) -> int:
        span = max(1, spec.year_max - spec.ramp_year_start)
        frac = min(1.0, max(0.0, (year - spec.ramp_year_start) / span))
        ramp_share = spec.ramp_from + (spec.ramp_to - spec.ramp_from) * frac
        weights = np.full(spec.n_blocks, (1.0 - ramp_share) / (spec.n_blocks - 1))
        weights[spec.ramp_area] = ramp_share
        return int(rng.choice(spec.n_blocks, p=weights))

    records: list[dict] = []
    block_of_application: dict[str, int] = {}
    entity_of_application: dict[str, list[int]] = {}
    n_events = {"reassignment": 0, "license": 0}
    doc_counter = 0

    for i in range(spec.n_patents):
        app_id = f"APP{i:06d}"
        year = int(years[i])
        block = block_for(year)
        block_of_application[app_id] = block

        own = codes_by_block[block]
        other = [c for c in codes if block_of_code[c] != block]
        picked = [c for c in own if rng.random() < spec.p_in]
        picked += [c for c in other if rng.random() < spec.p_out]
        if not picked:
            picked = [own[int(rng.integers(0, len(own)))]]
        if len(picked) > spec.max_subclasses:
            keep = rng.choice(len(picked), size=spec.max_subclasses, replace=False)
            picked = [picked[int(k)] for k in sorted(keep)]

        owners = [int(rng.choice(spec.n_entities, p=entity_weights))]
        if rng.random() < spec.joint_assignee_rate:
            second = int(rng.choice(spec.n_entities, p=entity_weights))
            if second != owners[0]:
                owners.append(second)
        entity_of_application[app_id] = owners

        dwpi = []
        original = []
        for owner in owners:
            ent = entities[owner]
            for variant in ent["variants"]:
                dwpi.append([variant, ent["code"]])
            orig_name = ent["primary"]
            if rng.random() < spec.noisy_original_rate:
                tokens = orig_name.split()
                tokens[0] = _edit_token(rng, tokens[0], 1)
                orig_name = " ".join(tokens)
            original.append([orig_name, f"CITY {owner:03d}, {ent['region']}"])

        reassignment = None
        parts = []
        if rng.random() < spec.reassignment_rate:
            other_ent = entities[int(rng.integers(0, spec.n_entities))]
            parts.append(_reassignment_string(other_ent["primary"],
                                              entities[owners[0]]["primary"],
                                              year + 1, doc_counter))
            n_events["reassignment"] += 1
            doc_counter += 1
        if rng.random() < spec.license_rate:
            licensee = licensee_names[int(rng.integers(0, len(licensee_names)))]
            parts.append(_license_string(licensee, entities[owners[0]]["primary"],
                                         year + 2, doc_counter))
            n_events["license"] += 1
            doc_counter += 1
        if parts:
            reassignment = ";;".join(parts)

        title, abstract = _doc_words(rng, spec, block, sig_words)
        records.append({
            "publication_id": f"PUB{i:06d}A",
            "application_id": app_id,
            "application_year": year,
            "title": title,
            "abstract": abstract,
            "ipc": sorted(set(picked)),
            "dwpi_assignees": dwpi,
            "original_assignees": original,
            "us_reassignment": reassignment,
        })

    # make sure every code occurs at least once
    used = {c for rec in records for c in rec["ipc"]}
    for code in codes:
        if code not in used:
            block = block_of_code[code]
            hosts = [r for r in records
                     if block_of_application[r["application_id"]] == block]
            host = hosts[int(rng.integers(0, len(hosts)))] if hosts else records[0]
            host["ipc"] = sorted(set(host["ipc"]) | {code})

    # duplicate publications: same application, later year, extra code
    n_extra = int(round(spec.extra_publication_rate * spec.n_patents))
    for k in range(n_extra):
        base = records[int(rng.integers(0, spec.n_patents))]
        dup = dict(base)
        dup["publication_id"] = f"PUB{k:06d}B"
        dup["application_year"] = base["application_year"] + 2
        records.append(dup)
    order = rng.permutation(len(records))
    records = [records[int(i)] for i in order]

    _write_corpus(records, out_path, fmt)

    identity_of_name = {}
    for e, ent in enumerate(entities):
        for variant in ent["variants"]:
            identity_of_name[variant] = e
    sidecar = {
        "n_applications": spec.n_patents,
        "n_publications": len(records),
        "codes": codes,
        "block_of_code": block_of_code,
        "block_of_application": block_of_application,
        "entity_of_application": entity_of_application,
        "identity_of_name": identity_of_name,
        "category_of_entity": {str(e): ent["category"] for e, ent in enumerate(entities)},
        "region_of_entity": {str(e): ent["region"] for e, ent in enumerate(entities)},
        "primary_name_of_entity": {str(e): ent["primary"] for e, ent in enumerate(entities)},
        "signature_words": {str(b): w for b, w in sig_words.items()},
        "ramp_area": spec.ramp_area,
        "planted_events": n_events,
    }
    if sidecar_path is not None:
        Path(sidecar_path).write_text(
            json.dumps(sidecar, indent=2, sort_keys=True), encoding="utf-8")
    return sidecar


def _write_corpus(records: list[dict], out_path, fmt: str) -> None:
    out_path = Path(out_path)
    if fmt == "jsonl":
        lines = [json.dumps(rec, sort_keys=True) for rec in records]
        out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["publication_id", "application_id", "application_year", "title",
                     "abstract", "ipc", "dwpi_assignees", "original_assignees",
                     "us_reassignment"])
    for rec in records:
        writer.writerow([
            rec["publication_id"], rec["application_id"], rec["application_year"],
            rec["title"], rec["abstract"],
            ";".join(rec["ipc"]),
            ";".join(f"{n}|{c}" for n, c in rec["dwpi_assignees"]),
            ";".join(f"{n}|{a}" for n, a in rec["original_assignees"]),
            rec["us_reassignment"] or "",
        ])
    out_path.write_text(buf.getvalue(), encoding="utf-8")
