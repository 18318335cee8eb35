"""Parsing, application merging, matrix building, degree distributions."""

import json
import random

import numpy as np
import pytest

from patlas import synth
from patlas.errors import ConfigError, ParseError, PatlasError
from patlas.ingest import (PatentRecord, RawRecord, SparseBinaryMatrix,
                           degree_distribution, filter_and_build_matrix,
                           load_corpus, merge_applications, parse_records,
                           save_corpus)


def jline(**over):
    rec = {
        "publication_id": "US20110187654A1",
        "application_id": "US2010456789A",
        "application_year": 2008,
        "title": "Conductive polymer-coated metal electro-catalyst assemblies for fuel cells",
        "abstract": "An electro-catalyst composition.",
        "ipc": ["H01M"],
        "dwpi_assignees": [["ACME CORP", "ACME|C"]],
        "original_assignees": [["ACME CORP", "Springfield, US"]],
        "us_reassignment": None,
    }
    rec.update(over)
    return json.dumps(rec)


def test_parse_jsonl_basic(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text(jline() + "\n", encoding="utf-8")
    records = parse_records(path, "jsonl")
    assert len(records) == 1
    rec = records[0]
    assert rec.publication_id == "US20110187654A1"
    assert rec.application_id == "US2010456789A"
    assert rec.ipc_subclasses == ("H01M",)
    assert rec.dwpi_assignees == (("ACME CORP", "ACME|C"),)


def test_parse_empty_file(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text("", encoding="utf-8")
    assert parse_records(path, "jsonl") == []


def test_parse_missing_application_id_errors_with_line(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text(jline() + "\n" + jline(publication_id="P2", application_id="") + "\n",
                    encoding="utf-8")
    with pytest.raises(ParseError) as err:
        parse_records(path, "jsonl")
    assert err.value.line_number == 2


def test_parse_duplicate_publication_id(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text(jline() + "\n" + jline() + "\n", encoding="utf-8")
    with pytest.raises(ParseError):
        parse_records(path, "jsonl")


def test_parse_unknown_format(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text(jline(), encoding="utf-8")
    with pytest.raises(ConfigError):
        parse_records(path, "parquet")


def test_parse_truncates_deep_ipc_codes(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text(jline(ipc=["H01M10/052"]), encoding="utf-8")
    assert parse_records(path, "jsonl")[0].ipc_subclasses == ("H01M",)


def test_parse_rejects_bad_ipc(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text(jline(ipc=["1234"]), encoding="utf-8")
    with pytest.raises(ParseError):
        parse_records(path, "jsonl")


def test_csv_round_trip_with_pipe_codes(tmp_path):
    spec = synth.SynthSpec(n_patents=40, n_entities=12)
    synth.generate_synthetic_corpus(spec, 3, tmp_path / "c.jsonl", None, fmt="jsonl")
    synth.generate_synthetic_corpus(spec, 3, tmp_path / "c.csv", None, fmt="csv")
    from_jsonl = merge_applications(parse_records(tmp_path / "c.jsonl", "jsonl"))
    from_csv = merge_applications(parse_records(tmp_path / "c.csv", "csv"))
    assert from_jsonl == from_csv
    # DWPI codes keep their internal pipe through the CSV pair encoding
    pool = {code for p in from_csv for _, code in p.assignee_name_pool}
    assert any("|" in code for code in pool)


def test_merge_two_publications_one_application():
    a = RawRecord("US20110187654A1", "US2010456789A", 2008, "old title", "old",
                  ("H01M",), (), ())
    b = RawRecord("US9987654B2", "US2010456789A", 2016, "new title", "new",
                  ("C01B",), (("X CO", "XC|C"),), (("X CO", "City, US"),))
    merged = merge_applications([a, b])
    assert len(merged) == 1
    rec = merged[0]
    assert rec.merged_publication_ids == ("US20110187654A1", "US9987654B2")
    assert rec.year == 2008                       # earliest application year
    assert rec.title == "new title"               # latest publication text
    assert rec.ipc_subclasses == ("C01B", "H01M")  # union
    assert rec.first_assignee_names == ("X CO",)


def test_merge_single_record_identity():
    a = RawRecord("P1", "A1", 2010, "t", "ab", ("H01M",), (), (("N", "X, CN"),))
    merged = merge_applications([a])
    assert len(merged) == 1
    assert merged[0].application_id == "A1"
    assert merged[0].year == 2010
    assert merged[0].first_assignee_address == "X, CN"


def test_merge_order_independent_and_idempotent():
    records = synth.duplicate_records(200, 260, seed=5)
    merged = merge_applications(records)
    shuffled = list(records)
    random.Random(9).shuffle(shuffled)
    assert merge_applications(shuffled) == merged
    # merging the merged output (reserialized as raw records) changes nothing
    as_raw = [RawRecord(p.merged_publication_ids[0], p.application_id, p.year,
                        p.title, p.abstract, p.ipc_subclasses, p.assignee_name_pool,
                        tuple((n, p.first_assignee_address) for n in p.first_assignee_names))
              for p in merged]
    again = merge_applications(as_raw)
    assert [p.application_id for p in again] == [p.application_id for p in merged]
    assert [p.year for p in again] == [p.year for p in merged]


def test_merge_planted_duplicate_collapse_full_scale():
    records = synth.duplicate_records(139_899, 176_193, seed=11)
    assert len(records) == 176_193
    merged = merge_applications(records)
    assert len(merged) == 139_899


def make_patent(app_id, codes, year=2010):
    return PatentRecord(app_id, year, tuple(sorted(set(codes))), (app_id + "P",),
                        "", "", (), "", ())


def test_matrix_excludes_codeless_patents():
    pats = [make_patent("A", ["H01M"]), make_patent("B", []), make_patent("C", ["C01B"])]
    m = filter_and_build_matrix(pats)
    assert m.n_rows == 2
    assert m.row_labels == ("A", "C")


def test_matrix_entry_per_code():
    m = filter_and_build_matrix([make_patent("A", ["H01M", "C01B"])])
    assert m.nnz == 2
    assert sorted(m.entries()) == [(0, 0), (0, 1)]


def test_matrix_all_codeless_errors():
    with pytest.raises(PatlasError):
        filter_and_build_matrix([make_patent("A", [])])


def test_matrix_planted_code_universe_584():
    codes = synth.code_universe(584)
    pats = [make_patent(f"A{i}", [codes[i % 584], codes[(i * 7 + 3) % 584]])
            for i in range(2000)]
    m = filter_and_build_matrix(pats)
    assert m.n_cols == 584
    assert m.nnz == sum(len(p.ipc_subclasses) for p in pats)


def test_matrix_entry_count_matches_dedup_union():
    pats = [make_patent("A", ["H01M", "H01M", "C01B"])]
    m = filter_and_build_matrix(pats)
    assert m.nnz == 2


def test_degree_distribution_single_degree_no_slope():
    m = SparseBinaryMatrix.from_dense(np.ones((5, 3), dtype=int))
    dd = degree_distribution(m, "rows")
    assert dd.points == ((3, 5),)
    assert dd.slope is None


def test_degree_distribution_frequencies_sum():
    m, _, _ = synth.planted_matrix(120, 30, 3, 0.5, 0.05, seed=2)
    dd = degree_distribution(m, "rows")
    assert sum(f for _, f in dd.points) == m.n_rows
    dd_c = degree_distribution(m, "cols")
    assert sum(f for _, f in dd_c.points) == m.n_cols


def test_degree_distribution_recovers_planted_exponent():
    m, _ = synth.power_law_column_matrix(n_cols=2000, exponent=-1.0, seed=4)
    dd = degree_distribution(m, "cols")
    assert dd.slope == pytest.approx(-1.0, abs=0.1)


def test_degree_distribution_bad_axis():
    m = SparseBinaryMatrix.from_dense(np.ones((2, 2), dtype=int))
    with pytest.raises(ConfigError):
        degree_distribution(m, "diag")


def test_corpus_round_trip(tmp_path):
    pats = [make_patent("A", ["H01M"]), make_patent("B", ["C01B", "H01M"])]
    save_corpus(pats, tmp_path / "c.bin")
    assert load_corpus(tmp_path / "c.bin") == pats


def test_corpus_bad_magic(tmp_path):
    (tmp_path / "bad.bin").write_bytes(b"NOTPATLAS")
    with pytest.raises(ConfigError):
        load_corpus(tmp_path / "bad.bin")


def test_take_rows_drops_empty_cols():
    dense = np.array([[1, 1, 0], [0, 0, 1], [1, 0, 0]])
    m = SparseBinaryMatrix.from_dense(dense, row_labels=("a", "b", "c"),
                                      col_labels=("x", "y", "z"))
    sub = m.take_rows([0, 2])
    assert sub.row_labels == ("a", "c")
    assert sub.col_labels == ("x", "y")
    assert sub.nnz == 3
