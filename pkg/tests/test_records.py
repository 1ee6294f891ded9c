"""Record parsing, normalization, and the frozen serialization sentence."""

import pytest

from erhybrid.errors import DuplicateId, MalformedInput, MissingColumn
from erhybrid.records import (
    CANONICAL_FIELDS,
    Record,
    Source,
    normalize,
    parse_csv,
    parse_jsonl,
    serialize,
    write_csv,
    write_jsonl,
)

GOLDEN_SENTENCE = (
    "The username Maresha with email sharifi@email.com and domain example.com "
    "on server82 has active status."
)


def test_serialize_golden_sentence(make_record):
    assert serialize(make_record()) == GOLDEN_SENTENCE


def test_serialize_is_total_over_missing_fields():
    record = Record(record_id="r1", source=Source.QUERY, fields={})
    assert serialize(record) == "The username  with email  and domain  on  has  status."


def test_serialize_keeps_field_case(make_record):
    record = make_record(username="MARESHA", status="ACTIVE")
    sentence = serialize(record)
    assert "MARESHA" in sentence and "ACTIVE" in sentence


def test_normalize_strips_and_lowercases_status(make_record):
    record = make_record(username="  Maresha ", email=" a@b.c", status=" Active\t")
    cleaned = normalize(record)
    assert cleaned.fields["username"] == "Maresha"
    assert cleaned.fields["email"] == "a@b.c"
    assert cleaned.fields["status"] == "active"


def test_normalize_fills_missing_fields():
    record = Record(record_id="r1", source=Source.QUERY, fields={"username": "x"})
    cleaned = normalize(record)
    assert set(cleaned.fields) == set(CANONICAL_FIELDS)
    assert cleaned.fields["email"] == ""


def test_normalize_keeps_username_case(make_record):
    assert normalize(make_record(username="MiXeD")).fields["username"] == "MiXeD"


def test_field_value_defaults_to_empty():
    record = Record(record_id="r1", source=Source.QUERY, fields={})
    assert record.field_value("email") == ""


def test_csv_round_trip(tmp_path, make_record):
    records = [make_record(record_id=f"r{i}", username=f"user{i}") for i in range(5)]
    path = tmp_path / "records.csv"
    write_csv(records, path)
    back = parse_csv(path, Source.REFERENCE)
    assert [r.record_id for r in back] == [r.record_id for r in records]
    assert all(a.fields == b.fields for a, b in zip(back, records))
    assert all(r.source is Source.REFERENCE for r in back)


def test_csv_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("record_id,username,email,domain,servername\nr1,u,e,d,s\n")
    with pytest.raises(MissingColumn, match="status"):
        parse_csv(path, Source.REFERENCE)


def test_csv_duplicate_id_names_offender(tmp_path, make_record):
    path = tmp_path / "dup.csv"
    write_csv([make_record("u1"), make_record("u1")], path)
    with pytest.raises(DuplicateId, match="u1"):
        parse_csv(path, Source.REFERENCE)


def test_csv_ragged_row_names_line(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text(
        "record_id,username,email,domain,servername,status\n"
        "r1,u,e,d,s,active\n"
        "r2,u,e\n"
    )
    with pytest.raises(MalformedInput, match=":3"):
        parse_csv(path, Source.REFERENCE)


def test_csv_empty_file_is_malformed(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(MalformedInput, match="header"):
        parse_csv(path, Source.REFERENCE)


def test_csv_header_only_yields_no_records(tmp_path):
    path = tmp_path / "header.csv"
    path.write_text("record_id,username,email,domain,servername,status\n")
    assert parse_csv(path, Source.REFERENCE) == []


def test_csv_extra_columns_ignored(tmp_path):
    path = tmp_path / "extra.csv"
    path.write_text(
        "record_id,username,email,domain,servername,status,notes\n"
        "r1,u,e,d,s,active,ignored\n"
    )
    records = parse_csv(path, Source.REFERENCE)
    assert len(records) == 1
    assert "notes" not in records[0].fields


def test_csv_empty_record_id_rejected(tmp_path):
    path = tmp_path / "noid.csv"
    path.write_text(
        "record_id,username,email,domain,servername,status\n,u,e,d,s,active\n"
    )
    with pytest.raises(MalformedInput, match="record_id"):
        parse_csv(path, Source.REFERENCE)


def test_jsonl_round_trip(tmp_path, make_record):
    records = [make_record(record_id=f"r{i}") for i in range(3)]
    path = tmp_path / "records.jsonl"
    write_jsonl(records, path)
    back = parse_jsonl(path, Source.QUERY)
    assert [r.record_id for r in back] == ["r0", "r1", "r2"]
    assert back[0].fields == records[0].fields
    assert back[0].source is Source.QUERY


def test_jsonl_skips_blank_lines(tmp_path, make_record):
    path = tmp_path / "records.jsonl"
    write_jsonl([make_record("r0")], path)
    path.write_text("\n" + path.read_text() + "\n\n")
    assert len(parse_jsonl(path, Source.QUERY)) == 1


def test_jsonl_bad_json_names_line(tmp_path, make_record):
    path = tmp_path / "bad.jsonl"
    write_jsonl([make_record("r0")], path)
    with open(path, "a") as fh:
        fh.write("{not json\n")
    with pytest.raises(MalformedInput, match=":2"):
        parse_jsonl(path, Source.QUERY)


def test_jsonl_missing_key(tmp_path):
    path = tmp_path / "missing.jsonl"
    path.write_text('{"record_id": "r1", "username": "u"}\n')
    with pytest.raises(MissingColumn, match="email"):
        parse_jsonl(path, Source.QUERY)


def test_jsonl_non_string_value(tmp_path):
    path = tmp_path / "typed.jsonl"
    path.write_text(
        '{"record_id": "r1", "username": "u", "email": 5, "domain": "d", '
        '"servername": "s", "status": "active"}\n'
    )
    with pytest.raises(MalformedInput, match="email"):
        parse_jsonl(path, Source.QUERY)


def test_jsonl_non_object_line(tmp_path):
    path = tmp_path / "list.jsonl"
    path.write_text("[1, 2, 3]\n")
    with pytest.raises(MalformedInput, match="object"):
        parse_jsonl(path, Source.QUERY)


def test_jsonl_duplicate_id(tmp_path, make_record):
    path = tmp_path / "dup.jsonl"
    write_jsonl([make_record("u1"), make_record("u1")], path)
    with pytest.raises(DuplicateId, match="u1"):
        parse_jsonl(path, Source.QUERY)
