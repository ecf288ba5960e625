import json

import pytest
from hypothesis import given, strategies as st

from nl2f.errors import CorpusFormatError
from nl2f.tables import (
    BLANK,
    Boolean,
    Column,
    ErrorValue,
    Example,
    Number,
    Table,
    Text,
    cell_to_text,
    load_corpus,
    parse_cell,
    save_corpus,
    table_from_strings,
)

from conftest import make_table


class TestParseCell:
    def test_numeric_literal(self):
        assert parse_cell("3.5") == Number(3.5)

    def test_integer(self):
        assert parse_cell("42") == Number(42.0)

    def test_empty_is_blank(self):
        assert parse_cell("") == BLANK

    def test_known_error_code(self):
        assert parse_cell("#DIV/0!") == ErrorValue("#DIV/0!")

    def test_all_error_codes(self):
        for code in ("#DIV/0!", "#VALUE!", "#NAME?", "#N/A"):
            assert parse_cell(code) == ErrorValue(code)

    def test_unknown_hash_string_is_text(self):
        assert parse_cell("#REFRESH") == Text("#REFRESH")

    def test_booleans_case_insensitive(self):
        assert parse_cell("TRUE") == Boolean(True)
        assert parse_cell("false") == Boolean(False)

    def test_text(self):
        assert parse_cell("hello world") == Text("hello world")

    def test_nan_inf_are_text(self):
        assert parse_cell("nan") == Text("nan")
        assert parse_cell("inf") == Text("inf")

    @given(st.text(max_size=30))
    def test_total_and_deterministic(self, s):
        assert parse_cell(s) == parse_cell(s)

    @given(st.text(max_size=30))
    def test_display_roundtrip(self, s):
        cell = parse_cell(s)
        assert parse_cell(cell_to_text(cell)) == cell


class TestTableInvariants:
    def test_ragged_rows_rejected(self):
        with pytest.raises(ValueError, match="row count mismatch"):
            table_from_strings(["A", "B"], [["1", "2"], ["3"]])

    def test_duplicate_headers_rejected(self):
        with pytest.raises(ValueError, match="distinct"):
            Table((Column("A", (BLANK,)), Column("A", (BLANK,))))

    def test_empty_header_rejected(self):
        with pytest.raises(ValueError):
            Column("", (BLANK,))

    def test_no_columns_rejected(self):
        with pytest.raises(ValueError):
            Table(())

    def test_zero_rows_rejected(self):
        with pytest.raises(ValueError):
            Table((Column("A", ()),))

    def test_row_access(self):
        t = make_table(["A", "B"], [[1, 2], [3, 4]])
        assert t.row_count == 2
        assert t.row(1) == [Number(3.0), Number(4.0)]


def _demo_examples(n=3):
    examples = []
    for i in range(n):
        examples.append(
            Example(
                id=f"ex{i}",
                table=make_table(["A", "B"], [[i, i + 1], [i * 2, i + 3]]),
                formula_text="=[A]+[B]",
                utterance=f"add A and B ({i})" if i % 2 == 0 else None,
            )
        )
    return examples


class TestCorpusIO:
    def test_two_records(self, tmp_path):
        path = tmp_path / "c.jsonl"
        save_corpus(_demo_examples(2), path)
        loaded = load_corpus(path)
        assert len(loaded) == 2

    def test_round_trip_identity(self, tmp_path):
        examples = _demo_examples(50)
        path = tmp_path / "c.jsonl"
        save_corpus(examples, path)
        assert load_corpus(path) == examples

    def test_empty_corpus(self, tmp_path):
        path = tmp_path / "c.jsonl"
        save_corpus([], path)
        assert path.read_text() == ""
        assert load_corpus(path) == []

    def test_one_line_per_example(self, tmp_path):
        path = tmp_path / "c.jsonl"
        save_corpus(_demo_examples(1), path)
        assert path.read_text().count("\n") == 1

    def test_ragged_table_error_names_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        record = {
            "id": "x",
            "table": {"headers": ["A", "B"], "rows": [["1", "2", "3"], ["4", "5"]]},
            "formula": "=[A]",
        }
        path.write_text(json.dumps(record) + "\n")
        with pytest.raises(CorpusFormatError, match="line 1.*row count mismatch"):
            load_corpus(path)

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "c.jsonl"
        save_corpus(_demo_examples(1) + _demo_examples(1), path)
        with pytest.raises(CorpusFormatError, match="duplicate id"):
            load_corpus(path)

    def test_malformed_line_reported(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"id": "a"\n')
        with pytest.raises(CorpusFormatError, match="line 1"):
            load_corpus(path)

    def test_missing_field_reported(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text(json.dumps({"id": "a", "formula": "=[A]"}) + "\n")
        with pytest.raises(CorpusFormatError, match="table"):
            load_corpus(path)

    def test_deterministic_bytes(self, tmp_path):
        examples = _demo_examples(5)
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_corpus(examples, p1)
        save_corpus(examples, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_verdicts_survive_round_trip(self, tmp_path):
        from nl2f.tables import VerdictRecord

        example = _demo_examples(1)[0].with_verdict(
            "VO", VerdictRecord(True, "predicted correctly")
        )
        path = tmp_path / "c.jsonl"
        save_corpus([example], path)
        assert load_corpus(path)[0].verdicts["VO"].accepted is True
