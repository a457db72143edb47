"""Loader tests: DART JSON, E2E CSV, and the synthetic corpus."""

import csv
import json

import pytest

from conftest import DART_SOURCE, DART_TARGET, E2E_SOURCE, E2E_TARGET
from d2t_selftrain import (
    DatasetError,
    Direction,
    RecordKind,
    delinearize,
    extract_source_values,
    generate_batch,
    load_dart,
    load_e2e,
    normalize_text,
    rule_based_handle,
    synthetic_dataset,
    value_in_text,
)
from d2t_selftrain.datasets import SplitName

GOLDEN_DART_ENTRY = {
    "tripleset": [
        ["Clapham", "STARTED", "20 August"],
        ["Clapham", "ENDED", "20 November"],
        ["Clapham", "LOAN_CLUB", "Wolverhampton Wanderers"],
    ],
    "annotations": [{"text": DART_TARGET}],
}

GOLDEN_E2E_MR = (
    "name[The Golden Curry], food[English], customer rating[5 out of 5], "
    "area[riverside], familyFriendly[yes], near[Café Rouge]"
)


def _write_dart(tmp_path, entries):
    path = tmp_path / "dart.json"
    path.write_text(json.dumps(entries), encoding="utf-8")
    return path


def _write_e2e(tmp_path, rows, header=("mr", "ref")):
    path = tmp_path / "e2e.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


class TestLoadDart:
    def test_golden_entry(self, tmp_path):
        split = load_dart(_write_dart(tmp_path, [GOLDEN_DART_ENTRY]))
        assert split.name is SplitName.TRAIN
        assert split.load_warnings == ()
        assert len(split) == 1
        ex = split.examples[0]
        assert ex.source_text == DART_SOURCE
        assert ex.target == DART_TARGET
        assert ex.source.kind is RecordKind.TRIPLESET
        assert len(ex.source.records) == 3
        # the stored source string parses back to the stored record set
        assert delinearize(ex.source_text, RecordKind.TRIPLESET).record_set == ex.source

    def test_split_name_passthrough(self, tmp_path):
        path = _write_dart(tmp_path, [GOLDEN_DART_ENTRY])
        assert load_dart(path, SplitName.TEST).name is SplitName.TEST

    def test_annotation_may_be_plain_string(self, tmp_path):
        entry = {"tripleset": [["A", "P", "B"]], "annotations": ["Plain string ref."]}
        split = load_dart(_write_dart(tmp_path, [entry]))
        assert len(split) == 1
        assert split.examples[0].target == "Plain string ref."

    def test_multi_annotation_entry_expands(self, tmp_path):
        entry = {
            "tripleset": [["A", "P", "B"]],
            "annotations": [{"text": "First."}, {"text": "Second."}],
        }
        split = load_dart(_write_dart(tmp_path, [entry]))
        assert [ex.target for ex in split.examples] == ["First.", "Second."]
        assert split.examples[0].source_text == split.examples[1].source_text

    def test_malformed_entries_skipped_with_warnings(self, tmp_path):
        entries = [
            GOLDEN_DART_ENTRY,
            "not an object",
            {"tripleset": [], "annotations": [{"text": "x"}]},
            {"tripleset": [["a", "b"]], "annotations": [{"text": "x"}]},
            {"tripleset": [["A", "P", "B"]]},
            {"tripleset": [["A", "P", "B"]], "annotations": [{"text": "   "}]},
            {
                "tripleset": [["A", "P", "B"], ["bad", "", "field"]],
                "annotations": [{"text": "A stands by B."}, {"text": "B is past A."}],
            },
        ]
        split = load_dart(_write_dart(tmp_path, entries))
        assert len(split) == 3
        assert split.examples[0].source_text == DART_SOURCE
        # the mixed entry drops its bad triple but keeps both annotations
        assert split.examples[1].source_text == "A : P : B"
        assert split.examples[2].source_text == "A : P : B"
        assert [ex.target for ex in split.examples[1:]] == [
            "A stands by B.",
            "B is past A.",
        ]
        assert len(split.load_warnings) == 8
        expected = [
            "entry 1: not an object, skipped",
            "entry 2: empty or missing tripleset, skipped",
            "entry 3: triple 0 is not [s, p, o] strings, dropped",
            "entry 3: no usable triples, skipped",
            "entry 4: no annotations, skipped",
            "entry 5: annotation 0 has no text, dropped",
            "entry 5: all annotations unusable, skipped",
        ]
        assert list(split.load_warnings[:7]) == expected
        assert split.load_warnings[7].startswith("entry 6: triple 1 rejected")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError, match="cannot read"):
            load_dart(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(DatasetError, match="not valid JSON"):
            load_dart(path)

    def test_top_level_must_be_array(self, tmp_path):
        path = tmp_path / "obj.json"
        path.write_text(json.dumps({"tripleset": []}), encoding="utf-8")
        with pytest.raises(DatasetError, match="JSON array"):
            load_dart(path)


class TestLoadE2e:
    def test_golden_row(self, tmp_path):
        split = load_e2e(_write_e2e(tmp_path, [(GOLDEN_E2E_MR, E2E_TARGET)]))
        assert split.load_warnings == ()
        assert len(split) == 1
        ex = split.examples[0]
        assert ex.source_text == E2E_SOURCE
        assert ex.target == E2E_TARGET
        assert ex.source.kind is RecordKind.MR_SET
        assert delinearize(ex.source_text, RecordKind.MR_SET).record_set == ex.source

    def test_bad_rows_skipped_with_warnings(self, tmp_path):
        rows = [
            (GOLDEN_E2E_MR, E2E_TARGET),
            ("food[French], area[city centre]", "A French place in the city centre."),
            ("", "Some ref."),
            ("name[A]", ""),
            ("name[A] junk", "Has trailing junk."),
            ("name[A [nested] thing]", "Nested ref."),
            ("name[]", "Empty value."),
        ]
        split = load_e2e(_write_e2e(tmp_path, rows))
        assert len(split) == 3
        assert split.examples[0].source_text == E2E_SOURCE
        # no name attribute: first key stands in as the subject
        assert split.examples[1].source_text == "food : French | area : city centre"
        assert split.examples[2].source.records[0].value == "A [nested] thing"
        warnings = list(split.load_warnings)
        assert len(warnings) == 5
        assert warnings[0] == "row 1: no name attribute, using 'food' as subject"
        assert warnings[1] == "row 2: empty mr, skipped"
        assert warnings[2] == "row 3: missing ref, skipped"
        assert warnings[3].startswith("row 4: unparseable mr")
        assert warnings[4].startswith("row 6: unparseable mr")

    def test_unbalanced_brackets_warn(self, tmp_path):
        split = load_e2e(_write_e2e(tmp_path, [("name[A", "Ref.")]))
        assert len(split) == 0
        assert "unbalanced brackets" in split.load_warnings[0]

    def test_comma_inside_value_survives(self, tmp_path):
        split = load_e2e(_write_e2e(tmp_path, [("name[A, B and C]", "Ref.")]))
        assert split.examples[0].source.records[0].value == "A, B and C"

    def test_missing_columns(self, tmp_path):
        path = _write_e2e(tmp_path, [("x", "y")], header=("meaning", "ref"))
        with pytest.raises(DatasetError, match="mr/ref"):
            load_e2e(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError, match="cannot read"):
            load_e2e(tmp_path / "nope.csv")


class TestSynthetic:
    def test_sizes_and_names(self):
        train, val, test = synthetic_dataset(n_train=12, n_val=4, n_test=5, seed=3)
        assert (len(train), len(val), len(test)) == (12, 4, 5)
        assert train.name is SplitName.TRAIN
        assert val.name is SplitName.VALIDATION
        assert test.name is SplitName.TEST

    def test_default_sizes(self):
        train, val, test = synthetic_dataset()
        assert (len(train), len(val), len(test)) == (200, 30, 30)

    def test_deterministic(self):
        a = synthetic_dataset(n_train=20, n_val=5, n_test=5, seed=9)
        b = synthetic_dataset(n_train=20, n_val=5, n_test=5, seed=9)
        assert a == b
        c = synthetic_dataset(n_train=20, n_val=5, n_test=5, seed=10)
        assert a != c

    def test_subjects_globally_unique(self):
        splits = synthetic_dataset(n_train=30, n_val=10, n_test=10, seed=5)
        subjects = [
            ex.source.records[0].subject for split in splits for ex in split.examples
        ]
        assert len(subjects) == len(set(subjects))
        for split in splits:
            for ex in split.examples:
                assert len({r.subject for r in ex.source.records}) == 1
                assert 1 <= len(ex.source.records) <= 3

    def test_gold_targets_cover_all_values(self):
        splits = synthetic_dataset(n_train=25, n_val=5, n_test=5, seed=8)
        for split in splits:
            for ex in split.examples:
                for value in extract_source_values(ex.source):
                    assert value_in_text(value, ex.target)

    def test_gold_targets_longer_than_rule_output(self):
        # leaves the optimizer and the length condition real work to do
        train, _, _ = synthetic_dataset(n_train=25, n_val=5, n_test=5, seed=8)
        d2t = rule_based_handle(Direction.D2T)
        outputs = generate_batch(d2t, [ex.source_text for ex in train.examples])
        for ex, out in zip(train.examples, outputs):
            assert len(normalize_text(out)) < len(normalize_text(ex.target))

    def test_sources_round_trip(self):
        train, _, _ = synthetic_dataset(n_train=15, n_val=5, n_test=5, seed=2)
        for ex in train.examples:
            assert (
                delinearize(ex.source_text, RecordKind.TRIPLESET).record_set
                == ex.source
            )
