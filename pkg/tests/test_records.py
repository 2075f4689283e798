from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcqcal import errors
from mcqcal.records import (
    ChoiceFormat,
    MCQItem,
    dump_dataset,
    dump_record,
    load_dataset,
    load_items,
    validate_record,
)

GOOD = {
    "item_id": "q1",
    "task": "mmlu",
    "model_id": "m",
    "shots": 0,
    "choice_format": "plain",
    "choices": ["A", "B", "C", "D"],
    "choice_logits": [1.5, -0.25, 0.0, 3.0],
    "choice_probs_fullvocab": [0.1, 0.05, 0.02, 0.7],
    "format_identifier_prob": None,
    "label_index": 2,
    "permutation_id": None,
    "position": None,
}


def test_wellformed_record_accepted_unchanged():
    rec = validate_record(dict(GOOD))
    assert rec.item_id == "q1"
    assert rec.choice_logits == (1.5, -0.25, 0.0, 3.0)
    assert rec.label_index == 2
    assert rec.choice_format is ChoiceFormat.PLAIN


def test_logit_choice_length_mismatch():
    bad = dict(GOOD, choice_logits=[1.0, 2.0, 3.0])
    with pytest.raises(errors.LengthMismatch):
        validate_record(bad)


def test_fullvocab_sum_above_one_rejected():
    bad = dict(GOOD, choice_probs_fullvocab=[0.6, 0.5, 0.1, 0.1])
    with pytest.raises(errors.OutOfRange):
        validate_record(bad)


def test_fullvocab_sum_tolerates_float_noise():
    ok = dict(GOOD, choice_probs_fullvocab=[0.25, 0.25, 0.25, 0.2500000001])
    assert validate_record(ok).choice_probs_fullvocab is not None


def test_missing_required_field():
    bad = dict(GOOD)
    del bad["model_id"]
    with pytest.raises(errors.MissingField):
        validate_record(bad)


def test_nonfinite_logit_rejected():
    with pytest.raises(errors.NonFinite):
        validate_record(dict(GOOD, choice_logits=[1.0, float("nan"), 0.0, 2.0]))
    with pytest.raises(errors.NonFinite):
        validate_record(dict(GOOD, choice_logits=[1.0, float("inf"), 0.0, 2.0]))


def test_probability_outside_unit_interval():
    with pytest.raises(errors.OutOfRange):
        validate_record(dict(GOOD, format_identifier_prob=1.5))


def test_label_out_of_range():
    with pytest.raises(errors.OutOfRange):
        validate_record(dict(GOOD, label_index=4))


def test_noncanonical_choice_letters_rejected():
    with pytest.raises(errors.SchemaError):
        validate_record(dict(GOOD, choices=["B", "A", "C", "D"]))


def test_validate_is_idempotent():
    rec = validate_record(dict(GOOD))
    assert validate_record(rec) == rec


def _lines(*objs):
    return [json.dumps(o) for o in objs]


def test_load_preserves_order():
    lines = _lines(
        dict(GOOD, item_id="a"), dict(GOOD, item_id="b"), dict(GOOD, item_id="c")
    )
    ds = load_dataset(lines)
    assert [r.item_id for r in ds.records] == ["a", "b", "c"]


def test_empty_stream_is_empty_dataset():
    ds = load_dataset([])
    assert len(ds) == 0 and ds.rejects == ()


def test_strict_load_names_bad_line():
    lines = _lines(dict(GOOD, item_id="a"), dict(GOOD, item_id="b"))
    lines.append('{"item_id": "c"}')
    with pytest.raises(errors.MissingField, match="line 3"):
        load_dataset(lines)


def test_lenient_load_keeps_good_lines_and_reports():
    lines = _lines(dict(GOOD, item_id="a"), dict(GOOD, item_id="b"))
    lines.insert(1, "not json at all")
    ds = load_dataset(lines, lenient=True)
    assert [r.item_id for r in ds.records] == ["a", "b"]
    assert len(ds.rejects) == 1 and ds.rejects[0].line_number == 2


def test_duplicate_item_permutation_key():
    lines = _lines(dict(GOOD), dict(GOOD))
    with pytest.raises(errors.DuplicateKey):
        load_dataset(lines)
    ok = _lines(dict(GOOD, permutation_id=0), dict(GOOD, permutation_id=1))
    assert len(load_dataset(ok)) == 2


def test_blank_lines_skipped():
    lines = [json.dumps(GOOD), "", "   "]
    assert len(load_dataset(lines)) == 1


def test_roundtrip_identity():
    lines = _lines(
        dict(GOOD, item_id="a", choice_logits=[0.1, 1 / 3, -2.5e-17, 9.87654321012345e100]),
        dict(GOOD, item_id="b", label_index=None, choice_probs_fullvocab=None),
    )
    ds = load_dataset(lines)
    again = load_dataset(dump_dataset(ds).splitlines())
    assert again.records == ds.records
    assert dump_dataset(again) == dump_dataset(ds)


@settings(max_examples=60, deadline=None)
@given(
    logits=st.lists(
        st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=2, max_size=8
    ),
    label=st.integers(min_value=0, max_value=7),
    perm=st.one_of(st.none(), st.integers(min_value=0, max_value=1000)),
)
def test_roundtrip_property(logits, label, perm):
    raw = dict(
        GOOD,
        choices=list("ABCDEFGH"[: len(logits)]),
        choice_logits=logits,
        choice_probs_fullvocab=None,
        label_index=label % len(logits),
        permutation_id=perm,
    )
    rec = validate_record(raw)
    assert validate_record(json.loads(dump_record(rec))) == rec


def test_item_validation():
    item = MCQItem("i", "t", "q", ("a", "b"), 1)
    assert item.gold_index == 1
    with pytest.raises(errors.SchemaError):
        MCQItem("i", "t", "q", ("only-one",), None)
    with pytest.raises(errors.OutOfRange):
        MCQItem("i", "t", "q", ("a", "b"), 2)


def test_load_items_order_and_errors():
    rows = [
        {"item_id": "x", "task": "t", "question": "q1", "candidates": ["a", "b"], "gold_index": 0},
        {"item_id": "y", "task": "t", "question": "q2", "candidates": ["a", "b", "c"], "gold_index": None},
    ]
    items = load_items([json.dumps(r) for r in rows])
    assert [i.item_id for i in items] == ["x", "y"]
    with pytest.raises(errors.SchemaError, match="line 1"):
        load_items(['{"item_id": "x"}'])
